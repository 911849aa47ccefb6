#pragma once

#include <vector>

#include "lotnet/nncore.hpp"

namespace lotnet {

/// Architecture of a scalar input-convex network.
///
/// Hidden layer i computes z_{i+1} = g(Wx_i x + Wz_i z_i + b_i); the head is
/// linear with nonnegative Wz and adds quadratic * |x|^2 / 2 to the output.
struct IcnnConfig {
    int dim = 2;
    std::vector<int> widths{64, 64, 64};
    Activation activation{};
    double quadratic = 0.5;

    /// quadratic = 1 / (2 beta_hat), beta_hat being the assumed smoothness of
    /// the target's conjugate potential.
    static double quadratic_for_beta(double beta_hat);
    void validate() const;
    bool operator==(const IcnnConfig&) const = default;
};

struct IcnnLayer {
    Matrix Wx;  // width x dim, unconstrained
    Matrix Wz;  // width x previous width, entrywise >= 0; empty on the first layer
    Vector b;
};

struct IcnnParams {
    std::vector<IcnnLayer> layers;  // hidden layers followed by the 1-wide head

    /// Input weights N(0, 1/fan_in); pass-through weights take absolute values
    /// of the same scheme; zero biases.
    static IcnnParams init(const IcnnConfig& cfg, Rng& rng);
    static IcnnParams zeros(const IcnnConfig& cfg);

    Eigen::Index num_params() const;
    Vector pack() const;
    void unpack(const Vector& flat);
    bool all_finite() const;
    bool nonneg() const;
    bool operator==(const IcnnParams& o) const;
};

/// Clamps every pass-through weight to max(w, 0); other parameters untouched.
IcnnParams project_nonneg(IcnnParams params);
void project_nonneg_inplace(IcnnParams& params);

double icnn_forward(const IcnnParams& params, const IcnnConfig& cfg, const Vector& x);
/// Row vector of potentials for each column of X.
RowVector icnn_forward_batch(const IcnnParams& params, const IcnnConfig& cfg, const Matrix& X);

Vector icnn_input_grad(const IcnnParams& params, const IcnnConfig& cfg, const Vector& x);
/// Column k is the gradient of the potential at X.col(k), i.e. the transport map.
Matrix icnn_input_grad_batch(const IcnnParams& params, const IcnnConfig& cfg, const Matrix& X);

struct IcnnGrads {
    Vector params;   // flat, IcnnParams::pack layout
    Matrix input;    // one column per point
    RowVector value; // icnn_backward only: potentials at each point
};

/// Gradients of sum_k upstream_k * h(X_k) with respect to parameters and inputs.
IcnnGrads icnn_backward(const IcnnParams& params, const IcnnConfig& cfg, const Matrix& X,
                        const RowVector& upstream);

/// Single-point form: gradients of upstream * h(x).
IcnnGrads icnn_backward(const IcnnParams& params, const IcnnConfig& cfg, const Vector& x,
                        double upstream);

/// Gradients of sum_k <V_k, grad h(X_k)> with respect to parameters and inputs.
///
/// This is forward-over-reverse: the directional derivative of h along V_k is
/// propagated as a tangent and then differentiated in reverse. The input part
/// is the Hessian-vector product H(X_k) V_k.
IcnnGrads icnn_input_grad_backward(const IcnnParams& params, const IcnnConfig& cfg, const Matrix& X,
                                   const Matrix& V);

/// Config and parameters travelling together.
struct Icnn {
    IcnnConfig cfg;
    IcnnParams params;

    static Icnn make(const IcnnConfig& cfg, Rng& rng) { return {cfg, IcnnParams::init(cfg, rng)}; }
    double operator()(const Vector& x) const { return icnn_forward(params, cfg, x); }
    RowVector values(const Matrix& X) const { return icnn_forward_batch(params, cfg, X); }
    Matrix grad(const Matrix& X) const { return icnn_input_grad_batch(params, cfg, X); }
};

}  // namespace lotnet
