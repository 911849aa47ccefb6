#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "lotnet/errors.hpp"

namespace lotnet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// Throws NumericError naming `what` if any entry is NaN or Inf.
void require_finite(const Eigen::Ref<const Matrix>& m, const std::string& what);
bool all_finite(const Eigen::Ref<const Matrix>& m);

/// Returns W x + b.
Vector linear_forward(const Matrix& W, const Vector& b, const Vector& x);

// ---------------------------------------------------------------------------
// Randomness

/// Seeded generator whose streams are fixed by the seed alone.
///
/// Normal and uniform variates are derived from the raw 64-bit mt19937_64
/// output with explicit formulas, so the stream does not depend on the
/// standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t next_u64() { return engine_(); }
    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal();
    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n);
    /// Matrix of iid N(0,1) entries.
    Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols);
    /// Derives an independent child seed; `stream` selects the child.
    std::uint64_t derive_seed(std::uint64_t stream);
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// SplitMix64 finalizer; used to decorrelate derived seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

/// 64-bit FNV-1a; stable string hash for seeds and config digests.
std::uint64_t fnv1a64(std::string_view bytes);

// ---------------------------------------------------------------------------
// Optimizer

struct AdamConfig {
    double step_size = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct OptimState {
    AdamConfig cfg;
    Vector m;
    Vector v;
    std::int64_t step = 0;

    OptimState() = default;
    OptimState(AdamConfig c, Eigen::Index n) : cfg(c), m(Vector::Zero(n)), v(Vector::Zero(n)) {}
};

/// One bias-corrected Adam update of `params` in place.
/// Throws NumericError on non-finite gradients, DimensionError on shape mismatch.
void adam_step(Vector& params, const Vector& grads, OptimState& state);

// ---------------------------------------------------------------------------
// Finite differences (test oracle)

using ScalarFn = std::function<double(const Vector&)>;

/// Central difference (f(x + h e_i) - f(x - h e_i)) / 2h per coordinate.
Vector finite_diff_grad(const ScalarFn& f, const Vector& x, double h);

/// max_i |a_i - b_i| / max(|a|_inf, |b|_inf, floor).
double relative_error(const Vector& a, const Vector& b, double floor = 1e-8);

// ---------------------------------------------------------------------------
// Activations

enum class ActivationKind { SmoothRelu, Relu };

/// Convex non-decreasing rectifier. SmoothRelu is softplus(s a) / s.
struct Activation {
    ActivationKind kind = ActivationKind::SmoothRelu;
    double sharpness = 1.0;

    Matrix value(const Matrix& a) const;
    Matrix deriv(const Matrix& a) const;
    Matrix second_deriv(const Matrix& a) const;
    /// value and first derivative in one pass.
    void eval(const Matrix& a, Matrix& value, Matrix& deriv) const;
    /// Second derivative given the first (cheap for SmoothRelu).
    Matrix second_from_deriv(const Matrix& deriv) const;
    bool operator==(const Activation&) const = default;
};

std::string to_string(ActivationKind k);
ActivationKind activation_from_string(const std::string& s);

// ---------------------------------------------------------------------------
// Multilayer perceptron

/// Dense MLP with smooth activations on hidden layers and a linear output.
///
/// Parameters are stored per layer; `pack`/`unpack` give the flat view used
/// by the optimizer. Points are columns of the input matrix.
class Mlp {
public:
    struct Layer {
        Matrix W;
        Vector b;
    };

    Mlp() = default;
    /// sizes = {in, hidden..., out}; weights N(0, 1/fan_in), zero biases.
    Mlp(const std::vector<int>& sizes, Activation act, Rng& rng);

    int in_dim() const;
    int out_dim() const;
    std::vector<int> sizes() const;
    const Activation& activation() const { return act_; }
    std::vector<Layer>& layers() { return layers_; }
    const std::vector<Layer>& layers() const { return layers_; }

    Matrix forward(const Matrix& X) const;

    struct Tape {
        std::vector<Matrix> pre;   // pre-activations per layer
        std::vector<Matrix> post;  // inputs to each layer (post[0] = X)
    };
    Matrix forward(const Matrix& X, Tape& tape) const;

    /// Accumulates d(sum <upstream, out>)/d(params) into `grad` (flat layout)
    /// and returns the gradient with respect to the input batch.
    Matrix backward(const Tape& tape, const Matrix& upstream, Vector& grad) const;

    Eigen::Index num_params() const;
    Vector pack() const;
    void unpack(const Vector& flat);

private:
    std::vector<Layer> layers_;
    Activation act_;
};

double sigmoid(double s);

}  // namespace lotnet
