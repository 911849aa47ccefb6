#include "lotnet/icnn.hpp"

#include <cmath>

namespace lotnet {

namespace {

struct ForwardTape {
    std::vector<Matrix> post;   // Z_i = g(A_i) for hidden layers
    std::vector<Matrix> deriv;  // g'(A_i)
};

void check_input(const IcnnParams& params, const IcnnConfig& cfg, Eigen::Index rows) {
    require_dims(rows == cfg.dim, "ICNN input has dimension " + std::to_string(rows) +
                                      ", network expects " + std::to_string(cfg.dim));
    require_dims(params.layers.size() == cfg.widths.size() + 1, "ICNN params vs config depth");
}

RowVector run_forward(const IcnnParams& params, const IcnnConfig& cfg, const Matrix& X,
                      ForwardTape* tape) {
    check_input(params, cfg, X.rows());
    const std::size_t hidden = cfg.widths.size();
    Matrix z;
    for (std::size_t i = 0; i <= hidden; ++i) {
        const IcnnLayer& l = params.layers[i];
        Matrix a = l.Wx * X;
        if (i > 0) a.noalias() += l.Wz * z;
        a.colwise() += l.b;
        if (i < hidden) {
            if (tape) {
                Matrix d;
                cfg.activation.eval(a, z, d);
                tape->post.push_back(z);
                tape->deriv.push_back(std::move(d));
            } else {
                z = cfg.activation.value(a);
            }
        } else {
            RowVector out = a.row(0);
            if (cfg.quadratic != 0.0) out += 0.5 * cfg.quadratic * X.colwise().squaredNorm();
            return out;
        }
    }
    return {};
}

// Flat-gradient views matching IcnnParams::pack.
struct GradViews {
    std::vector<Eigen::Map<Matrix>> Wx, Wz;
    std::vector<Eigen::Map<Vector>> b;
};

GradViews views_into(Vector& flat, const IcnnParams& params) {
    GradViews v;
    Eigen::Index off = 0;
    for (const auto& l : params.layers) {
        v.Wx.emplace_back(flat.data() + off, l.Wx.rows(), l.Wx.cols());
        off += l.Wx.size();
        v.Wz.emplace_back(flat.data() + off, l.Wz.rows(), l.Wz.cols());
        off += l.Wz.size();
        v.b.emplace_back(flat.data() + off, l.b.size());
        off += l.b.size();
    }
    return v;
}

}  // namespace

double IcnnConfig::quadratic_for_beta(double beta_hat) {
    if (!(beta_hat > 0.0)) throw ConfigError("beta_hat must be > 0");
    return 1.0 / (2.0 * beta_hat);
}

void IcnnConfig::validate() const {
    if (dim < 1) throw ConfigError("ICNN input dim must be >= 1");
    if (widths.empty()) throw ConfigError("ICNN needs at least one hidden layer");
    for (int w : widths)
        if (w < 1) throw ConfigError("ICNN widths must be >= 1");
    if (!(quadratic >= 0.0) || !std::isfinite(quadratic)) throw ConfigError("ICNN quadratic coefficient must be >= 0");
    if (!(activation.sharpness > 0.0)) throw ConfigError("activation sharpness must be > 0");
}

IcnnParams IcnnParams::zeros(const IcnnConfig& cfg) {
    cfg.validate();
    IcnnParams p;
    int prev = 0;
    for (std::size_t i = 0; i <= cfg.widths.size(); ++i) {
        const int w = i < cfg.widths.size() ? cfg.widths[i] : 1;
        IcnnLayer l;
        l.Wx = Matrix::Zero(w, cfg.dim);
        l.Wz = Matrix::Zero(i == 0 ? 0 : w, i == 0 ? 0 : prev);
        l.b = Vector::Zero(w);
        p.layers.push_back(std::move(l));
        prev = w;
    }
    return p;
}

IcnnParams IcnnParams::init(const IcnnConfig& cfg, Rng& rng) {
    IcnnParams p = zeros(cfg);
    for (auto& l : p.layers) {
        l.Wx = rng.normal_matrix(l.Wx.rows(), l.Wx.cols()) / std::sqrt(static_cast<double>(cfg.dim));
        if (l.Wz.size() > 0)
            l.Wz = rng.normal_matrix(l.Wz.rows(), l.Wz.cols()).cwiseAbs() /
                   std::sqrt(static_cast<double>(l.Wz.cols()));
    }
    return p;
}

Eigen::Index IcnnParams::num_params() const {
    Eigen::Index n = 0;
    for (const auto& l : layers) n += l.Wx.size() + l.Wz.size() + l.b.size();
    return n;
}

Vector IcnnParams::pack() const {
    Vector flat(num_params());
    Eigen::Index off = 0;
    for (const auto& l : layers) {
        flat.segment(off, l.Wx.size()) = Eigen::Map<const Vector>(l.Wx.data(), l.Wx.size());
        off += l.Wx.size();
        flat.segment(off, l.Wz.size()) = Eigen::Map<const Vector>(l.Wz.data(), l.Wz.size());
        off += l.Wz.size();
        flat.segment(off, l.b.size()) = l.b;
        off += l.b.size();
    }
    return flat;
}

void IcnnParams::unpack(const Vector& flat) {
    require_dims(flat.size() == num_params(), "IcnnParams::unpack");
    Eigen::Index off = 0;
    for (auto& l : layers) {
        Eigen::Map<Vector>(l.Wx.data(), l.Wx.size()) = flat.segment(off, l.Wx.size());
        off += l.Wx.size();
        Eigen::Map<Vector>(l.Wz.data(), l.Wz.size()) = flat.segment(off, l.Wz.size());
        off += l.Wz.size();
        l.b = flat.segment(off, l.b.size());
        off += l.b.size();
    }
}

bool IcnnParams::all_finite() const {
    for (const auto& l : layers)
        if (!l.Wx.allFinite() || !l.Wz.allFinite() || !l.b.allFinite()) return false;
    return true;
}

bool IcnnParams::nonneg() const {
    for (const auto& l : layers)
        if (l.Wz.size() > 0 && l.Wz.minCoeff() < 0.0) return false;
    return true;
}

bool IcnnParams::operator==(const IcnnParams& o) const {
    if (layers.size() != o.layers.size()) return false;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& a = layers[i];
        const auto& b = o.layers[i];
        if (a.Wx.rows() != b.Wx.rows() || a.Wx.cols() != b.Wx.cols() || a.Wz.rows() != b.Wz.rows() ||
            a.Wz.cols() != b.Wz.cols() || a.b.size() != b.b.size())
            return false;
        if (a.Wx != b.Wx || a.Wz != b.Wz || a.b != b.b) return false;
    }
    return true;
}

void project_nonneg_inplace(IcnnParams& params) {
    for (auto& l : params.layers) l.Wz = l.Wz.cwiseMax(0.0);
}

IcnnParams project_nonneg(IcnnParams params) {
    project_nonneg_inplace(params);
    return params;
}

RowVector icnn_forward_batch(const IcnnParams& params, const IcnnConfig& cfg, const Matrix& X) {
    RowVector out = run_forward(params, cfg, X, nullptr);
    require_finite(out, "ICNN output");
    return out;
}

double icnn_forward(const IcnnParams& params, const IcnnConfig& cfg, const Vector& x) {
    return icnn_forward_batch(params, cfg, x)(0);
}

namespace {

IcnnGrads backward_impl(const IcnnParams& params, const IcnnConfig& cfg, const Matrix& X, const RowVector& upstream,
                        bool want_params) {
    require_dims(upstream.size() == X.cols(), "icnn_backward upstream vs batch");
    ForwardTape tape;
    IcnnGrads g;
    g.value = run_forward(params, cfg, X, &tape);
    const std::size_t hidden = cfg.widths.size();

    GradViews gv;
    if (want_params) {
        g.params = Vector::Zero(params.num_params());
        gv = views_into(g.params, params);
    }
    g.input = Matrix::Zero(X.rows(), X.cols());

    Matrix delta = upstream;  // adjoint of A_head
    for (std::size_t i = hidden + 1; i-- > 0;) {
        const IcnnLayer& l = params.layers[i];
        if (want_params) {
            gv.Wx[i].noalias() += delta * X.transpose();
            gv.b[i] += delta.rowwise().sum();
        }
        g.input.noalias() += l.Wx.transpose() * delta;
        if (i > 0) {
            if (want_params) gv.Wz[i].noalias() += delta * tape.post[i - 1].transpose();
            delta = (l.Wz.transpose() * delta).cwiseProduct(tape.deriv[i - 1]);
        }
    }
    if (cfg.quadratic != 0.0) g.input += cfg.quadratic * X * upstream.asDiagonal();
    require_finite(g.input, "ICNN input gradient");
    return g;
}

}  // namespace

IcnnGrads icnn_backward(const IcnnParams& params, const IcnnConfig& cfg, const Matrix& X,
                        const RowVector& upstream) {
    return backward_impl(params, cfg, X, upstream, true);
}

IcnnGrads icnn_backward(const IcnnParams& params, const IcnnConfig& cfg, const Vector& x,
                        double upstream) {
    RowVector u(1);
    u(0) = upstream;
    return icnn_backward(params, cfg, Matrix(x), u);
}

Matrix icnn_input_grad_batch(const IcnnParams& params, const IcnnConfig& cfg, const Matrix& X) {
    return backward_impl(params, cfg, X, RowVector::Ones(X.cols()), false).input;
}

Vector icnn_input_grad(const IcnnParams& params, const IcnnConfig& cfg, const Vector& x) {
    return icnn_input_grad_batch(params, cfg, x).col(0);
}

IcnnGrads icnn_input_grad_backward(const IcnnParams& params, const IcnnConfig& cfg, const Matrix& X,
                                   const Matrix& V) {
    require_dims(V.rows() == X.rows() && V.cols() == X.cols(), "directional input-grad backward: V vs X");
    ForwardTape tape;
    run_forward(params, cfg, X, &tape);
    const std::size_t hidden = cfg.widths.size();
    const Activation& act = cfg.activation;

    // Tangent pass: dA_i, dZ_i along direction V.
    std::vector<Matrix> dA(hidden), dZ(hidden), gp(hidden);
    for (std::size_t i = 0; i < hidden; ++i) {
        const IcnnLayer& l = params.layers[i];
        dA[i] = l.Wx * V;
        if (i > 0) dA[i].noalias() += l.Wz * dZ[i - 1];
        gp[i] = tape.deriv[i];
        dZ[i] = gp[i].cwiseProduct(dA[i]);
    }

    IcnnGrads g;
    g.params = Vector::Zero(params.num_params());
    GradViews gv = views_into(g.params, params);
    g.input = Matrix::Zero(X.rows(), X.cols());

    // Output F = dA_head + q <x, v>; head primal does not enter F.
    Matrix adj_tan = RowVector::Ones(X.cols());  // adjoint of dA_i
    Matrix adj_pri = RowVector::Zero(X.cols());  // adjoint of A_i
    for (std::size_t i = hidden + 1; i-- > 0;) {
        const IcnnLayer& l = params.layers[i];
        gv.Wx[i].noalias() += adj_tan * V.transpose();
        gv.Wx[i].noalias() += adj_pri * X.transpose();
        gv.b[i] += adj_pri.rowwise().sum();
        g.input.noalias() += l.Wx.transpose() * adj_pri;
        if (i > 0) {
            const std::size_t p = i - 1;
            gv.Wz[i].noalias() += adj_tan * dZ[p].transpose();
            gv.Wz[i].noalias() += adj_pri * tape.post[p].transpose();
            const Matrix adj_dz = l.Wz.transpose() * adj_tan;
            const Matrix adj_z = l.Wz.transpose() * adj_pri;
            adj_tan = gp[p].cwiseProduct(adj_dz);
            adj_pri = act.second_from_deriv(gp[p]).cwiseProduct(dA[p]).cwiseProduct(adj_dz) +
                      gp[p].cwiseProduct(adj_z);
        }
    }
    if (cfg.quadratic != 0.0) g.input += cfg.quadratic * V;
    require_finite(g.input, "ICNN Hessian-vector product");
    return g;
}

}  // namespace lotnet
