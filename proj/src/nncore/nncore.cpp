#include "lotnet/nncore.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace lotnet {

bool all_finite(const Eigen::Ref<const Matrix>& m) { return m.allFinite(); }

void require_finite(const Eigen::Ref<const Matrix>& m, const std::string& what) {
    if (!m.allFinite()) throw NumericError("non-finite values in " + what);
}

Vector linear_forward(const Matrix& W, const Vector& b, const Vector& x) {
    require_dims(W.cols() == x.size(), "linear_forward: W has " + std::to_string(W.cols()) +
                                           " columns, x has " + std::to_string(x.size()) + " entries");
    require_dims(W.rows() == b.size(), "linear_forward: W rows vs bias length");
    Vector out = W * x + b;
    require_finite(out, "linear_forward output");
    return out;
}

// ---------------------------------------------------------------------------

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // Box-Muller; u1 in (0, 1] keeps the log finite.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
}

std::size_t Rng::index(std::size_t n) {
    if (n == 0) throw ConfigError("Rng::index: empty range");
    // Rejection sampling for an unbiased draw.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t r;
    do {
        r = engine_();
    } while (r >= limit);
    return static_cast<std::size_t>(r % n);
}

Matrix Rng::normal_matrix(Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal();
    return m;
}

std::uint64_t Rng::derive_seed(std::uint64_t stream) { return mix_seed(seed_, stream); }

// ---------------------------------------------------------------------------

void adam_step(Vector& params, const Vector& grads, OptimState& state) {
    require_dims(params.size() == grads.size(), "adam_step: params vs grads");
    require_dims(state.m.size() == params.size() && state.v.size() == params.size(),
                 "adam_step: optimizer state vs params");
    if (!(state.cfg.step_size > 0.0)) throw ConfigError("adam_step: step size must be > 0");
    require_finite(grads, "adam_step gradient");

    const AdamConfig& c = state.cfg;
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double corr1 = 1.0 - std::pow(c.beta1, t);
    const double corr2 = 1.0 - std::pow(c.beta2, t);

    state.m = c.beta1 * state.m + (1.0 - c.beta1) * grads;
    state.v = c.beta2 * state.v + (1.0 - c.beta2) * grads.cwiseAbs2();
    params.array() -= c.step_size * (state.m.array() / corr1) /
                      ((state.v.array() / corr2).sqrt() + c.eps);
}

// ---------------------------------------------------------------------------

Vector finite_diff_grad(const ScalarFn& f, const Vector& x, double h) {
    if (!(h > 0.0)) throw ConfigError("finite_diff_grad: h must be > 0");
    Vector g(x.size());
    Vector probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + h;
        const double fp = f(probe);
        probe[i] = x[i] - h;
        const double fm = f(probe);
        probe[i] = x[i];
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NumericError("finite_diff_grad: non-finite function value at coordinate " +
                               std::to_string(i));
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

double relative_error(const Vector& a, const Vector& b, double floor) {
    require_dims(a.size() == b.size(), "relative_error");
    if (a.size() == 0) return 0.0;
    const double scale = std::max({a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff(), floor});
    return (a - b).cwiseAbs().maxCoeff() / scale;
}

// ---------------------------------------------------------------------------

double sigmoid(double s) {
    if (s >= 0) return 1.0 / (1.0 + std::exp(-s));
    const double e = std::exp(s);
    return e / (1.0 + e);
}

Matrix Activation::value(const Matrix& a) const {
    if (kind == ActivationKind::Relu) return a.cwiseMax(0.0);
    const double s = sharpness;
    const Eigen::ArrayXXd sa = s * a.array();
    return ((sa.max(0.0) + (-sa.abs()).exp().log1p()) / s).matrix();
}

Matrix Activation::deriv(const Matrix& a) const {
    if (kind == ActivationKind::Relu) return (a.array() > 0.0).cast<double>().matrix();
    const double s = sharpness;
    return a.unaryExpr([s](double v) { return sigmoid(s * v); });
}

Matrix Activation::second_deriv(const Matrix& a) const {
    if (kind == ActivationKind::Relu) return Matrix::Zero(a.rows(), a.cols());
    const double s = sharpness;
    return a.unaryExpr([s](double v) {
        const double p = sigmoid(s * v);
        return s * p * (1.0 - p);
    });
}

void Activation::eval(const Matrix& a, Matrix& value, Matrix& deriv) const {
    value.resize(a.rows(), a.cols());
    deriv.resize(a.rows(), a.cols());
    if (kind == ActivationKind::Relu) {
        value = a.cwiseMax(0.0);
        deriv = (a.array() > 0.0).cast<double>().matrix();
        return;
    }
    const double s = sharpness;
    const Eigen::ArrayXXd sa = s * a.array();
    const Eigen::ArrayXXd e = (-sa.abs()).exp();
    value = ((sa.max(0.0) + e.log1p()) / s).matrix();
    deriv = (sa >= 0.0).select(1.0 / (1.0 + e), e / (1.0 + e)).matrix();
}

Matrix Activation::second_from_deriv(const Matrix& deriv) const {
    if (kind == ActivationKind::Relu) return Matrix::Zero(deriv.rows(), deriv.cols());
    return (sharpness * deriv.array() * (1.0 - deriv.array())).matrix();
}

std::string to_string(ActivationKind k) { return k == ActivationKind::Relu ? "relu" : "smooth_relu"; }

ActivationKind activation_from_string(const std::string& s) {
    if (s == "relu") return ActivationKind::Relu;
    if (s == "smooth_relu" || s == "softplus") return ActivationKind::SmoothRelu;
    throw ConfigError("unknown activation '" + s + "'");
}

// ---------------------------------------------------------------------------

Mlp::Mlp(const std::vector<int>& sizes, Activation act, Rng& rng) : act_(act) {
    if (sizes.size() < 2) throw ConfigError("Mlp needs at least input and output sizes");
    for (int s : sizes)
        if (s < 1) throw ConfigError("Mlp layer widths must be >= 1");
    for (std::size_t i = 1; i < sizes.size(); ++i) {
        Layer l;
        l.W = rng.normal_matrix(sizes[i], sizes[i - 1]) / std::sqrt(static_cast<double>(sizes[i - 1]));
        l.b = Vector::Zero(sizes[i]);
        layers_.push_back(std::move(l));
    }
}

int Mlp::in_dim() const { return layers_.empty() ? 0 : static_cast<int>(layers_.front().W.cols()); }
int Mlp::out_dim() const { return layers_.empty() ? 0 : static_cast<int>(layers_.back().W.rows()); }

std::vector<int> Mlp::sizes() const {
    std::vector<int> s;
    if (layers_.empty()) return s;
    s.push_back(in_dim());
    for (const auto& l : layers_) s.push_back(static_cast<int>(l.W.rows()));
    return s;
}

Matrix Mlp::forward(const Matrix& X) const {
    Tape tape;
    return forward(X, tape);
}

Matrix Mlp::forward(const Matrix& X, Tape& tape) const {
    require_dims(X.rows() == in_dim(), "Mlp::forward input rows");
    tape.pre.clear();
    tape.post.clear();
    Matrix h = X;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        tape.post.push_back(h);
        Matrix a = layers_[i].W * h;
        a.colwise() += layers_[i].b;
        tape.pre.push_back(a);
        h = (i + 1 < layers_.size()) ? act_.value(a) : a;
    }
    return h;
}

Matrix Mlp::backward(const Tape& tape, const Matrix& upstream, Vector& grad) const {
    if (grad.size() != num_params()) grad = Vector::Zero(num_params());
    std::vector<Eigen::Index> offsets;
    Eigen::Index off = 0;
    for (const auto& l : layers_) {
        offsets.push_back(off);
        off += l.W.size() + l.b.size();
    }
    Matrix delta = upstream;
    for (std::size_t k = layers_.size(); k-- > 0;) {
        const Layer& l = layers_[k];
        if (k + 1 < layers_.size()) delta = delta.cwiseProduct(act_.deriv(tape.pre[k]));
        Eigen::Map<Matrix> gW(grad.data() + offsets[k], l.W.rows(), l.W.cols());
        Eigen::Map<Vector> gb(grad.data() + offsets[k] + l.W.size(), l.b.size());
        gW.noalias() += delta * tape.post[k].transpose();
        gb += delta.rowwise().sum();
        delta = l.W.transpose() * delta;
    }
    return delta;
}

Eigen::Index Mlp::num_params() const {
    Eigen::Index n = 0;
    for (const auto& l : layers_) n += l.W.size() + l.b.size();
    return n;
}

Vector Mlp::pack() const {
    Vector flat(num_params());
    Eigen::Index off = 0;
    for (const auto& l : layers_) {
        flat.segment(off, l.W.size()) = Eigen::Map<const Vector>(l.W.data(), l.W.size());
        off += l.W.size();
        flat.segment(off, l.b.size()) = l.b;
        off += l.b.size();
    }
    return flat;
}

void Mlp::unpack(const Vector& flat) {
    require_dims(flat.size() == num_params(), "Mlp::unpack");
    Eigen::Index off = 0;
    for (auto& l : layers_) {
        Eigen::Map<Vector>(l.W.data(), l.W.size()) = flat.segment(off, l.W.size());
        off += l.W.size();
        l.b = flat.segment(off, l.b.size());
        off += l.b.size();
    }
}

}  // namespace lotnet
