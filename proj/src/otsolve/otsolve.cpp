#include "lotnet/otsolve.hpp"

#include <cmath>
#include <limits>

namespace lotnet {

void SolverConfig::validate() const {
    if (batch_size < 2) throw ConfigError("solver batch size must be >= 2");
    if (iterations < 0) throw ConfigError("solver iteration budget must be >= 0");
    if (!(adam.step_size > 0.0)) throw ConfigError("solver step size must be > 0");
    if (!(cycle_weight >= 0.0)) throw ConfigError("cycle weight must be >= 0");
    if (!(beta_hat > 0.0)) throw ConfigError("beta_hat must be > 0");
    if (!(psi_quadratic >= 0.0)) throw ConfigError("psi quadratic coefficient must be >= 0");
    psi_config(net.dim).validate();
}

IcnnConfig SolverConfig::psi_config(int dim) const {
    IcnnConfig c = net;
    c.dim = dim;
    c.quadratic = psi_quadratic;
    return c;
}

IcnnConfig SolverConfig::phi_config(int dim) const {
    IcnnConfig c = net;
    c.dim = dim;
    c.quadratic = IcnnConfig::quadratic_for_beta(beta_hat);
    return c;
}

DualPair DualPair::init(const IcnnConfig& psi_cfg, const IcnnConfig& phi_cfg, Rng& rng) {
    require_dims(psi_cfg.dim == phi_cfg.dim, "DualPair::init: psi and phi dims");
    DualPair p;
    p.psi = Icnn::make(psi_cfg, rng);
    p.phi = Icnn::make(phi_cfg, rng);
    return p;
}

void DualPair::validate() const {
    require_dims(psi.cfg.dim == phi.cfg.dim, "DualPair: psi and phi input dims differ");
    if (!psi.params.nonneg() || !phi.params.nonneg()) throw DataError("DualPair: negative pass-through weights");
    if (!psi.params.all_finite() || !phi.params.all_finite()) throw NumericError("DualPair: non-finite parameters");
}

namespace {

void check_batches(const DualPair& pair, const Matrix& X, const Matrix& Y) {
    if (X.cols() == 0 || Y.cols() == 0) throw DataError("dual objective: empty batch");
    require_dims(X.rows() == pair.dim() && Y.rows() == pair.dim(),
                 "dual objective: batch dims vs potential dim " + std::to_string(pair.dim()));
}

}  // namespace

double dual_objective_V(const DualPair& pair, const PointCloud& sigma_batch, const PointCloud& mu_batch) {
    const Matrix& X = sigma_batch.points;
    const Matrix& Y = mu_batch.points;
    check_batches(pair, X, Y);
    const Matrix T = pair.psi.grad(X);
    const double phi_y = pair.phi.values(Y).mean();
    const double inner = (X.cwiseProduct(T).colwise().sum() - pair.phi.values(T)).mean();
    const double v = -phi_y - inner;
    if (!std::isfinite(v)) throw NumericError("dual objective is not finite");
    return v;
}

W2Estimate estimate_w2_dual_detailed(const DualPair& pair, const PointCloud& sigma_batch, const PointCloud& mu_batch) {
    const double v = dual_objective_V(pair, sigma_batch, mu_batch);
    const double c = 0.5 * sigma_batch.points.colwise().squaredNorm().mean() +
                     0.5 * mu_batch.points.colwise().squaredNorm().mean();
    W2Estimate e;
    e.squared = 2.0 * (v + c);
    e.clamped = e.squared < 0.0;
    e.distance = std::sqrt(std::max(0.0, e.squared));
    return e;
}

double estimate_w2_dual(const DualPair& pair, const PointCloud& sigma_batch, const PointCloud& mu_batch) {
    return estimate_w2_dual_detailed(pair, sigma_batch, mu_batch).distance;
}

SolverLoss solver_loss(const DualPair& pair, const Matrix& X, const Matrix& Y, double cycle_weight, Vector* grad_psi,
                       Vector* grad_phi) {
    check_batches(pair, X, Y);
    const double n = static_cast<double>(X.cols());
    const double m = static_cast<double>(Y.cols());
    const Icnn& psi = pair.psi;
    const Icnn& phi = pair.phi;

    const Matrix T = psi.grad(X);
    const IcnnGrads on_y = icnn_backward(phi.params, phi.cfg, Y, RowVector::Constant(Y.cols(), 1.0 / m));
    const IcnnGrads on_t = icnn_backward(phi.params, phi.cfg, T, RowVector::Constant(X.cols(), -1.0 / n));
    const Matrix back = -n * on_t.input;  // grad phi(T)
    const Matrix resid = back - X;

    SolverLoss loss;
    loss.dual = on_y.value.mean() + (X.cwiseProduct(T).colwise().sum() - on_t.value).mean();
    loss.cycle = resid.colwise().squaredNorm().mean();
    loss.total = loss.dual + cycle_weight * loss.cycle;

    if (grad_psi || grad_phi) {
        const Matrix V = (2.0 * cycle_weight / n) * resid;
        const IcnnGrads cyc = icnn_input_grad_backward(phi.params, phi.cfg, T, V);
        if (grad_phi) *grad_phi = on_y.params + on_t.params + cyc.params;
        if (grad_psi) {
            const Matrix dT = X / n + on_t.input + cyc.input;
            *grad_psi = icnn_input_grad_backward(psi.params, psi.cfg, X, dT).params;
        }
    }
    return loss;
}

// ---------------------------------------------------------------------------

MapTrainer::MapTrainer(DualPair init, PointCloud target, const SolverConfig& cfg, std::uint64_t batch_seed)
    : pair_(std::move(init)),
      target_(std::move(target)),
      cfg_(cfg),
      psi_state_(cfg.adam, pair_.psi.params.num_params()),
      phi_state_(cfg.adam, pair_.phi.params.num_params()),
      mu_rng_(batch_seed) {
    cfg_.validate();
    require_nonempty(target_, "train_map");
    require_dims(target_.dim() == pair_.dim(), "train_map: target cloud dim vs potential dim");
    pair_.meta.seed = cfg.seed;
}

double MapTrainer::step(const Matrix& sigma_batch) {
    const int b = cfg_.batch_size;
    Matrix Y(target_.dim(), b);
    for (int k = 0; k < b; ++k) Y.col(k) = target_.points.col(static_cast<Eigen::Index>(mu_rng_.index(target_.size())));

    Vector g_psi, g_phi;
    const SolverLoss loss = solver_loss(pair_, sigma_batch, Y, cfg_.cycle_weight, &g_psi, &g_phi);
    const std::int64_t iter = pair_.meta.iterations;
    if (!std::isfinite(loss.total) || !g_psi.allFinite() || !g_phi.allFinite())
        throw NumericError("solver loss became non-finite at iteration " + std::to_string(iter) + " for cloud '" +
                           target_.id + "'");

    Vector p = pair_.psi.params.pack();
    adam_step(p, g_psi, psi_state_);
    pair_.psi.params.unpack(p);
    project_nonneg_inplace(pair_.psi.params);

    Vector q = pair_.phi.params.pack();
    adam_step(q, g_phi, phi_state_);
    pair_.phi.params.unpack(q);
    project_nonneg_inplace(pair_.phi.params);

    pair_.meta.iterations = iter + 1;
    pair_.meta.final_loss = loss.total;
    losses_.push_back(loss.total);
    return loss.total;
}

void MapTrainer::run(const ReferenceMeasure& reference, std::int64_t iterations, Rng& sigma_rng) {
    for (std::int64_t it = 0; it < iterations; ++it) step(reference.sample(cfg_.batch_size, sigma_rng));
}

MapTrainer make_trainer(const PointCloud& mu, const SolverConfig& cfg) {
    cfg.validate();
    Rng init_rng(mix_seed(cfg.seed, 0));
    return MapTrainer(DualPair::init(cfg.psi_config(mu.dim()), cfg.phi_config(mu.dim()), init_rng), mu, cfg,
                      mix_seed(cfg.seed, 2));
}

DualPair train_map(const ReferenceMeasure& reference, const PointCloud& mu, const SolverConfig& cfg,
                   std::vector<double>* loss_history) {
    reference.validate();
    require_dims(reference.dim == mu.dim(), "train_map: reference dim vs cloud dim");
    MapTrainer trainer = make_trainer(mu, cfg);
    Rng sigma_rng(mix_seed(cfg.seed, 1));
    trainer.run(reference, cfg.iterations, sigma_rng);
    if (loss_history) *loss_history = trainer.loss_history();
    return trainer.pair();
}

// ---------------------------------------------------------------------------

DiscreteOt exact_ot_discrete(const PointCloud& X, const PointCloud& Y) {
    if (X.empty() || Y.empty()) throw DataError("exact_ot_discrete: empty cloud");
    if (X.size() != Y.size())
        throw DataError("exact_ot_discrete: clouds must have equal size (" + std::to_string(X.size()) + " vs " +
                        std::to_string(Y.size()) + ")");
    require_dims(X.dim() == Y.dim(), "exact_ot_discrete: point dims");
    const int n = X.size();

    Matrix cost(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) cost(i, j) = (X.points.col(i) - Y.points.col(j)).squaredNorm();

    // Shortest augmenting path with row/column potentials; 1-based, column 0 is virtual.
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> row_of(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        row_of[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = row_of[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (row_of[j0] != 0);
        do {
            const int j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    DiscreteOt out;
    out.matching.assign(n, -1);
    for (int j = 1; j <= n; ++j) out.matching[row_of[j] - 1] = j - 1;
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += cost(i, out.matching[i]);
    out.cost = total / n;
    out.distance = std::sqrt(out.cost);
    return out;
}

namespace {

void check_gaussian(const GaussianSpec& g) {
    require_dims(g.mean.size() == g.variance.size(), "GaussianSpec mean vs variance");
    if (!(g.variance.size() == 0 || g.variance.minCoeff() > 0.0)) throw ConfigError("GaussianSpec variances must be > 0");
}

}  // namespace

double gaussian_w2(const GaussianSpec& a, const GaussianSpec& b) {
    check_gaussian(a);
    check_gaussian(b);
    require_dims(a.mean.size() == b.mean.size(), "gaussian_w2: dims");
    const double shift = (a.mean - b.mean).squaredNorm();
    const double spread = (a.variance.cwiseSqrt() - b.variance.cwiseSqrt()).squaredNorm();
    return std::sqrt(shift + spread);
}

Matrix gaussian_monge_map(const GaussianSpec& a, const GaussianSpec& b, const Matrix& X) {
    check_gaussian(a);
    check_gaussian(b);
    require_dims(a.mean.size() == b.mean.size() && X.rows() == a.mean.size(), "gaussian_monge_map: dims");
    const Vector ratio = (b.variance.array() / a.variance.array()).sqrt().matrix();
    Matrix out = ratio.asDiagonal() * (X.colwise() - a.mean);
    out.colwise() += b.mean;
    return out;
}

}  // namespace lotnet
