#pragma once

#include <cstdint>
#include <vector>

#include "lotnet/data.hpp"
#include "lotnet/icnn.hpp"
#include "lotnet/reference.hpp"

namespace lotnet {

struct SolverConfig {
    int batch_size = 256;
    std::int64_t iterations = 10000;
    AdamConfig adam{};
    double cycle_weight = 1.0;
    std::uint64_t seed = 0;
    IcnnConfig net{};  // architecture for both potentials; net.dim is overwritten with the data dim
    /// Assumed Lipschitz bound of the transport map; phi carries the quadratic
    /// term 1/(2 beta_hat) |y|^2 / 2 of a (1/beta_hat)-strongly convex conjugate.
    double beta_hat = 1.0;
    double psi_quadratic = 0.0;

    IcnnConfig psi_config(int dim) const;
    IcnnConfig phi_config(int dim) const;

    void validate() const;
};

struct TrainingMeta {
    std::int64_t iterations = 0;
    double final_loss = 0.0;
    std::uint64_t seed = 0;
};

/// Potentials for one target measure: grad psi transports the reference onto
/// the target, grad phi maps back.
struct DualPair {
    Icnn psi;
    Icnn phi;
    TrainingMeta meta;

    static DualPair init(const IcnnConfig& psi_cfg, const IcnnConfig& phi_cfg, Rng& rng);
    int dim() const { return psi.cfg.dim; }
    void validate() const;
    /// grad psi at each column of X.
    Matrix transport(const Matrix& X) const { return psi.grad(X); }
    bool same_parameters(const DualPair& o) const { return psi.params == o.psi.params && phi.params == o.phi.params; }
};

/// -mean_mu phi(y) - mean_sigma [<x, grad psi(x)> - phi(grad psi(x))].
double dual_objective_V(const DualPair& pair, const PointCloud& sigma_batch, const PointCloud& mu_batch);

struct W2Estimate {
    double distance = 0.0;  // sqrt(max(0, squared))
    double squared = 0.0;   // 2 (V + C) before clamping
    bool clamped = false;
};

/// Dual-based W2 estimate; C = (mean |x|^2 + mean |y|^2) / 2.
W2Estimate estimate_w2_dual_detailed(const DualPair& pair, const PointCloud& sigma_batch, const PointCloud& mu_batch);
double estimate_w2_dual(const DualPair& pair, const PointCloud& sigma_batch, const PointCloud& mu_batch);

struct SolverLoss {
    double total = 0.0;
    double dual = 0.0;   // mean phi(y) + mean [<x,T> - phi(T)] = -V
    double cycle = 0.0;  // mean |grad phi(T(x)) - x|^2, unweighted
};

/// Non-minimax solver objective
///   mean phi(Y) + mean [<x, T(x)> - phi(T(x))] + cycle_weight * mean |grad phi(T(x)) - x|^2
/// with T = grad psi, and its exact gradients (flat layouts) when requested.
SolverLoss solver_loss(const DualPair& pair, const Matrix& sigma_batch, const Matrix& mu_batch, double cycle_weight,
                       Vector* grad_psi = nullptr, Vector* grad_phi = nullptr);

/// Owns one DualPair and its optimizer state; advanced one batch at a time so
/// several trainers can share reference batches.
class MapTrainer {
public:
    MapTrainer(DualPair init, PointCloud target, const SolverConfig& cfg, std::uint64_t batch_seed);

    /// One Adam step on both potentials followed by nonnegativity projection.
    /// Throws NumericError if the loss is not finite.
    double step(const Matrix& sigma_batch);
    void run(const ReferenceMeasure& reference, std::int64_t iterations, Rng& sigma_rng);

    const DualPair& pair() const { return pair_; }
    DualPair& pair() { return pair_; }
    const PointCloud& target() const { return target_; }
    const std::vector<double>& loss_history() const { return losses_; }

private:
    DualPair pair_;
    PointCloud target_;
    SolverConfig cfg_;
    OptimState psi_state_, phi_state_;
    Rng mu_rng_;
    std::vector<double> losses_;
};

/// Trains a DualPair from `reference` to `mu` with its own reference batches.
/// Deterministic given cfg.seed. A zero budget returns the initialized pair.
DualPair train_map(const ReferenceMeasure& reference, const PointCloud& mu, const SolverConfig& cfg,
                   std::vector<double>* loss_history = nullptr);

/// Builds the pair and trainer exactly as train_map does, without running it.
MapTrainer make_trainer(const PointCloud& mu, const SolverConfig& cfg);

// ---------------------------------------------------------------------------
// Exact oracles

struct DiscreteOt {
    std::vector<int> matching;  // matching[k] = index in Y assigned to X_k
    double cost = 0.0;          // mean squared distance under the matching
    double distance = 0.0;      // sqrt(cost)
};

/// Minimum-cost perfect matching between equal-size uniform clouds under
/// squared Euclidean cost (Hungarian algorithm, O(n^3)).
DiscreteOt exact_ot_discrete(const PointCloud& X, const PointCloud& Y);

struct GaussianSpec {
    Vector mean;
    Vector variance;  // diagonal covariance
};

/// Closed-form W2 between diagonal Gaussians.
double gaussian_w2(const GaussianSpec& a, const GaussianSpec& b);

/// Monge map between diagonal Gaussians: x -> m_b + sqrt(v_b / v_a) (x - m_a).
Matrix gaussian_monge_map(const GaussianSpec& a, const GaussianSpec& b, const Matrix& X);

}  // namespace lotnet
