#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lotnet/data.hpp"
#include "lotnet/lot.hpp"
#include "lotnet/nncore.hpp"
#include "lotnet/otsolve.hpp"

namespace lotnet {

enum class OutputActivation { Sigmoid, Softmax };

/// Pooled inner-product classifier: rho(mean_k <W(x_k), T(x_k)>) over a
/// reference sample, W an MLP R^d -> R^d.
struct ClassifierModel {
    Mlp weightnet;
    OutputActivation rho = OutputActivation::Sigmoid;
    double threshold = 0.5;

    static ClassifierModel init(int dim, const std::vector<int>& hidden, Rng& rng);
    void validate() const;
};

struct ClassifierConfig {
    std::vector<int> hidden{64, 64};
    AdamConfig adam{1e-3, 0.9, 0.999, 1e-8};
    int steps_per_epoch = 1;
    int sample_size = 1000;  // reference sample size for training and validation scores
    double threshold = 0.5;

    void validate() const;
};

struct TrainSchedule {
    int ot_epochs_per_phase = 10;
    int clf_epochs_per_phase = 10;
    int total_epochs = 1000;
    int ot_iters_per_epoch = 20;  // solver steps per map in one OT epoch
    int patience = 10;            // phases without validation improvement before stopping

    void validate() const;
    int phases() const;
    /// Solver steps each map receives over a full schedule.
    std::int64_t total_ot_iterations() const;
};

/// rho of the mean inner product over `sample`; the sample is put in
/// canonical order first, so the result is invariant to point order.
double score(const ClassifierModel& model, const DualPair& pair, const PointCloud& sample);

/// Score from precomputed W(X) and T(X) on the same sample (columns aligned).
double pooled_probability(const ClassifierModel& model, const Matrix& weights, const Matrix& image);

struct BceResult {
    double loss = 0.0;
    Vector grad;  // flat weightnet gradient
    std::vector<double> probabilities;
};

/// Binary cross-entropy of the classifier over maps evaluated on a shared
/// sample X, with its gradient in the weight-network parameters.
BceResult classifier_bce(const ClassifierModel& model, const Matrix& X, const std::vector<Matrix>& images,
                         const std::vector<int>& labels, bool want_grad = true);

struct PhaseRecord {
    int phase = 0;
    int epoch = 0;  // cumulative epochs (OT + classifier) at the end of the phase
    double ot_loss = 0.0;
    double clf_loss = 0.0;
    double train_accuracy = 0.0;
    double val_accuracy = 0.0;
    double val_loss = 0.0;
};

struct AlternatingResult {
    EmbeddingSet embedding;  // training clouds first, then validation clouds
    std::size_t train_count = 0;
    ClassifierModel model;
    std::vector<PhaseRecord> history;
    int best_phase = 0;
    std::int64_t ot_iterations = 0;  // solver steps per map at the selected snapshot
};

/// Alternates solver phases (all maps advanced on shared reference batches)
/// with classifier phases (weight network trained by BCE, maps frozen), and
/// returns the snapshot with the best validation accuracy (ties: lower
/// validation loss). Validation clouds get maps too; their labels only enter
/// model selection. Without validation clouds, training metrics select.
/// `threads` > 1 trains maps in parallel.
/// Snapshot handed to an observer after each half of a phase.
struct PhaseEvent {
    enum class Stage { AfterMaps, AfterClassifier };
    int phase = 0;
    Stage stage = Stage::AfterMaps;
    const std::vector<MapTrainer>* trainers = nullptr;
    const ClassifierModel* model = nullptr;
};
using PhaseObserver = std::function<void(const PhaseEvent&)>;

AlternatingResult train_alternating(const LabeledDataset& train, const LabeledDataset& val,
                                    const ReferenceMeasure& reference, const TrainSchedule& sched,
                                    const SolverConfig& solver_cfg, const ClassifierConfig& clf_cfg,
                                    std::uint64_t seed, int threads = 1, const PhaseObserver& observer = {});

/// Transport map for a held-out cloud; labels are never consulted.
DualPair embed_test_cloud(const ReferenceMeasure& reference, const PointCloud& cloud, const SolverConfig& solver_cfg);

/// Mean of `k` scores on independent reference samples of size n.
double predict_resampled(const ClassifierModel& model, const DualPair& pair, const ReferenceMeasure& reference, int n,
                         int k, std::uint64_t seed);

struct Metrics {
    long tp = 0, fp = 0, fn = 0, tn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double accuracy = 0.0;
    bool precision_defined = true;  // false when TP + FP = 0; precision then reported as 0
    bool recall_defined = true;     // false when TP + FN = 0; recall then reported as 0

    long total() const { return tp + fp + fn + tn; }
};

/// Counts predictions p >= threshold as positive.
Metrics evaluate(const std::vector<double>& probabilities, const std::vector<int>& labels, double threshold = 0.5);

/// Runs `fn(i)` for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace lotnet
