#include "lotnet/classify.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace lotnet {

namespace {

double softplus(double s) { return std::max(s, 0.0) + std::log1p(std::exp(-std::abs(s))); }

// -log p(y | s) for p = sigmoid(s).
double bce_term(double s, int y) { return y == 1 ? softplus(-s) : softplus(s); }

double pooled_logit(const Matrix& weights, const Matrix& image) {
    require_dims(weights.rows() == image.rows() && weights.cols() == image.cols(), "pooled score: W(X) vs T(X)");
    if (image.cols() == 0) throw DataError("pooled score: empty sample");
    return weights.cwiseProduct(image).colwise().sum().sum() / static_cast<double>(image.cols());
}

double accuracy_of(const std::vector<double>& probs, const std::vector<int>& labels, double threshold) {
    if (probs.empty()) return 0.0;
    std::size_t ok = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) ok += ((probs[i] >= threshold) == (labels[i] == 1));
    return static_cast<double>(ok) / static_cast<double>(probs.size());
}

}  // namespace

ClassifierModel ClassifierModel::init(int dim, const std::vector<int>& hidden, Rng& rng) {
    std::vector<int> sizes{dim};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(dim);
    ClassifierModel m;
    m.weightnet = Mlp(sizes, Activation{}, rng);
    return m;
}

void ClassifierModel::validate() const {
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("classifier threshold must lie in (0, 1)");
    if (weightnet.in_dim() != weightnet.out_dim()) throw DimensionError("weight network must map R^d to R^d");
    if (rho != OutputActivation::Sigmoid) throw ConfigError("only the binary sigmoid output is supported");
}

void ClassifierConfig::validate() const {
    for (int h : hidden)
        if (h < 1) throw ConfigError("classifier hidden widths must be >= 1");
    if (steps_per_epoch < 1) throw ConfigError("classifier steps per epoch must be >= 1");
    if (sample_size < 1) throw ConfigError("classifier sample size must be >= 1");
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("classifier threshold must lie in (0, 1)");
    if (!(adam.step_size > 0.0)) throw ConfigError("classifier step size must be > 0");
}

void TrainSchedule::validate() const {
    if (ot_epochs_per_phase < 1 || clf_epochs_per_phase < 1 || total_epochs < 1 || ot_iters_per_epoch < 1 || patience < 1)
        throw ConfigError("schedule values must all be >= 1");
    if (total_epochs < ot_epochs_per_phase + clf_epochs_per_phase)
        throw ConfigError("total epochs must cover at least one OT phase and one classifier phase");
}

int TrainSchedule::phases() const { return total_epochs / (ot_epochs_per_phase + clf_epochs_per_phase); }

std::int64_t TrainSchedule::total_ot_iterations() const {
    return static_cast<std::int64_t>(phases()) * ot_epochs_per_phase * ot_iters_per_epoch;
}

double pooled_probability(const ClassifierModel& model, const Matrix& weights, const Matrix& image) {
    if (model.rho != OutputActivation::Sigmoid) throw ConfigError("only the binary sigmoid output is supported");
    return sigmoid(pooled_logit(weights, image));
}

double score(const ClassifierModel& model, const DualPair& pair, const PointCloud& sample) {
    require_nonempty(sample, "score");
    require_dims(sample.dim() == pair.dim(), "score: sample dim vs map dim");
    const Matrix X = canonical_order(sample.points);
    return pooled_probability(model, model.weightnet.forward(X), pair.transport(X));
}

BceResult classifier_bce(const ClassifierModel& model, const Matrix& X, const std::vector<Matrix>& images,
                         const std::vector<int>& labels, bool want_grad) {
    if (images.empty() || images.size() != labels.size()) throw DataError("classifier_bce: need one label per map");
    Mlp::Tape tape;
    const Matrix W = model.weightnet.forward(X, tape);
    const double N = static_cast<double>(images.size());
    const double n = static_cast<double>(X.cols());

    BceResult r;
    Matrix upstream = Matrix::Zero(X.rows(), X.cols());
    for (std::size_t i = 0; i < images.size(); ++i) {
        const double s = pooled_logit(W, images[i]);
        const double p = sigmoid(s);
        r.probabilities.push_back(p);
        r.loss += bce_term(s, labels[i]) / N;
        if (want_grad) upstream += ((p - labels[i]) / (N * n)) * images[i];
    }
    if (!std::isfinite(r.loss)) throw NumericError("classifier loss is not finite");
    if (want_grad) {
        r.grad = Vector::Zero(model.weightnet.num_params());
        model.weightnet.backward(tape, upstream, r.grad);
    }
    return r;
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

AlternatingResult train_alternating(const LabeledDataset& train, const LabeledDataset& val,
                                    const ReferenceMeasure& reference, const TrainSchedule& sched,
                                    const SolverConfig& solver_cfg, const ClassifierConfig& clf_cfg,
                                    std::uint64_t seed, int threads, const PhaseObserver& observer) {
    train.validate();
    sched.validate();
    solver_cfg.validate();
    clf_cfg.validate();
    reference.validate();
    if (train.count(0) == 0 || train.count(1) == 0)
        throw DataError("training set must contain both classes");
    require_dims(reference.dim == train.dim, "reference dim vs training data dim");
    if (val.size() > 0) {
        val.validate();
        require_dims(val.dim == train.dim, "validation dim vs training dim");
    }

    // Maps for training clouds first, then validation clouds.
    std::vector<const PointCloud*> clouds;
    for (const auto& c : train.clouds) clouds.push_back(&c);
    for (const auto& c : val.clouds) clouds.push_back(&c);
    std::vector<MapTrainer> trainers;
    trainers.reserve(clouds.size());
    for (const PointCloud* c : clouds) {
        SolverConfig cfg = solver_cfg;
        cfg.seed = mix_seed(seed, fnv1a64(c->id));
        trainers.push_back(make_trainer(*c, cfg));
    }
    const std::size_t n_train = train.size();

    Rng sigma_rng(mix_seed(seed, 101));
    Rng init_rng(mix_seed(seed, 202));
    Rng sample_rng(mix_seed(seed, 404));
    const std::uint64_t val_sample_seed = mix_seed(seed, 303);
    const Matrix X_val = canonical_order(reference.sample(clf_cfg.sample_size, val_sample_seed).points);

    ClassifierModel model = ClassifierModel::init(train.dim, clf_cfg.hidden, init_rng);
    model.threshold = clf_cfg.threshold;
    OptimState clf_state(clf_cfg.adam, model.weightnet.num_params());

    AlternatingResult result;
    std::vector<DualPair> best_pairs;
    ClassifierModel best_model = model;
    double best_acc = -1.0, best_loss = std::numeric_limits<double>::infinity();
    int since_best = 0;

    const int phases = sched.phases();
    const int batch = solver_cfg.batch_size;
    for (int phase = 0; phase < phases; ++phase) {
        for (int e = 0; e < sched.ot_epochs_per_phase; ++e) {
            for (int it = 0; it < sched.ot_iters_per_epoch; ++it) {
                const Matrix sigma_batch = reference.sample(batch, sigma_rng);
                parallel_for(trainers.size(), threads, [&](std::size_t i) { trainers[i].step(sigma_batch); });
            }
        }
        if (observer) observer({phase, PhaseEvent::Stage::AfterMaps, &trainers, &model});
        double ot_loss = 0.0;
        for (const auto& t : trainers) ot_loss += t.loss_history().back() / static_cast<double>(trainers.size());

        // Classifier phase on a fresh reference sample; maps are frozen.
        const Matrix X = canonical_order(reference.sample(clf_cfg.sample_size, sample_rng));
        std::vector<Matrix> images(n_train);
        parallel_for(n_train, threads, [&](std::size_t i) { images[i] = trainers[i].pair().transport(X); });
        for (int e = 0; e < sched.clf_epochs_per_phase; ++e) {
            for (int s = 0; s < clf_cfg.steps_per_epoch; ++s) {
                const BceResult r = classifier_bce(model, X, images, train.labels);
                Vector w = model.weightnet.pack();
                adam_step(w, r.grad, clf_state);
                model.weightnet.unpack(w);
            }
        }
        if (observer) observer({phase, PhaseEvent::Stage::AfterClassifier, &trainers, &model});
        const BceResult fit = classifier_bce(model, X, images, train.labels, false);

        PhaseRecord rec;
        rec.phase = phase;
        rec.epoch = (phase + 1) * (sched.ot_epochs_per_phase + sched.clf_epochs_per_phase);
        rec.ot_loss = ot_loss;
        rec.clf_loss = fit.loss;
        rec.train_accuracy = accuracy_of(fit.probabilities, train.labels, model.threshold);
        if (val.size() > 0) {
            std::vector<Matrix> val_images(val.size());
            parallel_for(val.size(), threads,
                         [&](std::size_t i) { val_images[i] = trainers[n_train + i].pair().transport(X_val); });
            const BceResult v = classifier_bce(model, X_val, val_images, val.labels, false);
            rec.val_accuracy = accuracy_of(v.probabilities, val.labels, model.threshold);
            rec.val_loss = v.loss;
        } else {
            rec.val_accuracy = rec.train_accuracy;
            rec.val_loss = rec.clf_loss;
        }
        result.history.push_back(rec);

        const bool better = rec.val_accuracy > best_acc || (rec.val_accuracy == best_acc && rec.val_loss < best_loss);
        if (better) {
            best_acc = rec.val_accuracy;
            best_loss = rec.val_loss;
            best_model = model;
            best_pairs.clear();
            for (const auto& t : trainers) best_pairs.push_back(t.pair());
            result.best_phase = phase;
            result.ot_iterations = trainers.front().pair().meta.iterations;
            since_best = 0;
        } else if (++since_best >= sched.patience) {
            break;
        }
    }

    std::vector<std::string> ids;
    for (const PointCloud* c : clouds) ids.push_back(c->id);
    result.embedding = EmbeddingSet::build(reference, std::move(ids), std::move(best_pairs), clf_cfg.sample_size,
                                           val_sample_seed);
    result.train_count = n_train;
    result.model = std::move(best_model);
    return result;
}

DualPair embed_test_cloud(const ReferenceMeasure& reference, const PointCloud& cloud, const SolverConfig& solver_cfg) {
    require_nonempty(cloud, "embed_test_cloud");
    return train_map(reference, cloud, solver_cfg);
}

double predict_resampled(const ClassifierModel& model, const DualPair& pair, const ReferenceMeasure& reference, int n,
                         int k, std::uint64_t seed) {
    if (k < 1) throw ConfigError("resample count must be >= 1");
    double total = 0.0;
    for (int j = 0; j < k; ++j) total += score(model, pair, reference.sample(n, mix_seed(seed, static_cast<std::uint64_t>(j))));
    return total / k;
}

Metrics evaluate(const std::vector<double>& probabilities, const std::vector<int>& labels, double threshold) {
    if (probabilities.size() != labels.size()) throw DataError("evaluate: predictions and labels differ in length");
    if (probabilities.empty()) throw DataError("evaluate: no predictions");
    Metrics m;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool pred = probabilities[i] >= threshold;
        const bool pos = labels[i] == 1;
        if (pred && pos) ++m.tp;
        else if (pred) ++m.fp;
        else if (pos) ++m.fn;
        else ++m.tn;
    }
    m.precision_defined = m.tp + m.fp > 0;
    m.recall_defined = m.tp + m.fn > 0;
    m.precision = m.precision_defined ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp) : 0.0;
    m.recall = m.recall_defined ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn) : 0.0;
    m.accuracy = static_cast<double>(m.tp + m.tn) / static_cast<double>(m.total());
    return m;
}

}  // namespace lotnet
