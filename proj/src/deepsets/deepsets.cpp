#include "lotnet/deepsets.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "lotnet/classify.hpp"

namespace lotnet {

namespace {

double softplus(double s) { return std::max(s, 0.0) + std::log1p(std::exp(-std::abs(s))); }

std::vector<int> layer_sizes(int in, const std::vector<int>& hidden, int out) {
    std::vector<int> s{in};
    s.insert(s.end(), hidden.begin(), hidden.end());
    s.push_back(out);
    return s;
}

// Logit of rho(mean phi(X)) for a cloud in canonical order.
double ds_logit(const DeepSetsModel& model, const Matrix& X) {
    const Matrix pooled = model.phi.forward(X).rowwise().mean();
    return model.rho.forward(pooled)(0, 0);
}

double accuracy(const std::vector<double>& p, const std::vector<int>& y) {
    std::size_t ok = 0;
    for (std::size_t i = 0; i < p.size(); ++i) ok += ((p[i] >= 0.5) == (y[i] == 1));
    return p.empty() ? 0.0 : static_cast<double>(ok) / static_cast<double>(p.size());
}

}  // namespace

void DeepSetsModel::validate() const {
    if (phi.out_dim() != rho.in_dim()) throw DimensionError("DeepSets: pooled dim differs between phi and rho");
    if (rho.out_dim() != 1) throw DimensionError("DeepSets: rho must output a scalar");
}

void DeepSetsConfig::validate() const {
    if (pooled_dim < 1 || batch_clouds < 1 || points_per_cloud < 0 || bagging_models < 1)
        throw ConfigError("DeepSets config: sizes must be positive");
    for (int h : phi_hidden)
        if (h < 1) throw ConfigError("DeepSets phi widths must be >= 1");
    for (int h : rho_hidden)
        if (h < 1) throw ConfigError("DeepSets rho widths must be >= 1");
}

DeepSetsModel ds_init(int dim, const DeepSetsConfig& cfg, Rng& rng) {
    cfg.validate();
    DeepSetsModel m;
    m.phi = Mlp(layer_sizes(dim, cfg.phi_hidden, cfg.pooled_dim), Activation{}, rng);
    m.rho = Mlp(layer_sizes(cfg.pooled_dim, cfg.rho_hidden, 1), Activation{}, rng);
    return m;
}

double ds_forward(const DeepSetsModel& model, const PointCloud& cloud) {
    require_nonempty(cloud, "ds_forward");
    require_dims(cloud.dim() == model.phi.in_dim(), "ds_forward: cloud dim vs model input");
    return sigmoid(ds_logit(model, canonical_order(cloud.points)));
}

double ds_loss(const DeepSetsModel& model, const std::vector<Matrix>& clouds, const std::vector<int>& labels,
               Vector* grad) {
    if (clouds.empty() || clouds.size() != labels.size()) throw DataError("ds_loss: need one label per cloud");
    const double N = static_cast<double>(clouds.size());
    const Eigen::Index n_phi = model.phi.num_params();
    if (grad) *grad = Vector::Zero(n_phi + model.rho.num_params());
    double loss = 0.0;
    for (std::size_t i = 0; i < clouds.size(); ++i) {
        Mlp::Tape phi_tape, rho_tape;
        const Matrix feats = model.phi.forward(clouds[i], phi_tape);
        const Matrix pooled = feats.rowwise().mean();
        const double s = model.rho.forward(pooled, rho_tape)(0, 0);
        loss += (labels[i] == 1 ? softplus(-s) : softplus(s)) / N;
        if (grad) {
            const double ds = (sigmoid(s) - labels[i]) / N;
            Vector g_rho = Vector::Zero(model.rho.num_params());
            const Matrix d_pooled = model.rho.backward(rho_tape, Matrix::Constant(1, 1, ds), g_rho);
            const double n = static_cast<double>(clouds[i].cols());
            const Matrix d_feats = (d_pooled / n).replicate(1, clouds[i].cols());
            Vector g_phi = Vector::Zero(n_phi);
            model.phi.backward(phi_tape, d_feats, g_phi);
            grad->head(n_phi) += g_phi;
            grad->tail(g_rho.size()) += g_rho;
        }
    }
    if (!std::isfinite(loss)) throw NumericError("DeepSets loss is not finite");
    return loss;
}

DeepSetsTrained ds_train(const LabeledDataset& train, const LabeledDataset& val, int epochs, const DeepSetsConfig& cfg,
                         std::uint64_t seed) {
    train.validate();
    cfg.validate();
    if (epochs < 0) throw ConfigError("DeepSets epochs must be >= 0");
    if (train.count(0) == 0 || train.count(1) == 0) throw DataError("training set must contain both classes");
    Rng rng(seed);
    DeepSetsTrained out;
    out.model = ds_init(train.dim, cfg, rng);
    DeepSetsModel& model = out.model;
    DeepSetsModel best = model;

    std::vector<Matrix> train_clouds, val_clouds;
    for (const auto& c : train.clouds) {
        require_nonempty(c, "ds_train");
        train_clouds.push_back(canonical_order(c.points));
    }
    for (const auto& c : val.clouds) val_clouds.push_back(canonical_order(c.points));

    const Eigen::Index n_phi = model.phi.num_params();
    OptimState state(cfg.adam, n_phi + model.rho.num_params());
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    double best_acc = -1.0, best_loss = std::numeric_limits<double>::infinity();

    for (int epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_clouds)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_clouds));
            std::vector<Matrix> batch;
            std::vector<int> labels;
            for (std::size_t k = start; k < stop; ++k) {
                const Matrix& X = train_clouds[order[k]];
                if (cfg.points_per_cloud > 0 && X.cols() > cfg.points_per_cloud) {
                    Matrix sub(X.rows(), cfg.points_per_cloud);
                    for (int j = 0; j < cfg.points_per_cloud; ++j)
                        sub.col(j) = X.col(static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(X.cols()))));
                    batch.push_back(std::move(sub));
                } else {
                    batch.push_back(X);
                }
                labels.push_back(train.labels[order[k]]);
            }
            Vector g;
            epoch_loss += ds_loss(model, batch, labels, &g) * static_cast<double>(batch.size()) /
                          static_cast<double>(order.size());
            Vector w(n_phi + model.rho.num_params());
            w << model.phi.pack(), model.rho.pack();
            adam_step(w, g, state);
            model.phi.unpack(w.head(n_phi));
            model.rho.unpack(w.tail(model.rho.num_params()));
        }

        DeepSetsEpoch rec;
        rec.epoch = epoch;
        rec.train_loss = epoch_loss;
        if (!val_clouds.empty()) {
            std::vector<double> probs;
            for (const auto& X : val_clouds) probs.push_back(sigmoid(ds_logit(model, X)));
            rec.val_accuracy = accuracy(probs, val.labels);
            rec.val_loss = ds_loss(model, val_clouds, val.labels);
        } else {
            rec.val_accuracy = 0.0;
            rec.val_loss = epoch_loss;
        }
        out.history.push_back(rec);
        if (rec.val_accuracy > best_acc || (rec.val_accuracy == best_acc && rec.val_loss < best_loss)) {
            best_acc = rec.val_accuracy;
            best_loss = rec.val_loss;
            best = model;
            out.best_epoch = epoch;
        }
    }
    out.model = best;
    return out;
}

double ds_bagging(const std::vector<DeepSetsModel>& models, const PointCloud& cloud) {
    if (models.empty()) throw ConfigError("ds_bagging: no models");
    double total = 0.0;
    for (const auto& m : models) total += ds_forward(m, cloud);
    return total / static_cast<double>(models.size());
}

std::vector<DeepSetsTrained> ds_train_bagging(const LabeledDataset& train, const LabeledDataset& val, int epochs,
                                              const DeepSetsConfig& cfg, std::uint64_t seed, int threads) {
    cfg.validate();
    std::vector<DeepSetsTrained> out(static_cast<std::size_t>(cfg.bagging_models));
    parallel_for(out.size(), threads,
                 [&](std::size_t i) { out[i] = ds_train(train, val, epochs, cfg, seed + static_cast<std::uint64_t>(i)); });
    return out;
}

}  // namespace lotnet
