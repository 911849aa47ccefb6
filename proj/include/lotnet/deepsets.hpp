#pragma once

#include <vector>

#include "lotnet/data.hpp"
#include "lotnet/nncore.hpp"

namespace lotnet {

/// rho(mean_k phi(x_k)) with a sigmoid output.
struct DeepSetsModel {
    Mlp phi;  // R^d -> R^h
    Mlp rho;  // R^h -> R

    void validate() const;
};

struct DeepSetsConfig {
    std::vector<int> phi_hidden{64, 64};
    int pooled_dim = 32;
    std::vector<int> rho_hidden{32, 32};
    AdamConfig adam{1e-3, 0.9, 0.999, 1e-8};
    int batch_clouds = 8;       // clouds per optimizer step
    int points_per_cloud = 0;   // > 0 subsamples each cloud per epoch during training
    int bagging_models = 10;

    void validate() const;
};

DeepSetsModel ds_init(int dim, const DeepSetsConfig& cfg, Rng& rng);

/// Probability for one cloud; points are put in canonical order first, so the
/// result does not depend on their order.
double ds_forward(const DeepSetsModel& model, const PointCloud& cloud);

struct DeepSetsEpoch {
    int epoch = 0;
    double train_loss = 0.0;
    double val_accuracy = 0.0;
    double val_loss = 0.0;
};

struct DeepSetsTrained {
    DeepSetsModel model;
    std::vector<DeepSetsEpoch> history;
    int best_epoch = -1;  // -1: zero epochs, initialized model returned
};

/// BCE training with Adam; returns the best-validation snapshot (accuracy,
/// then loss). Without validation clouds the training loss selects.
DeepSetsTrained ds_train(const LabeledDataset& train, const LabeledDataset& val, int epochs, const DeepSetsConfig& cfg,
                         std::uint64_t seed);

/// Mean BCE over a batch of clouds and its flat gradient over (phi, rho).
double ds_loss(const DeepSetsModel& model, const std::vector<Matrix>& clouds, const std::vector<int>& labels,
               Vector* grad = nullptr);

/// Arithmetic mean of member probabilities.
double ds_bagging(const std::vector<DeepSetsModel>& models, const PointCloud& cloud);

/// Trains cfg.bagging_models members with seeds seed + i on up to `threads` workers.
std::vector<DeepSetsTrained> ds_train_bagging(const LabeledDataset& train, const LabeledDataset& val, int epochs,
                                              const DeepSetsConfig& cfg, std::uint64_t seed, int threads = 1);

}  // namespace lotnet
