#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <numeric>

#include "helpers.hpp"
#include "lotnet/deepsets.hpp"

using namespace lotnet;
using namespace testing_helpers;

namespace {

DeepSetsConfig small_config() {
    DeepSetsConfig c;
    c.phi_hidden = {16};
    c.pooled_dim = 8;
    c.rho_hidden = {8};
    c.adam.step_size = 1e-2;
    c.batch_clouds = 4;
    c.bagging_models = 3;
    return c;
}

DeepSetsModel constant_model(int dim, double logit) {
    Rng rng(1);
    DeepSetsModel m = ds_init(dim, small_config(), rng);
    m.rho.unpack(Vector::Zero(m.rho.num_params()));
    m.rho.layers().back().b(0) = logit;
    return m;
}

// Clouds around (-c, 0) for class 0 and (c, 0) for class 1.
LabeledDataset shifted_classes(int per_class, double c, std::uint64_t seed) {
    Rng rng(seed);
    LabeledDataset ds;
    ds.dim = 2;
    for (int i = 0; i < 2 * per_class; ++i) {
        const int y = i % 2;
        Matrix X = rng.normal_matrix(2, 30);
        X.row(0).array() += (y == 1 ? c : -c);
        ds.clouds.push_back(cloud(X, "c" + std::to_string(i)));
        ds.labels.push_back(y);
    }
    return ds;
}

}  // namespace

TEST_CASE("forward examples") {
    Rng rng(2);
    const PointCloud c = cloud(rng.normal_matrix(2, 25));
    for (double b : {-1.0, 0.0, 2.5}) CHECK(ds_forward(constant_model(2, b), c) == doctest::Approx(sigmoid(b)).epsilon(1e-14));

    const DeepSetsModel m = ds_init(2, small_config(), rng);
    const Matrix x = rng.normal_matrix(2, 1);
    const double expect = sigmoid(m.rho.forward(m.phi.forward(x))(0, 0));
    CHECK(ds_forward(m, cloud(x)) == doctest::Approx(expect).epsilon(1e-14));

    CHECK_THROWS_AS(ds_forward(m, cloud(Matrix(2, 0))), DataError);
    CHECK_THROWS_AS(ds_forward(m, cloud(rng.normal_matrix(3, 4))), DimensionError);
}

TEST_CASE("forward is bitwise permutation invariant") {
    Rng rng(3);
    const DeepSetsModel m = ds_init(2, small_config(), rng);
    const PointCloud c = cloud(rng.normal_matrix(2, 200));
    const double base = ds_forward(m, c);
    std::vector<int> perm(200);
    std::iota(perm.begin(), perm.end(), 0);
    for (int t = 0; t < 100; ++t) {
        rng.shuffle(perm);
        PointCloud s = c;
        for (int k = 0; k < 200; ++k) s.points.col(k) = c.points.col(perm[static_cast<std::size_t>(k)]);
        const double v = ds_forward(m, s);
        CHECK(std::memcmp(&v, &base, sizeof v) == 0);
    }
}

TEST_CASE("loss gradient matches finite differences") {
    Rng rng(4);
    for (int trial = 0; trial < 30; ++trial) {
        DeepSetsConfig cfg = small_config();
        cfg.phi_hidden = {1 + static_cast<int>(rng.index(5))};
        cfg.pooled_dim = 1 + static_cast<int>(rng.index(4));
        const DeepSetsModel m = ds_init(2, cfg, rng);
        std::vector<Matrix> clouds;
        std::vector<int> labels;
        for (int i = 0; i < 3; ++i) {
            clouds.push_back(rng.normal_matrix(2, 5 + static_cast<int>(rng.index(10))));
            labels.push_back(static_cast<int>(rng.index(2)));
        }
        Vector g;
        ds_loss(m, clouds, labels, &g);
        const Eigen::Index n_phi = m.phi.num_params();
        Vector w(n_phi + m.rho.num_params());
        w << m.phi.pack(), m.rho.pack();
        auto f = [&](const Vector& v) {
            DeepSetsModel t = m;
            t.phi.unpack(v.head(n_phi));
            t.rho.unpack(v.tail(t.rho.num_params()));
            return ds_loss(t, clouds, labels);
        };
        CHECK(relative_error(g, finite_diff_grad(f, w, 1e-6)) <= 1e-4);
    }
}

TEST_CASE("zero epochs return the initialized model") {
    const LabeledDataset ds = shifted_classes(3, 2.0, 5);
    const DeepSetsTrained t = ds_train(ds, LabeledDataset{}, 0, small_config(), 9);
    CHECK(t.best_epoch == -1);
    CHECK(t.history.empty());
    Rng rng(9);
    const DeepSetsModel fresh = ds_init(2, small_config(), rng);
    CHECK(t.model.phi.pack() == fresh.phi.pack());
    CHECK(t.model.rho.pack() == fresh.rho.pack());
}

TEST_CASE("separable clouds are learned and label swap mirrors predictions") {
    const LabeledDataset train = shifted_classes(10, 1.5, 6);
    const LabeledDataset val = shifted_classes(5, 1.5, 7);
    const DeepSetsTrained a = ds_train(train, val, 60, small_config(), 3);
    REQUIRE(a.best_epoch >= 0);
    CHECK(a.history[static_cast<std::size_t>(a.best_epoch)].val_accuracy >= 0.9);

    const DeepSetsTrained b = ds_train(train.with_swapped_labels(), val.with_swapped_labels(), 60, small_config(), 3);
    int flipped = 0;
    for (const auto& c : val.clouds) flipped += (ds_forward(a.model, c) >= 0.5) != (ds_forward(b.model, c) >= 0.5);
    CHECK(flipped == static_cast<int>(val.size()));

    const DeepSetsTrained again = ds_train(train, val, 60, small_config(), 3);
    CHECK(again.model.phi.pack() == a.model.phi.pack());
    CHECK(again.best_epoch == a.best_epoch);
}

TEST_CASE("bagging") {
    Rng rng(8);
    const PointCloud c = cloud(rng.normal_matrix(2, 20));
    const DeepSetsModel m = ds_init(2, small_config(), rng);
    CHECK(ds_bagging({m}, c) == ds_forward(m, c));
    CHECK(ds_bagging(std::vector<DeepSetsModel>(10, m), c) == doctest::Approx(ds_forward(m, c)).epsilon(1e-14));
    CHECK(ds_bagging({constant_model(2, std::log(0.2 / 0.8)), constant_model(2, std::log(0.8 / 0.2))}, c) ==
          doctest::Approx(0.5));

    std::vector<DeepSetsModel> members;
    for (int i = 0; i < 5; ++i) members.push_back(ds_init(2, small_config(), rng));
    double lo = 1, hi = 0;
    for (const auto& mm : members) {
        lo = std::min(lo, ds_forward(mm, c));
        hi = std::max(hi, ds_forward(mm, c));
    }
    const double bag = ds_bagging(members, c);
    CHECK(bag >= lo);
    CHECK(bag <= hi);
    CHECK_THROWS(ds_bagging({}, c));
}

TEST_CASE("bagged training is independent of thread count") {
    const LabeledDataset train = shifted_classes(4, 1.5, 10);
    const auto one = ds_train_bagging(train, LabeledDataset{}, 5, small_config(), 4, 1);
    const auto three = ds_train_bagging(train, LabeledDataset{}, 5, small_config(), 4, 3);
    REQUIRE(one.size() == 3);
    REQUIRE(three.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(one[i].model.rho.pack() == three[i].model.rho.pack());
    CHECK(one[0].model.rho.pack() != one[1].model.rho.pack());
}
