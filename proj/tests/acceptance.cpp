// Acceptance suite: one PASS/FAIL line per criterion.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "helpers.hpp"
#include "lotnet/cli.hpp"

using namespace lotnet;
using namespace testing_helpers;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) pass = false;
        if (!detail.empty()) detail += "; ";
        detail += what + (ok ? "" : " [failed]");
    }
};

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string fmt(const char* f, double a, double b) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

double stddev(const std::vector<double>& v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::string slurp(const fs::path& f) {
    std::ifstream in(f, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

SolverConfig desk_solver(std::uint64_t seed, std::int64_t iterations) {
    SolverConfig c;
    c.batch_size = 128;
    c.net.widths = {32, 32};
    c.adam.step_size = 3e-3;
    c.iterations = iterations;
    c.seed = seed;
    return c;
}

IcnnConfig random_icnn_config(Rng& rng) {
    IcnnConfig cfg;
    cfg.dim = 1 + static_cast<int>(rng.index(4));
    const int depth = 1 + static_cast<int>(rng.index(3));
    cfg.widths.clear();
    for (int l = 0; l < depth; ++l) cfg.widths.push_back(1 + static_cast<int>(rng.index(8)));
    cfg.activation = Activation{ActivationKind::SmoothRelu, 0.5 + 2.0 * rng.uniform()};
    cfg.quadratic = rng.uniform() < 0.5 ? 0.0 : rng.uniform();
    return cfg;
}

// Projected parameters with random biases and pass-through weights, some clamped to zero.
IcnnParams random_icnn_params(const IcnnConfig& cfg, Rng& rng) {
    IcnnParams p = IcnnParams::init(cfg, rng);
    for (auto& L : p.layers) {
        L.b = rng.normal_matrix(L.b.size(), 1);
        if (L.Wz.size() > 0) L.Wz = rng.normal_matrix(L.Wz.rows(), L.Wz.cols());
    }
    return project_nonneg(p);
}

PointCloud permuted(const PointCloud& c, const std::vector<int>& perm) {
    PointCloud s = c;
    for (std::size_t k = 0; k < perm.size(); ++k) s.points.col(static_cast<Eigen::Index>(k)) = c.points.col(perm[k]);
    return s;
}

// ---------------------------------------------------------------------------

Outcome gradients() {
    Outcome o;
    constexpr int kConfigs = 60;
    Rng rng(1001);
    double worst_param = 0, worst_input = 0, worst_clf = 0, worst_solver = 0;
    for (int t = 0; t < kConfigs; ++t) {
        const IcnnConfig cfg = random_icnn_config(rng);
        const IcnnParams p = random_icnn_params(cfg, rng);
        const Matrix X = rng.normal_matrix(cfg.dim, 3);
        const RowVector up = rng.normal_matrix(1, 3);
        auto f = [&](const Vector& theta) {
            IcnnParams q = p;
            q.unpack(theta);
            return (icnn_forward_batch(q, cfg, X).array() * up.array()).sum();
        };
        worst_param = std::max(worst_param,
                               relative_error(icnn_backward(p, cfg, X, up).params, finite_diff_grad(f, p.pack(), 1e-6)));
        const Vector x = rng.normal_matrix(cfg.dim, 1);
        const Vector fd = finite_diff_grad([&](const Vector& v) { return icnn_forward(p, cfg, v); }, x, 1e-6);
        worst_input = std::max(worst_input, relative_error(icnn_input_grad(p, cfg, x), fd));
    }
    for (int t = 0; t < kConfigs; ++t) {
        const int dim = 1 + static_cast<int>(rng.index(3));
        ClassifierModel model =
            ClassifierModel::init(dim, {1 + static_cast<int>(rng.index(6)), 1 + static_cast<int>(rng.index(6))}, rng);
        const Matrix X = rng.normal_matrix(dim, 20);
        std::vector<Matrix> images;
        std::vector<int> labels;
        for (int i = 0; i < 4; ++i) {
            images.push_back(rng.normal_matrix(dim, 20));
            labels.push_back(i % 2);
        }
        auto f = [&](const Vector& w) {
            ClassifierModel m = model;
            m.weightnet.unpack(w);
            return classifier_bce(m, X, images, labels, false).loss;
        };
        worst_clf = std::max(worst_clf, relative_error(classifier_bce(model, X, images, labels).grad,
                                                       finite_diff_grad(f, model.weightnet.pack(), 1e-6)));
    }
    for (int t = 0; t < kConfigs; ++t) {
        SolverConfig cfg;
        const int dim = 1 + static_cast<int>(rng.index(3));
        cfg.net.widths = {1 + static_cast<int>(rng.index(5)), 1 + static_cast<int>(rng.index(5))};
        cfg.net.activation = Activation{ActivationKind::SmoothRelu, 0.5 + rng.uniform()};
        DualPair p = DualPair::init(cfg.psi_config(dim), cfg.phi_config(dim), rng);
        const Matrix X = rng.normal_matrix(dim, 4), Y = rng.normal_matrix(dim, 5);
        const double lam = 2.0 * rng.uniform();
        Vector gpsi, gphi;
        solver_loss(p, X, Y, lam, &gpsi, &gphi);
        Vector both(gpsi.size() + gphi.size()), theta(gpsi.size() + gphi.size());
        both << gpsi, gphi;
        theta << p.psi.params.pack(), p.phi.params.pack();
        auto f = [&](const Vector& v) {
            DualPair q = p;
            q.psi.params.unpack(v.head(gpsi.size()));
            q.phi.params.unpack(v.tail(gphi.size()));
            return solver_loss(q, X, Y, lam).total;
        };
        worst_solver = std::max(worst_solver, relative_error(both, finite_diff_grad(f, theta, 1e-6)));
    }
    o.require(worst_param <= 1e-4, fmt("ICNN params max rel err %.2e", worst_param));
    o.require(worst_input <= 1e-4, fmt("ICNN input %.2e", worst_input));
    o.require(worst_clf <= 1e-4, fmt("classifier weight net %.2e", worst_clf));
    o.require(worst_solver <= 1e-4, fmt("solver loss %.2e", worst_solver));
    o.detail += "; " + std::to_string(kConfigs) + " configurations each";
    return o;
}

Outcome convexity() {
    Outcome o;
    Rng rng(2002);
    int probes = 0;
    double worst_jensen = 0, worst_mono = 0;
    for (int net = 0; net < 25; ++net) {
        IcnnConfig cfg = random_icnn_config(rng);
        if (net % 5 == 0) cfg.activation = Activation{ActivationKind::Relu, 1.0};
        const IcnnParams p = random_icnn_params(cfg, rng);
        for (int k = 0; k < 60; ++k, ++probes) {
            const Vector x = 3.0 * rng.normal_matrix(cfg.dim, 1), y = 3.0 * rng.normal_matrix(cfg.dim, 1);
            const double lam = rng.uniform();
            const double gap = icnn_forward(p, cfg, lam * x + (1 - lam) * y) -
                               (lam * icnn_forward(p, cfg, x) + (1 - lam) * icnn_forward(p, cfg, y));
            worst_jensen = std::max(worst_jensen, gap);
            const double mono = (icnn_input_grad(p, cfg, x) - icnn_input_grad(p, cfg, y)).dot(x - y);
            worst_mono = std::max(worst_mono, -mono);
        }
    }
    o.require(probes >= 1000, std::to_string(probes) + " probes");
    o.require(worst_jensen <= 1e-9, fmt("max Jensen violation %.2e", worst_jensen));
    o.require(worst_mono <= 1e-9, fmt("max monotonicity violation %.2e", worst_mono));
    return o;
}

double brute_force_cost(const Matrix& X, const Matrix& Y) {
    std::vector<int> perm(static_cast<std::size_t>(X.cols()));
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double c = 0;
        for (std::size_t k = 0; k < perm.size(); ++k)
            c += (X.col(static_cast<Eigen::Index>(k)) - Y.col(perm[k])).squaredNorm();
        best = std::min(best, c / static_cast<double>(perm.size()));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

Outcome exact_ot() {
    Outcome o;
    Rng rng(3003);
    double worst_brute = 0, worst_shift = 0, worst_triangle = 0;
    for (int inst = 0; inst < 100; ++inst) {
        const int n = 1 + inst % 6;
        const int d = 1 + static_cast<int>(rng.index(3));
        const Matrix X = rng.normal_matrix(d, n), Y = rng.normal_matrix(d, n), Z = 2.0 * rng.normal_matrix(d, n);
        const DiscreteOt xy = exact_ot_discrete(cloud(X), cloud(Y));
        worst_brute = std::max(worst_brute, std::abs(xy.cost - brute_force_cost(X, Y)));
        const Vector a = 5.0 * rng.normal_matrix(d, 1);
        worst_shift = std::max(
            worst_shift, std::abs(exact_ot_discrete(cloud(X.colwise() + a), cloud(Y.colwise() + a)).cost - xy.cost));
        const double dyz = exact_ot_discrete(cloud(Y), cloud(Z)).distance;
        const double dxz = exact_ot_discrete(cloud(X), cloud(Z)).distance;
        worst_triangle = std::max(worst_triangle, dxz - xy.distance - dyz);
    }
    o.require(worst_brute <= 1e-9, fmt("100 instances n<=6, max |hungarian - brute force| %.2e", worst_brute));
    o.require(worst_shift <= 1e-9, fmt("shift invariance %.2e", worst_shift));
    o.require(worst_triangle <= 1e-9, fmt("triangle excess %.2e", worst_triangle));
    return o;
}

Outcome gaussian_recovery() {
    Outcome o;
    constexpr std::int64_t kIterations = 6000;
    const ReferenceMeasure ref = ReferenceMeasure::standard_gaussian(2, 1);
    Rng gen(4004);
    PointCloud mu = cloud(0.5 * gen.normal_matrix(2, 4000), "mu");
    mu.points.array() += 2.0;
    const DualPair p = train_map(ref, mu, desk_solver(41, kIterations));

    const GaussianSpec a{Vector::Zero(2), Vector::Ones(2)};
    const GaussianSpec b{Vector::Constant(2, 2.0), Vector::Constant(2, 0.25)};
    Rng r(4005);
    const Matrix X = ref.sample(10000, r);
    const Matrix T = gaussian_monge_map(a, b, X);
    const double map_err = (p.transport(X) - T).colwise().norm().mean() / T.colwise().norm().mean();
    const double w2 = estimate_w2_dual(p, cloud(X), mu);
    const double exact = gaussian_w2(a, b);
    const double w2_err = std::abs(w2 - exact) / exact;
    o.require(map_err <= 0.15, fmt("relative map error %.4f", map_err));
    o.require(w2_err <= 0.20, fmt("dual W2 %.4f vs exact %.4f", w2, exact) + fmt(" (rel err %.4f)", w2_err));
    o.detail += "; " + std::to_string(kIterations) + " iterations";
    return o;
}

Outcome isometry() {
    Outcome o;
    const ReferenceMeasure ref = ReferenceMeasure::standard_gaussian(2, 5);
    const SyntheticSpec spec = SyntheticSpec::default_spec();
    Rng gen(5005);
    const PointCloud base = sample_base(spec.base[0], spec.dim, 1000, gen);
    Rng rs(5006);
    const PointCloud sample = cloud(ref.sample(4000, rs));

    Vector a1(2), a2(2);
    a1 << 0.6, 0.8;
    a2 = -a1;
    PointCloud s1 = base, s2 = base;
    s1.points.colwise() += a1;
    s2.points.colwise() += a2;
    const DualPair p1 = train_map(ref, s1, desk_solver(51, 3000));
    const DualPair p2 = train_map(ref, s2, desk_solver(52, 3000));
    const double shift_d = lot_distance_empirical(p1, p2, sample);
    o.require(std::abs(shift_d - 2.0) <= 0.2, fmt("shift: LOT %.4f vs 2", shift_d));

    PointCloud c1 = base;
    c1.points = base.points.colwise() - base.points.rowwise().mean();
    PointCloud c2 = c1;
    c2.points *= 2.0;
    SolverConfig sc = desk_solver(53, 4000);
    const DualPair q1 = train_map(ref, c1, sc);
    sc.seed = 54;
    const DualPair q2 = train_map(ref, c2, sc);
    const double scale_d = lot_distance_empirical(q1, q2, sample);
    const double oracle = exact_ot_discrete(c1, c2).distance;
    o.require(std::abs(scale_d - oracle) <= 0.15 * oracle, fmt("scaling: LOT %.4f vs exact %.4f", scale_d, oracle));
    return o;
}

Outcome end_to_end() {
    Outcome o;
    const fs::path work = fs::current_path() / "acceptance_end_to_end";
    fs::remove_all(work);
    RunConfig cfg = load_run_config(fs::path(LOTNET_SOURCE_DIR) / "configs" / "desk.json");
    std::ostringstream log;
    cmd_gen(cfg, work / "data", log);
    const TrainOutcome trained = cmd_train(cfg, work / "data", work / "run", log);
    const EvalOutcome ev = cmd_eval(work / "run" / "bundle.json", work / "data", 10, EvalSubset::Test, work / "eval", log);
    const Metrics& lot = ev.metrics_resampled;
    o.require(lot.accuracy >= 0.95, fmt("LOT x10 test accuracy %.3f", lot.accuracy) + " on " +
                                        std::to_string(lot.total()) + " clouds (" + std::to_string(lot.tp + lot.fn) +
                                        " positive)");

    // The literal split leaves only one class in test; a balanced fresh set checks the other.
    const ModelBundle b = load_bundle(work / "run" / "bundle.json");
    const LabeledDataset held = gen_synthetic(cfg.synthetic, 10, cfg.points_per_cloud, mix_seed(cfg.seed, 4242));
    SolverConfig sc = b.config.solver;
    sc.iterations = b.ot_iterations;
    std::vector<double> p_lot, p_ds, p_bag;
    for (std::size_t i = 0; i < held.size(); ++i) {
        sc.seed = mix_seed(cfg.seed, 9000 + i);
        const DualPair pair = embed_test_cloud(b.reference, held.clouds[i], sc);
        p_lot.push_back(predict_resampled(b.classifier, pair, b.reference, b.sample_size, 10, mix_seed(cfg.seed, i)));
    }
    const double held_lot = evaluate(p_lot, held.labels).accuracy;
    o.require(held_lot >= 0.95, fmt("LOT x10 balanced held-out accuracy %.3f", held_lot));

    const BaselineOutcome base = cmd_baseline(cfg, work / "data", work / "baseline", log);
    o.require(base.single.accuracy >= 0.90, fmt("DeepSets test accuracy %.3f", base.single.accuracy));
    o.require(base.bagging.accuracy >= 0.90,
              fmt("bagging x%.0f test accuracy %.3f", static_cast<double>(base.models.size()), base.bagging.accuracy));
    for (const auto& c : held.clouds) {
        p_ds.push_back(ds_forward(base.models.front(), c));
        p_bag.push_back(ds_bagging(base.models, c));
    }
    const double held_ds = evaluate(p_ds, held.labels).accuracy, held_bag = evaluate(p_bag, held.labels).accuracy;
    o.require(held_ds >= 0.90, fmt("DeepSets held-out %.3f", held_ds));
    o.require(held_bag >= 0.90, fmt("bagging held-out %.3f", held_bag));
    o.require(base.models.size() == 10, "10 bagged models");
    fs::remove_all(work);
    return o;
}

Outcome permutation() {
    Outcome o;
    Rng rng(7007);
    const ClassifierModel model = ClassifierModel::init(2, {16, 16}, rng);
    SolverConfig sc;
    sc.net.widths = {16, 16};
    const DualPair pair = DualPair::init(sc.psi_config(2), sc.phi_config(2), rng);
    DeepSetsConfig dc;
    const DeepSetsModel ds = ds_init(2, dc, rng);
    const PointCloud sample = cloud(rng.normal_matrix(2, 500));
    const double s0 = score(model, pair, sample), d0 = ds_forward(ds, sample);
    std::vector<int> perm(500);
    std::iota(perm.begin(), perm.end(), 0);
    int score_same = 0, ds_same = 0;
    for (int t = 0; t < 100; ++t) {
        rng.shuffle(perm);
        const PointCloud s = permuted(sample, perm);
        const double a = score(model, pair, s), b = ds_forward(ds, s);
        score_same += std::memcmp(&a, &s0, sizeof a) == 0;
        ds_same += std::memcmp(&b, &d0, sizeof b) == 0;
    }
    o.require(score_same == 100, "score bitwise equal in " + std::to_string(score_same) + "/100 shuffles");
    o.require(ds_same == 100, "ds_forward bitwise equal in " + std::to_string(ds_same) + "/100 shuffles");
    return o;
}

Outcome concentration() {
    Outcome o;
    const ReferenceMeasure ref = ReferenceMeasure::standard_gaussian(2, 8);
    const SyntheticSpec spec = SyntheticSpec::default_spec();
    Rng gen(8008);
    const PointCloud a = sample_base(spec.base[0], spec.dim, 1000, gen), b = sample_base(spec.base[1], spec.dim, 1000, gen);
    const DualPair pa = train_map(ref, a, desk_solver(81, 2000));
    const DualPair pb = train_map(ref, b, desk_solver(82, 2000));
    auto spread = [&](int n) {
        std::vector<double> v;
        for (std::uint64_t s = 0; s < 20; ++s) v.push_back(lot_distance_resampled(pa, pb, ref, n, mix_seed(8009, s)));
        return stddev(v);
    };
    const double s1 = spread(1000), s4 = spread(4000);
    o.require(s4 <= 0.7 * s1, fmt("stddev n=1000 %.5f, n=4000 %.5f", s1, s4) + fmt(" (ratio %.3f)", s4 / s1));
    return o;
}

Outcome bound() {
    Outcome o;
    const double v = theorem_bound(BoundParams{1.0, 0.1, 1.0, 1000, 0.05});
    o.require(std::abs(v - 0.8842) <= 1e-3, fmt("example %.5f", v));
    int cells = 0, monotone = 0;
    for (double beta : {0.25, 0.5, 1.0, 2.0, 4.0})
        for (double eps : {0.001, 0.01, 0.1, 0.5})
            for (double n : {10.0, 100.0, 1000.0, 1e4, 1e6}) {
                const BoundParams p{beta, eps, 1.0, n, 0.05};
                const double base = theorem_bound(p);
                BoundParams pb = p, pe = p, pn = p;
                pb.beta *= 1.5;
                pe.eps *= 1.5;
                pn.n *= 1.5;
                ++cells;
                monotone += theorem_bound(pb) > base && theorem_bound(pe) > base && theorem_bound(pn) < base;
            }
    o.require(monotone == cells, "monotone in beta, eps, n on " + std::to_string(monotone) + "/" +
                                     std::to_string(cells) + " grid cells");
    return o;
}

Outcome determinism() {
    Outcome o;
    const fs::path work = fs::current_path() / "acceptance_determinism";
    fs::remove_all(work);
    RunConfig cfg = load_run_config(fs::path(LOTNET_SOURCE_DIR) / "configs" / "desk.json");
    cfg.clouds_per_class = 8;
    cfg.points_per_cloud = 300;
    cfg.subsample_n = 300;
    cfg.schedule.total_epochs = 100;
    cfg.classifier.sample_size = 200;
    cfg.threads = 1;
    std::ostringstream log;
    cmd_gen(cfg, work / "data", log);
    cmd_train(cfg, work / "data", work / "a", log);
    cmd_train(cfg, work / "data", work / "b", log);
    const std::string ha = slurp(work / "a" / "history.csv"), hb = slurp(work / "b" / "history.csv");
    const std::string ba = slurp(work / "a" / "bundle.json"), bb = slurp(work / "b" / "bundle.json");
    o.require(!ha.empty() && ha == hb, "history CSV byte-identical (" + std::to_string(ha.size()) + " bytes)");
    o.require(!ba.empty() && ba == bb, "bundle byte-identical (" + std::to_string(ba.size()) + " bytes)");
    fs::remove_all(work);
    return o;
}

struct Criterion {
    int number;
    const char* name;
    double time_limit_s;  // <= 0: no limit
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lotnet acceptance suite"};
    int only = 0;
    app.add_option("--criterion", only, "Run a single criterion (1-10); default runs all")->check(CLI::Range(0, 10));
    CLI11_PARSE(app, argc, argv);

    const std::vector<Criterion> all{
        {1, "gradient correctness", 60, gradients},
        {2, "convexity", 10, convexity},
        {3, "exact OT oracle", 30, exact_ot},
        {4, "Gaussian map recovery", 300, gaussian_recovery},
        {5, "shift and scaling isometry", 600, isometry},
        {6, "end-to-end synthetic classification", 1200, end_to_end},
        {7, "permutation invariance", 0, permutation},
        {8, "resampling concentration", 0, concentration},
        {9, "bound calculator", 0, bound},
        {10, "determinism", 0, determinism},
    };

    int failures = 0;
    for (const auto& c : all) {
        if (only != 0 && c.number != only) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.time_limit_s > 0) o.require(secs < c.time_limit_s, fmt("%.1f s (limit %.0f s)", secs, c.time_limit_s));
        else o.detail += fmt("; %.1f s", secs);
        std::printf("criterion %d: %s %s: %s\n", c.number, o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str());
        std::fflush(stdout);
        failures += !o.pass;
    }
    return failures == 0 ? 0 : 1;
}
