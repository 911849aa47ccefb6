#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <iostream>
#include <sstream>

#include "lotnet/cli.hpp"

namespace py = pybind11;
using namespace lotnet;

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// numpy arrays are (n_points, dim); the library stores points as columns.
Matrix to_columns(const RowMatrix& a) { return a.transpose(); }
RowMatrix to_rows(const Matrix& m) { return m.transpose(); }

PointCloud to_cloud(const RowMatrix& a, const std::string& id = "py") {
    PointCloud c;
    c.id = id;
    c.points = to_columns(a);
    return c;
}

RunConfig config_from(const py::object& cfg) {
    if (cfg.is_none()) return RunConfig{};
    if (py::isinstance<py::str>(cfg)) {
        const std::string s = cfg.cast<std::string>();
        if (!s.empty() && s.front() == '{') return run_config_from_json(Json::parse(s));
        return load_run_config(s);
    }
    // dict-like: round trip through the json module
    const std::string text = py::module_::import("json").attr("dumps")(cfg).cast<std::string>();
    return run_config_from_json(Json::parse(text));
}

py::dict metrics_dict(const Metrics& m) {
    py::dict d;
    d["tp"] = m.tp;
    d["fp"] = m.fp;
    d["fn"] = m.fn;
    d["tn"] = m.tn;
    d["precision"] = m.precision;
    d["recall"] = m.recall;
    d["accuracy"] = m.accuracy;
    d["precision_defined"] = m.precision_defined;
    d["recall_defined"] = m.recall_defined;
    return d;
}

SolverConfig solver_config(int iterations, std::uint64_t seed, std::vector<int> widths, int batch_size,
                           double step_size, double cycle_weight) {
    SolverConfig c;
    c.iterations = iterations;
    c.seed = seed;
    c.net.widths = std::move(widths);
    c.batch_size = batch_size;
    c.adam.step_size = step_size;
    c.cycle_weight = cycle_weight;
    return c;
}

}  // namespace

PYBIND11_MODULE(_lotnet, m) {
    m.doc() = "Linearized optimal transport with input-convex networks";
    m.attr("__version__") = kBuildVersion;

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    py::class_<DualPair>(m, "DualPair")
        .def_property_readonly("dim", &DualPair::dim)
        .def_property_readonly("iterations", [](const DualPair& p) { return p.meta.iterations; })
        .def_property_readonly("final_loss", [](const DualPair& p) { return p.meta.final_loss; })
        .def("transport", [](const DualPair& p, const RowMatrix& X) { return to_rows(p.transport(to_columns(X))); },
             py::arg("x"), "Apply the forward map to each row of x.")
        .def("inverse", [](const DualPair& p, const RowMatrix& Y) { return to_rows(p.phi.grad(to_columns(Y))); },
             py::arg("y"), "Apply the backward map to each row of y.")
        .def("potential", [](const DualPair& p, const RowMatrix& X) { return Vector(p.psi.values(to_columns(X)).transpose()); },
             py::arg("x"));

    m.def(
        "train_map",
        [](const RowMatrix& target, int iterations, std::uint64_t seed, std::vector<int> widths, int batch_size,
           double step_size, double cycle_weight, std::optional<RowMatrix> reference) {
            const PointCloud mu = to_cloud(target, "target");
            const ReferenceMeasure ref = reference ? ReferenceMeasure::fitted_gaussian({to_cloud(*reference)})
                                                   : ReferenceMeasure::standard_gaussian(mu.dim());
            py::gil_scoped_release release;
            return train_map(ref, mu, solver_config(iterations, seed, std::move(widths), batch_size, step_size, cycle_weight));
        },
        py::arg("target"), py::arg("iterations") = 2000, py::arg("seed") = 0, py::arg("widths") = std::vector<int>{32, 32},
        py::arg("batch_size") = 128, py::arg("step_size") = 3e-3, py::arg("cycle_weight") = 1.0,
        py::arg("reference") = py::none(),
        "Fit a transport map from a reference Gaussian onto the target cloud. Without `reference`\n"
        "the reference is N(0, I); otherwise a diagonal Gaussian fitted to those points.");

    m.def(
        "lot_distance",
        [](const DualPair& a, const DualPair& b, const RowMatrix& sample) {
            return lot_distance_empirical(a, b, to_cloud(sample));
        },
        py::arg("a"), py::arg("b"), py::arg("sample"), "Empirical LOT distance on a shared reference sample.");

    m.def(
        "estimate_w2",
        [](const DualPair& p, const RowMatrix& sigma, const RowMatrix& mu) {
            return estimate_w2_dual(p, to_cloud(sigma), to_cloud(mu));
        },
        py::arg("pair"), py::arg("sigma"), py::arg("mu"));

    m.def(
        "exact_ot",
        [](const RowMatrix& X, const RowMatrix& Y) {
            const DiscreteOt r = exact_ot_discrete(to_cloud(X), to_cloud(Y));
            return py::make_tuple(r.cost, r.matching);
        },
        py::arg("x"), py::arg("y"), "Minimum mean squared-distance matching; returns (cost, matching).");

    m.def(
        "gaussian_w2",
        [](const Vector& ma, const Vector& va, const Vector& mb, const Vector& vb) {
            return gaussian_w2(GaussianSpec{ma, va}, GaussianSpec{mb, vb});
        },
        py::arg("mean_a"), py::arg("var_a"), py::arg("mean_b"), py::arg("var_b"));

    m.def(
        "theorem_bound",
        [](double beta, double eps, double R, double n, double delta) {
            return theorem_bound(BoundParams{beta, eps, R, n, delta});
        },
        py::arg("beta") = 1.0, py::arg("eps") = 0.1, py::arg("R") = 1.0, py::arg("n") = 1000.0, py::arg("delta") = 0.05);

    m.def(
        "gen_synthetic",
        [](int clouds_per_class, int points_per_cloud, std::uint64_t seed) {
            const LabeledDataset ds = gen_synthetic(SyntheticSpec::default_spec(), clouds_per_class, points_per_cloud, seed);
            std::vector<RowMatrix> clouds;
            for (const auto& c : ds.clouds) clouds.push_back(to_rows(c.points));
            return py::make_tuple(clouds, ds.labels);
        },
        py::arg("clouds_per_class"), py::arg("points_per_cloud"), py::arg("seed") = 0,
        "Two-class synthetic clouds from the default spec; returns (clouds, labels).");

    m.def("default_config", [] { return to_json(RunConfig{}).dump(); }, "Default run configuration as JSON text.");

    // Commands. `config` is None, a path, JSON text or a dict; the log goes to the returned string.
    m.def(
        "gen",
        [](const std::filesystem::path& out, const py::object& cfg) {
            const RunConfig c = config_from(cfg);
            std::ostringstream log;
            cmd_gen(c, out, log);
            return log.str();
        },
        py::arg("out"), py::arg("config") = py::none());

    m.def(
        "train",
        [](const std::filesystem::path& data, const std::filesystem::path& out, const py::object& cfg) {
            const RunConfig c = config_from(cfg);
            std::ostringstream log;
            TrainOutcome r;
            {
                py::gil_scoped_release release;
                r = cmd_train(c, data, out, log);
            }
            py::dict d;
            d["validation"] = metrics_dict(r.validation);
            d["phases"] = r.history.size();
            d["ot_iterations"] = r.bundle.ot_iterations;
            d["log"] = log.str();
            return d;
        },
        py::arg("data"), py::arg("out"), py::arg("config") = py::none());

    m.def(
        "evaluate",
        [](const std::filesystem::path& bundle, const std::filesystem::path& data, int resamples,
           const std::string& subset, const std::filesystem::path& out) {
            std::ostringstream log;
            EvalOutcome r;
            {
                py::gil_scoped_release release;
                r = cmd_eval(bundle, data, resamples, eval_subset_from_string(subset), out, log);
            }
            py::dict d;
            d["ids"] = r.ids;
            d["labels"] = r.labels;
            d["single"] = r.single;
            d["resampled"] = r.resampled;
            d["metrics_single"] = metrics_dict(r.metrics_single);
            d["metrics_resampled"] = metrics_dict(r.metrics_resampled);
            return d;
        },
        py::arg("bundle"), py::arg("data"), py::arg("resamples") = 10, py::arg("subset") = "test", py::arg("out") = ".");

    m.def(
        "distances",
        [](const std::filesystem::path& bundle, const std::filesystem::path& out_csv) {
            std::ostringstream log;
            return cmd_dist(bundle, out_csv, log);
        },
        py::arg("bundle"), py::arg("out_csv"));

    m.def(
        "baseline",
        [](const std::filesystem::path& data, const std::filesystem::path& out, const py::object& cfg) {
            const RunConfig c = config_from(cfg);
            std::ostringstream log;
            BaselineOutcome r;
            {
                py::gil_scoped_release release;
                r = cmd_baseline(c, data, out, log);
            }
            py::dict d;
            d["single"] = metrics_dict(r.single);
            d["bagging"] = metrics_dict(r.bagging);
            return d;
        },
        py::arg("data"), py::arg("out"), py::arg("config") = py::none());
}
