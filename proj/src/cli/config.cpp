#include <cstdio>
#include <fstream>
#include <initializer_list>

#include "lotnet/cli.hpp"
#include "lotnet/errors.hpp"

namespace lotnet {

namespace {

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& ctx) {
    if (!j.is_object()) throw ConfigError("config: '" + ctx + "' must be an object");
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || item.key() == a;
        if (!ok) throw ConfigError("config: unknown key '" + item.key() + "' in '" + ctx + "'");
    }
}

template <class T>
void read(const Json& j, const char* key, T& out, const std::string& ctx) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("config: bad value for '" + ctx + "." + key + "'");
    }
}

Json vec_json(const Vector& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

Vector vec_from(const Json& j, const std::string& ctx) {
    if (!j.is_array()) throw ConfigError("config: '" + ctx + "' must be an array of numbers");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ConfigError("config: '" + ctx + "' must be an array of numbers");
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

Json adam_json(const AdamConfig& a) {
    return Json{{"step_size", a.step_size}, {"beta1", a.beta1}, {"beta2", a.beta2}, {"eps", a.eps}};
}

void adam_from(const Json& j, AdamConfig& a, const std::string& ctx) {
    check_keys(j, {"step_size", "beta1", "beta2", "eps"}, ctx);
    read(j, "step_size", a.step_size, ctx);
    read(j, "beta1", a.beta1, ctx);
    read(j, "beta2", a.beta2, ctx);
    read(j, "eps", a.eps, ctx);
}

Json activation_json(const Activation& a) { return Json{{"kind", to_string(a.kind)}, {"sharpness", a.sharpness}}; }

void activation_from(const Json& j, Activation& a, const std::string& ctx) {
    check_keys(j, {"kind", "sharpness"}, ctx);
    if (j.contains("kind")) {
        try {
            a.kind = activation_from_string(j.at("kind").get<std::string>());
        } catch (const nlohmann::json::exception&) {
            throw ConfigError("config: bad activation kind in '" + ctx + "'");
        }
    }
    read(j, "sharpness", a.sharpness, ctx);
}

const char* base_kind_name(BaseKind k) {
    switch (k) {
        case BaseKind::Gaussian: return "gaussian";
        case BaseKind::Mixture: return "mixture";
        case BaseKind::Ring: return "ring";
    }
    return "gaussian";
}

BaseKind base_kind_from(const std::string& s) {
    if (s == "gaussian") return BaseKind::Gaussian;
    if (s == "mixture") return BaseKind::Mixture;
    if (s == "ring") return BaseKind::Ring;
    throw ConfigError("config: unknown base measure kind '" + s + "'");
}

Json base_json(const BaseMeasureSpec& b) {
    Json centers = Json::array();
    for (Eigen::Index c = 0; c < b.centers.cols(); ++c) centers.push_back(vec_json(b.centers.col(c)));
    return Json{{"kind", base_kind_name(b.kind)}, {"mean", vec_json(b.mean)},      {"stddev", vec_json(b.stddev)},
                {"centers", centers},            {"radius", b.radius},          {"ring_width", b.ring_width}};
}

void base_from(const Json& j, BaseMeasureSpec& b, const std::string& ctx) {
    check_keys(j, {"kind", "mean", "stddev", "centers", "radius", "ring_width"}, ctx);
    std::string kind = base_kind_name(b.kind);
    read(j, "kind", kind, ctx);
    b.kind = base_kind_from(kind);
    if (j.contains("mean")) b.mean = vec_from(j["mean"], ctx + ".mean");
    if (j.contains("stddev")) b.stddev = vec_from(j["stddev"], ctx + ".stddev");
    if (j.contains("centers")) {
        const Json& c = j["centers"];
        if (!c.is_array()) throw ConfigError("config: '" + ctx + ".centers' must be a list of points");
        if (c.empty()) {
            b.centers = Matrix();
        } else {
            const Vector first = vec_from(c[0], ctx + ".centers");
            b.centers = Matrix(first.size(), static_cast<Eigen::Index>(c.size()));
            for (std::size_t k = 0; k < c.size(); ++k) {
                const Vector v = vec_from(c[k], ctx + ".centers");
                if (v.size() != first.size()) throw ConfigError("config: ragged '" + ctx + ".centers'");
                b.centers.col(static_cast<Eigen::Index>(k)) = v;
            }
        }
    }
    read(j, "radius", b.radius, ctx);
    read(j, "ring_width", b.ring_width, ctx);
}

}  // namespace

void RunConfig::validate() const {
    if (threads < 1) throw ConfigError("threads must be >= 1");
    if (subsample_n < 1) throw ConfigError("subsample_n must be >= 1");
    if (clouds_per_class < 1 || points_per_cloud < 1) throw ConfigError("synthetic sizes must be >= 1");
    if (deepsets_epochs < 0) throw ConfigError("deepsets_epochs must be >= 0");
    if (resamples < 1) throw ConfigError("resamples must be >= 1");
    synthetic.validate();
    solver.validate();
    schedule.validate();
    classifier.validate();
    deepsets.validate();
}

Json to_json(const RunConfig& c) {
    Json j;
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    j["data"] = Json{{"subsample_n", c.subsample_n},
                     {"clouds_per_class", c.clouds_per_class},
                     {"points_per_cloud", c.points_per_cloud}};
    const SyntheticSpec& s = c.synthetic;
    j["synthetic"] = Json{{"dim", s.dim},
                          {"base", Json::array({base_json(s.base[0]), base_json(s.base[1])})},
                          {"R", s.R},
                          {"shift_max", s.shift_max},
                          {"scale_min", s.scale_min},
                          {"scale_max", s.scale_max},
                          {"shear_max", s.shear_max},
                          {"fresh_samples", s.fresh_samples}};
    j["reference"] = to_string(c.reference);
    const SolverConfig& o = c.solver;
    j["solver"] = Json{{"batch_size", o.batch_size},
                       {"iterations", o.iterations},
                       {"adam", adam_json(o.adam)},
                       {"cycle_weight", o.cycle_weight},
                       {"widths", o.net.widths},
                       {"activation", activation_json(o.net.activation)},
                       {"beta_hat", o.beta_hat},
                       {"psi_quadratic", o.psi_quadratic}};
    const TrainSchedule& t = c.schedule;
    j["schedule"] = Json{{"ot_epochs_per_phase", t.ot_epochs_per_phase},
                         {"clf_epochs_per_phase", t.clf_epochs_per_phase},
                         {"total_epochs", t.total_epochs},
                         {"ot_iters_per_epoch", t.ot_iters_per_epoch},
                         {"patience", t.patience}};
    const ClassifierConfig& k = c.classifier;
    j["classifier"] = Json{{"hidden", k.hidden},
                           {"adam", adam_json(k.adam)},
                           {"steps_per_epoch", k.steps_per_epoch},
                           {"sample_size", k.sample_size},
                           {"threshold", k.threshold}};
    const DeepSetsConfig& d = c.deepsets;
    j["deepsets"] = Json{{"phi_hidden", d.phi_hidden},
                         {"pooled_dim", d.pooled_dim},
                         {"rho_hidden", d.rho_hidden},
                         {"adam", adam_json(d.adam)},
                         {"batch_clouds", d.batch_clouds},
                         {"points_per_cloud", d.points_per_cloud},
                         {"bagging_models", d.bagging_models},
                         {"epochs", c.deepsets_epochs}};
    j["resamples"] = c.resamples;
    return j;
}

RunConfig run_config_from_json(const Json& j) {
    RunConfig c;
    check_keys(j, {"seed", "threads", "data", "synthetic", "reference", "solver", "schedule", "classifier", "deepsets",
                   "resamples"},
               "<root>");
    read(j, "seed", c.seed, "<root>");
    read(j, "threads", c.threads, "<root>");
    read(j, "resamples", c.resamples, "<root>");
    if (j.contains("data")) {
        const Json& d = j["data"];
        check_keys(d, {"subsample_n", "clouds_per_class", "points_per_cloud"}, "data");
        read(d, "subsample_n", c.subsample_n, "data");
        read(d, "clouds_per_class", c.clouds_per_class, "data");
        read(d, "points_per_cloud", c.points_per_cloud, "data");
    }
    if (j.contains("synthetic")) {
        const Json& s = j["synthetic"];
        check_keys(s, {"dim", "base", "R", "shift_max", "scale_min", "scale_max", "shear_max", "fresh_samples"},
                   "synthetic");
        int dim = c.synthetic.dim;
        read(s, "dim", dim, "synthetic");
        if (dim < 1) throw ConfigError("config: synthetic.dim must be >= 1");
        // a new dim resets the base measures to the default pair in that dim
        if (dim != c.synthetic.dim) c.synthetic = SyntheticSpec::default_spec(dim);
        if (s.contains("base")) {
            const Json& b = s["base"];
            if (!b.is_array() || b.size() != 2) throw ConfigError("config: synthetic.base must list two measures");
            base_from(b[0], c.synthetic.base[0], "synthetic.base[0]");
            base_from(b[1], c.synthetic.base[1], "synthetic.base[1]");
        }
        read(s, "R", c.synthetic.R, "synthetic");
        read(s, "shift_max", c.synthetic.shift_max, "synthetic");
        read(s, "scale_min", c.synthetic.scale_min, "synthetic");
        read(s, "scale_max", c.synthetic.scale_max, "synthetic");
        read(s, "shear_max", c.synthetic.shear_max, "synthetic");
        read(s, "fresh_samples", c.synthetic.fresh_samples, "synthetic");
    }
    if (j.contains("reference")) {
        std::string r;
        read(j, "reference", r, "<root>");
        try {
            c.reference = reference_kind_from_string(r);
        } catch (const std::exception&) {
            throw ConfigError("config: unknown reference kind '" + r + "'");
        }
    }
    if (j.contains("solver")) {
        const Json& o = j["solver"];
        check_keys(o, {"batch_size", "iterations", "adam", "cycle_weight", "widths", "activation", "beta_hat",
                       "psi_quadratic"},
                   "solver");
        read(o, "batch_size", c.solver.batch_size, "solver");
        read(o, "iterations", c.solver.iterations, "solver");
        if (o.contains("adam")) adam_from(o["adam"], c.solver.adam, "solver.adam");
        read(o, "cycle_weight", c.solver.cycle_weight, "solver");
        read(o, "widths", c.solver.net.widths, "solver");
        if (o.contains("activation")) activation_from(o["activation"], c.solver.net.activation, "solver.activation");
        read(o, "beta_hat", c.solver.beta_hat, "solver");
        read(o, "psi_quadratic", c.solver.psi_quadratic, "solver");
    }
    if (j.contains("schedule")) {
        const Json& t = j["schedule"];
        check_keys(t, {"ot_epochs_per_phase", "clf_epochs_per_phase", "total_epochs", "ot_iters_per_epoch", "patience"},
                   "schedule");
        read(t, "ot_epochs_per_phase", c.schedule.ot_epochs_per_phase, "schedule");
        read(t, "clf_epochs_per_phase", c.schedule.clf_epochs_per_phase, "schedule");
        read(t, "total_epochs", c.schedule.total_epochs, "schedule");
        read(t, "ot_iters_per_epoch", c.schedule.ot_iters_per_epoch, "schedule");
        read(t, "patience", c.schedule.patience, "schedule");
    }
    if (j.contains("classifier")) {
        const Json& k = j["classifier"];
        check_keys(k, {"hidden", "adam", "steps_per_epoch", "sample_size", "threshold"}, "classifier");
        read(k, "hidden", c.classifier.hidden, "classifier");
        if (k.contains("adam")) adam_from(k["adam"], c.classifier.adam, "classifier.adam");
        read(k, "steps_per_epoch", c.classifier.steps_per_epoch, "classifier");
        read(k, "sample_size", c.classifier.sample_size, "classifier");
        read(k, "threshold", c.classifier.threshold, "classifier");
    }
    if (j.contains("deepsets")) {
        const Json& d = j["deepsets"];
        check_keys(d, {"phi_hidden", "pooled_dim", "rho_hidden", "adam", "batch_clouds", "points_per_cloud",
                       "bagging_models", "epochs"},
                   "deepsets");
        read(d, "phi_hidden", c.deepsets.phi_hidden, "deepsets");
        read(d, "pooled_dim", c.deepsets.pooled_dim, "deepsets");
        read(d, "rho_hidden", c.deepsets.rho_hidden, "deepsets");
        if (d.contains("adam")) adam_from(d["adam"], c.deepsets.adam, "deepsets.adam");
        read(d, "batch_clouds", c.deepsets.batch_clouds, "deepsets");
        read(d, "points_per_cloud", c.deepsets.points_per_cloud, "deepsets");
        read(d, "bagging_models", c.deepsets.bagging_models, "deepsets");
        read(d, "epochs", c.deepsets_epochs, "deepsets");
    }
    c.solver.seed = c.seed;
    c.validate();
    return c;
}

RunConfig load_run_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open config file " + file.string());
    Json j;
    try {
        j = Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config file " + file.string() + " is not valid JSON: " + e.what());
    }
    return run_config_from_json(j);
}

std::string config_hash(const RunConfig& cfg) {
    const std::string text = to_json(cfg).dump();
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(text)));
    return buf;
}

}  // namespace lotnet
