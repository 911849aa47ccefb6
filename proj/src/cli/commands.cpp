#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "lotnet/cli.hpp"
#include "lotnet/errors.hpp"

namespace lotnet {

namespace {

namespace fs = std::filesystem;

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string fmt_short(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.4f", x);
    return buf;
}

std::ofstream open_out(const fs::path& file) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary);
    if (!out) throw DataError("cannot write " + file.string());
    return out;
}

void require_two_classes(const LabeledDataset& ds) {
    bool pos = false, neg = false;
    for (int y : ds.labels) (y == 1 ? pos : neg) = true;
    if (!pos || !neg) throw DataError("dataset has only one class; need both labels 0 and 1");
}

ReferenceMeasure make_reference(const RunConfig& cfg, const LabeledDataset& train) {
    const std::uint64_t seed = mix_seed(cfg.seed, 11);
    switch (cfg.reference) {
        case ReferenceKind::StandardGaussian: return ReferenceMeasure::standard_gaussian(train.dim, seed);
        case ReferenceKind::FittedGaussian: return ReferenceMeasure::fitted_gaussian(train.clouds, seed);
        case ReferenceKind::UniformBox: {
            // same mean and per-axis variance as the fitted Gaussian
            const ReferenceMeasure g = ReferenceMeasure::fitted_gaussian(train.clouds, seed);
            return ReferenceMeasure::uniform_box(g.mean, std::sqrt(3.0) * g.scale, seed);
        }
    }
    throw ConfigError("unknown reference kind");
}

std::vector<std::string> ids_of(const LabeledDataset& ds) {
    std::vector<std::string> ids;
    for (const auto& c : ds.clouds) ids.push_back(c.id);
    return ids;
}

const char* metrics_columns = "tp,fp,fn,tn,precision,recall,accuracy,precision_defined,recall_defined";

std::string metrics_row(const Metrics& m) {
    std::ostringstream s;
    s << m.tp << ',' << m.fp << ',' << m.fn << ',' << m.tn << ',' << fmt(m.precision) << ',' << fmt(m.recall) << ','
      << fmt(m.accuracy) << ',' << (m.precision_defined ? 1 : 0) << ',' << (m.recall_defined ? 1 : 0);
    return s.str();
}

std::string metrics_summary(const Metrics& m) {
    std::string s = "accuracy=" + fmt_short(m.accuracy) + " precision=" + fmt_short(m.precision);
    if (!m.precision_defined) s += "(undefined)";
    s += " recall=" + fmt_short(m.recall);
    if (!m.recall_defined) s += "(undefined)";
    s += " n=" + std::to_string(m.total());
    return s;
}

std::string history_csv(const RunConfig& cfg, const std::vector<PhaseRecord>& history) {
    std::ostringstream s;
    s << report_header(cfg);
    s << "phase,epoch,ot_loss,clf_loss,train_accuracy,val_accuracy,val_loss\n";
    for (const auto& h : history)
        s << h.phase << ',' << h.epoch << ',' << fmt(h.ot_loss) << ',' << fmt(h.clf_loss) << ','
          << fmt(h.train_accuracy) << ',' << fmt(h.val_accuracy) << ',' << fmt(h.val_loss) << '\n';
    return s.str();
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace

std::string report_header(const RunConfig& cfg) {
    std::ostringstream s;
    s << "# lotnet_version=" << kBuildVersion << '\n';
    s << "# config_hash=" << config_hash(cfg) << '\n';
    s << "# seed=" << cfg.seed << '\n';
    s << "# config=" << to_json(cfg).dump() << '\n';
    return s.str();
}

void cmd_gen(const RunConfig& cfg, const fs::path& out_dir, std::ostream& log) {
    cfg.validate();
    const LabeledDataset ds = gen_synthetic(cfg.synthetic, cfg.clouds_per_class, cfg.points_per_cloud, cfg.seed);
    fs::create_directories(out_dir);
    write_csv_dir(ds, out_dir);
    Json manifest;
    manifest["build_version"] = kBuildVersion;
    manifest["config_hash"] = config_hash(cfg);
    manifest["seed"] = cfg.seed;
    manifest["clouds_per_class"] = cfg.clouds_per_class;
    manifest["points_per_cloud"] = cfg.points_per_cloud;
    manifest["synthetic"] = to_json(cfg).at("synthetic");
    Json transforms = Json::array();
    for (const auto& c : ds.clouds) {
        Json meta = Json::object();
        for (const auto& [k, v] : c.meta) meta[k] = v;
        transforms.push_back(Json{{"id", c.id}, {"meta", meta}});
    }
    manifest["clouds"] = transforms;
    auto out = open_out(out_dir / "manifest.json");
    out << manifest.dump(1) << '\n';
    log << "wrote " << ds.size() << " clouds (" << cfg.points_per_cloud << " points, dim " << ds.dim << ") to "
        << out_dir.string() << '\n';
}

TrainOutcome cmd_train(const RunConfig& cfg_in, const fs::path& data_dir, const fs::path& out_dir, std::ostream& log) {
    RunConfig cfg = cfg_in;
    cfg.solver.seed = cfg.seed;
    cfg.validate();
    const LabeledDataset ds = load_csv_dir(data_dir, cfg.subsample_n, cfg.seed);
    require_two_classes(ds);
    const DataSplit sp = split(ds, cfg.seed);
    log << "split: train " << sp.train.size() << ", val " << sp.val.size() << ", test " << sp.test.size() << '\n';
    const ReferenceMeasure reference = make_reference(cfg, sp.train);

    AlternatingResult res = train_alternating(sp.train, sp.val, reference, cfg.schedule, cfg.solver, cfg.classifier,
                                              cfg.seed, cfg.threads);

    TrainOutcome outcome;
    outcome.history = res.history;
    const std::string hist = history_csv(cfg, res.history);

    ModelBundle& b = outcome.bundle;
    b.config = cfg;
    b.reference = reference;
    b.ids = res.embedding.ids;
    b.pairs = res.embedding.pairs;
    b.train_count = res.train_count;
    b.sample_seed = res.embedding.sample_seed;
    b.sample_size = static_cast<int>(res.embedding.sample.size());
    b.ot_iterations = res.ot_iterations;
    b.classifier = res.model;
    b.split_train = ids_of(sp.train);
    b.split_val = ids_of(sp.val);
    b.split_test = ids_of(sp.test);
    b.history_digest = hex64(fnv1a64(hist));

    fs::create_directories(out_dir);
    {
        auto out = open_out(out_dir / "history.csv");
        out << hist;
    }
    save_bundle(b, out_dir / "bundle.json");

    std::vector<double> probs;
    for (std::size_t i = 0; i < sp.val.size(); ++i)
        probs.push_back(score(res.model, res.embedding.pairs[res.train_count + i], res.embedding.sample));
    if (!probs.empty()) outcome.validation = evaluate(probs, sp.val.labels, res.model.threshold);

    log << "trained " << res.history.size() << " phases, selected phase " << res.best_phase << " ("
        << res.ot_iterations << " solver steps per map)\n";
    if (sp.val.size() == 0)
        log << "validation: no clouds\n";
    else
        log << "validation: " << metrics_summary(outcome.validation) << '\n';
    log << "wrote " << (out_dir / "bundle.json").string() << " and " << (out_dir / "history.csv").string() << '\n';
    return outcome;
}

EvalSubset eval_subset_from_string(const std::string& s) {
    if (s == "test") return EvalSubset::Test;
    if (s == "train") return EvalSubset::Train;
    if (s == "val") return EvalSubset::Val;
    if (s == "all") return EvalSubset::All;
    throw ConfigError("unknown subset '" + s + "' (expected test, train, val or all)");
}

EvalOutcome cmd_eval(const fs::path& bundle_file, const fs::path& data_dir, int resamples, EvalSubset subset,
                     const fs::path& out_dir, std::ostream& log, int threads, std::optional<std::uint64_t> seed) {
    if (resamples < 1) throw ConfigError("resamples must be >= 1");
    if (threads < 1) throw ConfigError("threads must be >= 1");
    const ModelBundle b = load_bundle(bundle_file);
    const RunConfig& cfg = b.config;
    const std::uint64_t eval_seed = seed.value_or(cfg.seed);
    const LabeledDataset ds = load_csv_dir(data_dir, cfg.subsample_n, cfg.seed);
    if (ds.dim != b.reference.dim)
        throw DimensionError("data dim " + std::to_string(ds.dim) + " does not match the bundle dim " +
                             std::to_string(b.reference.dim));

    std::vector<std::string> wanted;
    auto add = [&](const std::vector<std::string>& v) { wanted.insert(wanted.end(), v.begin(), v.end()); };
    if (subset == EvalSubset::Train || subset == EvalSubset::All) add(b.split_train);
    if (subset == EvalSubset::Val || subset == EvalSubset::All) add(b.split_val);
    if (subset == EvalSubset::Test || subset == EvalSubset::All) add(b.split_test);
    if (wanted.empty()) throw DataError("no clouds in the requested subset");

    std::map<std::string, std::size_t> by_id;
    for (std::size_t i = 0; i < ds.size(); ++i) by_id[ds.clouds[i].id] = i;
    std::map<std::string, std::size_t> stored;
    for (std::size_t i = 0; i < b.ids.size(); ++i) stored[b.ids[i]] = i;

    EvalOutcome r;
    r.ids = wanted;
    r.single.assign(wanted.size(), 0.0);
    r.resampled.assign(wanted.size(), 0.0);
    std::vector<std::size_t> idx(wanted.size());
    for (std::size_t i = 0; i < wanted.size(); ++i) {
        auto it = by_id.find(wanted[i]);
        if (it == by_id.end()) throw DataError("cloud '" + wanted[i] + "' from the bundle split is missing in the data");
        idx[i] = it->second;
        r.labels.push_back(ds.labels[it->second]);
    }

    parallel_for(wanted.size(), threads, [&](std::size_t i) {
        const PointCloud& cloud = ds.clouds[idx[i]];
        const std::uint64_t id_hash = fnv1a64(cloud.id);
        DualPair pair;
        if (auto it = stored.find(cloud.id); it != stored.end()) {
            pair = b.pairs[it->second];
        } else {
            SolverConfig sc = cfg.solver;
            sc.iterations = b.ot_iterations;
            sc.seed = mix_seed(eval_seed, id_hash);
            pair = embed_test_cloud(b.reference, cloud, sc);
        }
        const std::uint64_t s = mix_seed(mix_seed(eval_seed, 606), id_hash);
        r.single[i] = predict_resampled(b.classifier, pair, b.reference, b.sample_size, 1, s);
        r.resampled[i] = predict_resampled(b.classifier, pair, b.reference, b.sample_size, resamples, s);
    });
    r.metrics_single = evaluate(r.single, r.labels, b.classifier.threshold);
    r.metrics_resampled = evaluate(r.resampled, r.labels, b.classifier.threshold);

    fs::create_directories(out_dir);
    {
        auto out = open_out(out_dir / "metrics.csv");
        out << report_header(cfg) << "# eval_seed=" << eval_seed << "\n# bundle_history_digest=" << b.history_digest
            << '\n';
        out << "k," << metrics_columns << '\n';
        out << 1 << ',' << metrics_row(r.metrics_single) << '\n';
        out << resamples << ',' << metrics_row(r.metrics_resampled) << '\n';
    }
    {
        auto out = open_out(out_dir / "predictions.csv");
        out << report_header(cfg);
        out << "id,label,p_k1,p_k" << resamples << '\n';
        for (std::size_t i = 0; i < wanted.size(); ++i)
            out << wanted[i] << ',' << r.labels[i] << ',' << fmt(r.single[i]) << ',' << fmt(r.resampled[i]) << '\n';
    }
    log << "k=1: " << metrics_summary(r.metrics_single) << '\n';
    log << "k=" << resamples << ": " << metrics_summary(r.metrics_resampled) << '\n';
    return r;
}

Matrix cmd_dist(const fs::path& bundle_file, const fs::path& out_csv, std::ostream& log,
                std::optional<std::uint64_t> sample_seed) {
    ModelBundle b = load_bundle(bundle_file);
    if (sample_seed) b.sample_seed = *sample_seed;
    const Matrix D = pairwise_matrix(b.embedding());
    auto out = open_out(out_csv);
    out << report_header(b.config) << "# sample_seed=" << b.sample_seed << '\n';
    write_pairwise_csv(out, D, b.ids);
    log << "wrote " << D.rows() << "x" << D.cols() << " distance matrix to " << out_csv.string() << '\n';
    return D;
}

double cmd_bound(const BoundParams& p, std::ostream& log) {
    const double v = theorem_bound(p);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    log << "bound=" << buf << " (beta=" << p.beta << " eps=" << p.eps << " R=" << p.R << " n=" << p.n
        << " delta=" << p.delta << ")\n";
    return v;
}

BaselineOutcome cmd_baseline(const RunConfig& cfg, const fs::path& data_dir, const fs::path& out_dir,
                             std::ostream& log) {
    cfg.validate();
    const LabeledDataset ds = load_csv_dir(data_dir, cfg.subsample_n, cfg.seed);
    require_two_classes(ds);
    const DataSplit sp = split(ds, cfg.seed);
    if (sp.test.size() == 0) throw DataError("split left no test clouds");

    const std::vector<DeepSetsTrained> members =
        ds_train_bagging(sp.train, sp.val, cfg.deepsets_epochs, cfg.deepsets, cfg.seed, cfg.threads);
    std::vector<DeepSetsModel> models;
    for (const auto& m : members) models.push_back(m.model);

    std::vector<double> p_single, p_bag;
    for (const auto& c : sp.test.clouds) {
        p_single.push_back(ds_forward(models.front(), c));
        p_bag.push_back(ds_bagging(models, c));
    }
    BaselineOutcome r{evaluate(p_single, sp.test.labels), evaluate(p_bag, sp.test.labels), models};

    fs::create_directories(out_dir);
    {
        auto out = open_out(out_dir / "baseline_metrics.csv");
        out << report_header(cfg);
        out << "model," << metrics_columns << '\n';
        out << "deepsets," << metrics_row(r.single) << '\n';
        out << "deepsets_bagging_" << models.size() << ',' << metrics_row(r.bagging) << '\n';
    }
    {
        auto out = open_out(out_dir / "baseline_history.csv");
        out << report_header(cfg);
        out << "member,epoch,train_loss,val_accuracy,val_loss\n";
        for (std::size_t m = 0; m < members.size(); ++m)
            for (const auto& e : members[m].history)
                out << m << ',' << e.epoch << ',' << fmt(e.train_loss) << ',' << fmt(e.val_accuracy) << ','
                    << fmt(e.val_loss) << '\n';
    }
    {
        Json j;
        j["format_version"] = kBundleFormat;
        j["config_hash"] = config_hash(cfg);
        Json arr = Json::array();
        for (const auto& m : models) arr.push_back(Json{{"phi", mlp_to_json(m.phi)}, {"rho", mlp_to_json(m.rho)}});
        j["deepsets"] = arr;
        auto out = open_out(out_dir / "baseline_models.json");
        out << j.dump(1) << '\n';
    }
    log << "deepsets: " << metrics_summary(r.single) << '\n';
    log << "bagging x" << models.size() << ": " << metrics_summary(r.bagging) << '\n';
    return r;
}

}  // namespace lotnet
