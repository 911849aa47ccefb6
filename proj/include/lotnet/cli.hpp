#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lotnet/classify.hpp"
#include "lotnet/data.hpp"
#include "lotnet/deepsets.hpp"
#include "lotnet/lot.hpp"
#include "lotnet/otsolve.hpp"

namespace lotnet {

inline constexpr const char* kBuildVersion = "0.3.0";
inline constexpr const char* kBundleFormat = "lotnet-bundle/1";

using Json = nlohmann::ordered_json;

/// Every tunable of the pipeline. Missing JSON keys keep their defaults.
struct RunConfig {
    std::uint64_t seed = 0;
    int threads = 1;

    // data
    int subsample_n = 1000;
    int clouds_per_class = 30;
    int points_per_cloud = 1000;
    SyntheticSpec synthetic = SyntheticSpec::default_spec();

    ReferenceKind reference = ReferenceKind::FittedGaussian;
    SolverConfig solver{};
    TrainSchedule schedule{};
    ClassifierConfig classifier{};
    DeepSetsConfig deepsets{};
    int deepsets_epochs = 1000;
    int resamples = 10;

    void validate() const;
};

Json to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const Json& j);
RunConfig load_run_config(const std::filesystem::path& file);
/// FNV-1a of the compact JSON dump, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

// ---------------------------------------------------------------------------
// Bit-exact array encoding

/// Each double as 16 hex digits of its IEEE-754 bit pattern, concatenated.
std::string encode_doubles(const double* data, std::size_t n);
std::vector<double> decode_doubles(const std::string& hex);
Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);

Json icnn_to_json(const Icnn& net);
Icnn icnn_from_json(const Json& j);
Json mlp_to_json(const Mlp& net);
Mlp mlp_from_json(const Json& j);
Json reference_to_json(const ReferenceMeasure& r);
ReferenceMeasure reference_from_json(const Json& j);

// ---------------------------------------------------------------------------

struct ModelBundle {
    std::string format_version = kBundleFormat;
    RunConfig config;
    ReferenceMeasure reference;
    std::vector<std::string> ids;     // one per DualPair: training clouds, then validation clouds
    std::vector<DualPair> pairs;
    std::size_t train_count = 0;
    std::uint64_t sample_seed = 0;    // shared evaluation sample
    int sample_size = 1000;
    std::int64_t ot_iterations = 0;   // solver steps per map at the selected snapshot
    ClassifierModel classifier;
    std::vector<DeepSetsModel> deepsets;
    std::vector<std::string> split_train, split_val, split_test;
    std::string history_digest;

    EmbeddingSet embedding() const;
};

Json bundle_to_json(const ModelBundle& b);
ModelBundle bundle_from_json(const Json& j);
void save_bundle(const ModelBundle& b, const std::filesystem::path& file);
/// Throws FormatError on unreadable files or an unknown format version.
ModelBundle load_bundle(const std::filesystem::path& file);

// ---------------------------------------------------------------------------
// Commands. Each writes its artifacts under `out_dir` and a human summary to `log`.

/// Header comment lines ("# key=value") carried by every emitted CSV report.
std::string report_header(const RunConfig& cfg);

void cmd_gen(const RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);

struct TrainOutcome {
    ModelBundle bundle;
    std::vector<PhaseRecord> history;
    Metrics validation;
};
TrainOutcome cmd_train(const RunConfig& cfg, const std::filesystem::path& data_dir,
                       const std::filesystem::path& out_dir, std::ostream& log);

/// Training and validation clouds reuse their stored maps; other clouds are
/// embedded with the bundle's solver budget. `seed` defaults to the bundle's.
enum class EvalSubset { Test, Train, Val, All };
EvalSubset eval_subset_from_string(const std::string& s);

struct EvalOutcome {
    std::vector<std::string> ids;
    std::vector<int> labels;
    std::vector<double> single;     // k = 1
    std::vector<double> resampled;  // k = resamples
    Metrics metrics_single;
    Metrics metrics_resampled;
};
EvalOutcome cmd_eval(const std::filesystem::path& bundle_file, const std::filesystem::path& data_dir, int resamples,
                     EvalSubset subset, const std::filesystem::path& out_dir, std::ostream& log, int threads = 1,
                     std::optional<std::uint64_t> seed = std::nullopt);

/// `sample_seed` replaces the bundle's shared reference sample when given.
Matrix cmd_dist(const std::filesystem::path& bundle_file, const std::filesystem::path& out_csv, std::ostream& log,
                std::optional<std::uint64_t> sample_seed = std::nullopt);

double cmd_bound(const BoundParams& p, std::ostream& log);

struct BaselineOutcome {
    Metrics single;
    Metrics bagging;
    std::vector<DeepSetsModel> models;
};
BaselineOutcome cmd_baseline(const RunConfig& cfg, const std::filesystem::path& data_dir,
                             const std::filesystem::path& out_dir, std::ostream& log);

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

}  // namespace lotnet
