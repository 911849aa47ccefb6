#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lotnet/cli.hpp"
#include "lotnet/errors.hpp"

using namespace lotnet;

namespace {

struct Common {
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::string config;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--seed", c.seed, "Master seed (overrides the config file)");
    sub->add_option("--threads", c.threads,
                    "Worker threads (default 1). Any value > 1 voids bitwise determinism of the outputs")
        ->check(CLI::PositiveNumber);
    sub->add_option("--config", c.config, "JSON run configuration; missing keys keep their defaults")
        ->check(CLI::ExistingFile);
}

RunConfig resolve(const Common& c) {
    RunConfig cfg = c.config.empty() ? RunConfig{} : load_run_config(c.config);
    if (c.seed) cfg.seed = *c.seed;
    if (c.threads) cfg.threads = *c.threads;
    cfg.solver.seed = cfg.seed;
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lotnet: linearized optimal transport embeddings and point-cloud classification"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();
    app.set_version_flag("--version", kBuildVersion);

    Common c_gen, c_train, c_eval, c_dist, c_bound, c_base;

    auto* gen = app.add_subcommand("gen", "Write a synthetic two-class dataset in the CSV layout");
    add_common(gen, c_gen);
    std::string gen_out;
    std::optional<int> gen_clouds, gen_points;
    gen->add_option("--out", gen_out, "Output directory")->required();
    gen->add_option("--clouds-per-class", gen_clouds, "Clouds per class")->check(CLI::PositiveNumber);
    gen->add_option("--points", gen_points, "Points per cloud")->check(CLI::PositiveNumber);

    auto* train = app.add_subcommand("train", "Split the data, train maps and classifier, write bundle + history");
    add_common(train, c_train);
    std::string train_data, train_out;
    train->add_option("--data", train_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    train->add_option("--out", train_out, "Output directory")->required();

    auto* eval = app.add_subcommand("eval", "Embed held-out clouds and report metrics for k=1 and k resamples");
    add_common(eval, c_eval);
    std::string eval_bundle, eval_data, eval_out = ".", eval_subset = "test";
    std::optional<int> eval_k;
    eval->add_option("--bundle", eval_bundle, "Model bundle from train")->required()->check(CLI::ExistingFile);
    eval->add_option("--data", eval_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    eval->add_option("--resamples,-k", eval_k, "Reference resamples to average (default from the bundle config)")
        ->check(CLI::PositiveNumber);
    eval->add_option("--subset", eval_subset, "Clouds to evaluate")
        ->check(CLI::IsMember({"test", "train", "val", "all"}));
    eval->add_option("--out", eval_out, "Output directory for metrics.csv and predictions.csv");

    auto* dist = app.add_subcommand("dist", "Pairwise LOT distances between the bundle's embedded clouds");
    add_common(dist, c_dist);
    std::string dist_bundle, dist_out = "distances.csv";
    dist->add_option("--bundle", dist_bundle, "Model bundle from train")->required()->check(CLI::ExistingFile);
    dist->add_option("--out", dist_out, "Output CSV file");

    auto* bound = app.add_subcommand("bound", "Evaluate the finite-sample LOT distance error bound");
    add_common(bound, c_bound);
    BoundParams bp;
    bound->add_option("--beta", bp.beta, "Lipschitz constant of the reference-to-base map")->capture_default_str();
    bound->add_option("--eps", bp.eps, "ICNN approximation level")->capture_default_str();
    bound->add_option("--R", bp.R, "Bound on transform norms")->capture_default_str();
    bound->add_option("--n", bp.n, "Reference sample size")->capture_default_str();
    bound->add_option("--delta", bp.delta, "Failure probability")->capture_default_str();

    auto* base = app.add_subcommand("baseline", "Train the DeepSets baseline and its bagging ensemble");
    add_common(base, c_base);
    std::string base_data, base_out;
    base->add_option("--data", base_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    base->add_option("--out", base_out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (gen->parsed()) {
            RunConfig cfg = resolve(c_gen);
            if (gen_clouds) cfg.clouds_per_class = *gen_clouds;
            if (gen_points) cfg.points_per_cloud = *gen_points;
            cmd_gen(cfg, gen_out, std::cout);
        } else if (train->parsed()) {
            cmd_train(resolve(c_train), train_data, train_out, std::cout);
        } else if (eval->parsed()) {
            if (!c_eval.config.empty()) throw ConfigError("eval takes its configuration from the bundle; drop --config");
            const int k = eval_k.value_or(load_bundle(eval_bundle).config.resamples);
            cmd_eval(eval_bundle, eval_data, k, eval_subset_from_string(eval_subset), eval_out, std::cout,
                     c_eval.threads.value_or(1), c_eval.seed);
        } else if (dist->parsed()) {
            if (!c_dist.config.empty()) throw ConfigError("dist takes its configuration from the bundle; drop --config");
            cmd_dist(dist_bundle, dist_out, std::cout, c_dist.seed);
        } else if (bound->parsed()) {
            cmd_bound(bp, std::cout);
        } else if (base->parsed()) {
            cmd_baseline(resolve(c_base), base_data, base_out, std::cout);
        }
    } catch (const ConfigError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitOk;
}
