#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "slac/commands.hpp"
#include "slac/error.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitPrecondition = 3;

slac::cli::RunConfig make_config(const std::string& config_path, bool seed_set,
                                 std::uint64_t seed, const std::string& out_dir,
                                 bool k_set, std::size_t k) {
    slac::cli::RunConfig cfg = config_path.empty() ? slac::cli::default_config()
                                                   : slac::cli::load_config(config_path);
    if (seed_set) cfg.seed = seed;
    if (!out_dir.empty()) cfg.paths.out_dir = out_dir;
    if (k_set) cfg.slac.k = k;
    cfg.apply_seed();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Self-supervised clustering of sparse, irregularly sampled "
                 "multivariate clinical time series"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::size_t k = 0;
    bool k_set = false;
    bool from_random = false;

    app.add_option("--config", config_path, "Run configuration JSON file")->expected(1);
    auto* seed_opt = app.add_option("--seed", seed, "Root seed override");
    auto* out_opt = app.add_option("--out", out_dir, "Output directory override");

    CLI::App* synth = app.add_subcommand("synth", "Generate a labeled synthetic dataset");
    CLI::App* pretrain = app.add_subcommand("pretrain", "Self-supervised forecast pretraining");
    CLI::App* cluster = app.add_subcommand("cluster", "Alternating K-means / classifier training");
    auto* k_opt = cluster->add_option("--k", k, "Number of clusters override");
    cluster->add_flag("--from-random", from_random,
                      "Start from a random encoder instead of a checkpoint");
    CLI::App* metrics = app.add_subcommand("metrics", "Validity-index sweep over k");
    CLI::App* report = app.add_subcommand("report", "Timelines, frequencies, transitions, profiles");

    CLI11_PARSE(app, argc, argv);
    seed_set = seed_opt->count() > 0;
    k_set = k_opt->count() > 0;
    (void)out_opt;

    try {
        slac::cli::RunConfig cfg = make_config(config_path, seed_set, seed, out_dir, k_set, k);
        if (synth->parsed()) slac::cli::cmd_synth(cfg);
        if (pretrain->parsed()) slac::cli::cmd_pretrain(cfg);
        if (cluster->parsed()) slac::cli::cmd_cluster(cfg, from_random);
        if (metrics->parsed()) slac::cli::cmd_metrics(cfg);
        if (report->parsed()) slac::cli::cmd_report(cfg);
        return kExitOk;
    } catch (const slac::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const slac::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const slac::PreconditionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPrecondition;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
