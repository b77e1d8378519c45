#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "slac/error.hpp"
#include "slac/runconfig.hpp"

using namespace slac;
using namespace slac::cli;

namespace {

std::string write_config(const char* name, const std::string& body) {
    auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path);
    out << body;
    out.close();
    return path.string();
}

}  // namespace

TEST_CASE("a full config parses with overrides applied") {
    auto path = write_config("cfg_ok.json", R"({
        "seed": 7,
        "paths": {"data": "d.csv", "out_dir": "outdir"},
        "encoder": {"d": 16, "n_heads": 4, "max_triplets": 128},
        "pretrain": {"max_epochs": 50},
        "slac": {"k": 4, "outer_iterations": 5},
        "k_sweep": [3, 4],
        "synth": {"n_records": 2, "plan": "fixed", "missing_rate": 0.1}
    })");
    RunConfig cfg = load_config(path);
    CHECK(cfg.seed == 7);
    CHECK(cfg.paths.data == "d.csv");
    CHECK(cfg.paths.out_dir == "outdir");
    CHECK(cfg.encoder.d == 16);
    CHECK(cfg.encoder.n_blocks == 2);  // default retained
    CHECK(cfg.pretrain.max_epochs == 50);
    CHECK(cfg.slac.k == 4);
    CHECK(cfg.k_sweep == std::vector<std::size_t>{3, 4});
    CHECK(cfg.synth.plan == synth::PlanKind::fixed);
    // root seed fans out
    CHECK(cfg.pretrain.seed == 7);
    CHECK(cfg.slac.seed == 7);
    CHECK(cfg.synth.seed == 7);
}

TEST_CASE("unknown keys are rejected at every level") {
    auto top = write_config("cfg_bad_top.json", R"({"sede": 7})");
    CHECK_THROWS_WITH_AS(load_config(top), doctest::Contains("sede"), ConfigError);

    auto nested = write_config("cfg_bad_nested.json", R"({"encoder": {"dd": 16}})");
    CHECK_THROWS_WITH_AS(load_config(nested), doctest::Contains("dd"), ConfigError);

    auto slac_key = write_config("cfg_bad_slac.json", R"({"slac": {"epochs": 10}})");
    CHECK_THROWS_AS(load_config(slac_key), ConfigError);
}

TEST_CASE("bad JSON and bad values are config errors") {
    auto broken = write_config("cfg_broken.json", "{");
    CHECK_THROWS_AS(load_config(broken), ConfigError);

    auto bad_plan = write_config("cfg_bad_plan.json", R"({"synth": {"plan": "sometimes"}})");
    CHECK_THROWS_AS(load_config(bad_plan), ConfigError);

    auto bad_type = write_config("cfg_bad_type.json", R"({"seed": "abc"})");
    CHECK_THROWS_AS(load_config(bad_type), ConfigError);
}

TEST_CASE("missing config file is a config error") {
    CHECK_THROWS_AS(load_config("/nonexistent/cfg.json"), ConfigError);
}

TEST_CASE("custom regimes validate") {
    auto path = write_config("cfg_regimes.json", R"({
        "regimes": {"means": [[0, 0], [5, 5]], "stds": [[1, 1], [1, 1]], "phi": 0.5}
    })");
    RunConfig cfg = load_config(path);
    REQUIRE(cfg.regimes.has_value());
    CHECK(cfg.regimes->n_regimes() == 2);
    CHECK(cfg.regimes->phi == 0.5);

    auto bad = write_config("cfg_regimes_bad.json", R"({
        "regimes": {"means": [[0, 0]], "stds": [[1, 1]], "phi": 0.5}
    })");
    CHECK_THROWS_AS(load_config(bad), ConfigError);
}
