#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "slac/encoder.hpp"
#include "slac/slac_loop.hpp"
#include "slac/synth.hpp"
#include "slac/train.hpp"

namespace slac::cli {

struct Paths {
    std::string data;           // triplet CSV
    std::string catalog;        // JSON list of variable names; default vitals when empty
    std::string annotations;    // optional event CSV
    std::string out_dir = "out";
    std::string checkpoint;     // defaults to <out_dir>/checkpoint.json
    std::string pretrain_data;  // optional separate self-supervision corpus
};

// One strict config file: unknown keys are rejected so a typo cannot
// silently fall back to a default mid-run.
struct RunConfig {
    std::uint64_t seed = 42;
    Paths paths;
    model::EncoderConfig encoder;
    train::TrainConfig pretrain;
    train::SlacConfig slac;
    std::vector<std::size_t> k_sweep = {3, 4, 5};
    synth::GenConfig synth;
    std::optional<synth::RegimeSpec> regimes;  // default profile when absent
    std::vector<std::string> state_names;      // optional display names

    // Root seed fan-out into the per-component configs.
    void apply_seed();
};

RunConfig load_config(const std::string& path);
RunConfig default_config();

}  // namespace slac::cli
