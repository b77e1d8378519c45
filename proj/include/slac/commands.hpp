#pragma once

#include <string>

#include "slac/runconfig.hpp"

namespace slac::cli {

// Pipeline stages behind the CLI subcommands. Each writes its outputs under
// paths.out_dir and a run_meta.json sidecar (the only file with a timestamp).
// Errors surface as exceptions; the CLI maps them to exit codes.

// data.csv + ground_truth.csv + annotations.csv + catalog.json
void cmd_synth(const RunConfig& cfg);

// checkpoint.json + pretrain_log.csv
void cmd_pretrain(const RunConfig& cfg);

// assignments.csv + iteration_log.csv + representations.csv + final_checkpoint.json
void cmd_cluster(const RunConfig& cfg, bool from_random);

// k_sweep.csv over the representations written by cluster
void cmd_metrics(const RunConfig& cfg);

// timeline.csv + frequency.csv + transitions.csv + profile.json
void cmd_report(const RunConfig& cfg);

// Resolved checkpoint path (paths.checkpoint or <out_dir>/checkpoint.json).
std::string checkpoint_path(const RunConfig& cfg);

}  // namespace slac::cli
