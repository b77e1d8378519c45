#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "slac/analysis.hpp"
#include "slac/triplets.hpp"

namespace slac::synth {

// Per-regime, per-variable mean/std plus an AR(1) smoothness coefficient.
struct RegimeSpec {
    std::vector<std::vector<double>> means;  // R x F
    std::vector<std::vector<double>> stds;   // R x F
    double phi = 0.8;                        // in [0,1)

    std::size_t n_regimes() const { return means.size(); }
    std::size_t n_variables() const { return means.empty() ? 0 : means[0].size(); }
    void validate() const;
};

// Three regimes over the default eight-variable catalog, loosely shaped like
// intracranial-hypertension / respiratory-distress / stable profiles. The
// numbers are generator conventions, not measurements.
RegimeSpec default_regimes();

enum class PlanKind { fixed, random, event_driven };

struct GenConfig {
    std::size_t n_records = 24;
    std::size_t windows_per_record = 25;
    PlanKind plan = PlanKind::event_driven;
    double missing_rate = 0.0;       // in [0,1)
    double jitter_s = 2.0;           // uniform offset added to each nominal time
    double base_interval_s = 10.0;   // nominal sampling interval
    double window_len_s = 1800.0;
    double event_switch_prob = 0.15; // event-driven plan: P(switch) per boundary
    std::uint64_t seed = 0;          // mandatory; all draws derive from it

    void validate() const;
};

struct GroundTruth {
    std::vector<std::vector<std::size_t>> regimes;            // per record, per window
    std::vector<analysis::EventAnnotation> events;            // one per regime change
};

struct SynthData {
    std::vector<data::TimeSeriesRecord> records;
    GroundTruth truth;
};

// Seeded regime-switching generator: per window and variable an AR(1)
// trajectory around the regime mean sampled at jittered ~10 s intervals,
// each observation independently dropped with probability missing_rate.
SynthData generate(const GenConfig& config, const RegimeSpec& regimes);

// Chance-corrected agreement between two labelings of the same items.
double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b);

// Ground-truth regimes flattened in the same (record, window) order that
// make_samples produces for fully observed records.
std::vector<std::size_t> flatten_truth(const GroundTruth& truth);

void write_triplets_csv(const std::string& path, std::span<const data::TimeSeriesRecord> records,
                        const data::VariableCatalog& catalog);
void write_ground_truth_csv(const std::string& path,
                            std::span<const data::TimeSeriesRecord> records,
                            const GroundTruth& truth);
void write_annotations_csv(const std::string& path,
                           std::span<const analysis::EventAnnotation> annotations);

}  // namespace slac::synth
