#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slac/metrics.hpp"
#include "slac/triplets.hpp"

namespace slac::analysis {

struct TimelinePoint {
    std::size_t window_index = 0;
    double start = 0.0;
    std::size_t state = 0;
};

// Chronological state sequence of one record.
struct StateTimeline {
    std::string record_id;
    std::vector<TimelinePoint> points;  // strictly increasing window indices
};

struct FrequencyRow {
    std::string record_id;
    std::vector<std::size_t> counts;  // per state
    std::vector<double> percentages;  // per state, of this record's windows
    std::size_t total = 0;
};

struct FrequencyTable {
    std::size_t k = 0;
    std::vector<FrequencyRow> rows;
    FrequencyRow totals;
};

struct EventAnnotation {
    std::string record_id;
    double time = 0.0;
    std::string description;
};

struct TransitionEvent {
    std::string record_id;
    std::size_t window_index = 0;  // window where the new state begins
    double window_start = 0.0;
    std::size_t from_state = 0;
    std::size_t to_state = 0;
    std::optional<std::size_t> event_index;  // into the annotation list
    double gap_seconds = 0.0;                // signed: event time - window start
};

struct StateStats {
    double mean = 0.0;
    double median = 0.0;
    std::size_t count = 0;
};

struct VariableProfile {
    std::vector<StateStats> per_state;  // k entries
    bool kw_skipped = false;            // variable observed in < 2 states
    metrics::KruskalResult kw;
    bool distinctive = false;  // p < 0.05
};

struct FeatureProfile {
    std::size_t k = 0;
    std::vector<VariableProfile> variables;  // indexed by variable id
};

// Groups samples by record, ordered by window index; one timeline per record,
// records sorted by id. Throws when a sample lacks an assignment.
std::vector<StateTimeline> build_timeline(std::span<const data::Sample> samples,
                                          const std::vector<std::size_t>& assignments);

// Per-record counts and percentages plus a totals row.
FrequencyTable state_frequencies(std::span<const StateTimeline> timelines, std::size_t k);

// One event per adjacent pair of differing states.
std::vector<TransitionEvent> transitions(const StateTimeline& timeline);

// Links each transition to the nearest same-record annotation within the
// tolerance of its window start; ties break to the earlier event.
void overlay_events(std::vector<TransitionEvent>& transitions,
                    std::span<const EventAnnotation> annotations, double tolerance = 1800.0);

// Pools per-sample means of each variable by state and tests each variable
// across states with Kruskal-Wallis; p < 0.05 marks a variable distinctive.
FeatureProfile feature_profile(std::span<const data::Sample> samples,
                               const std::vector<std::size_t>& assignments, std::size_t k,
                               std::size_t n_variables);

// Table-style cell: "45 (100%)", "175 (98.3%)" - one decimal, integral
// percentages without the trailing ".0".
std::string format_count_pct(std::size_t count, double pct);

std::vector<EventAnnotation> read_annotations_csv(const std::string& path);

void write_timeline_csv(const std::string& path, std::span<const StateTimeline> timelines);
void write_frequency_csv(const std::string& path, const FrequencyTable& table,
                         const std::vector<std::string>& state_names);
void write_transitions_csv(const std::string& path, std::span<const TransitionEvent> transitions,
                           std::span<const EventAnnotation> annotations);
void write_profile_json(const std::string& path, const FeatureProfile& profile,
                        const data::VariableCatalog& catalog,
                        const std::vector<std::string>& state_names);

// State display names: user map when provided, else "0", "1", ...
std::vector<std::string> state_names(std::size_t k, const std::vector<std::string>& user_names);

}  // namespace slac::analysis
