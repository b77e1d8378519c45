#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace slac::data {

// Ordered set of variable names; index is the dense id used everywhere else.
class VariableCatalog {
public:
    explicit VariableCatalog(std::vector<std::string> names);

    static VariableCatalog from_json_file(const std::string& path);
    static VariableCatalog default_vitals();  // DBP,SBP,CPP,HR,ICP,PRx,RR,SpO2

    std::size_t size() const { return names_.size(); }
    const std::string& name(std::size_t id) const { return names_[id]; }
    const std::vector<std::string>& names() const { return names_; }
    std::optional<std::size_t> find(const std::string& name) const;
    std::uint64_t hash() const;

private:
    std::vector<std::string> names_;
};

// One measurement: time since record start, variable id, value.
// Missing data is represented by absence, never by sentinels.
struct ObservationTriplet {
    double t = 0.0;
    std::size_t variable = 0;
    double value = 0.0;
};

struct TimeSeriesRecord {
    std::string record_id;
    std::vector<ObservationTriplet> triplets;  // canonically sorted (t, then variable)
    double duration = 0.0;                     // max observation time
};

// A raw fixed-length window before binning; times re-based to window start.
struct RawWindow {
    std::string record_id;
    std::size_t window_index = 0;
    double start = 0.0;
    double window_len = 1800.0;
    std::vector<ObservationTriplet> triplets;
};

struct BinValue {
    std::size_t bin = 0;
    std::size_t variable = 0;
    double value = 0.0;
};

// One window of one record after bin-averaging: the unit of clustering.
// bins is sparse and sorted (bin, variable); unobserved bins are absent.
struct Sample {
    std::string parent_record;
    std::size_t window_index = 0;
    double start = 0.0;
    double bin_width = 10.0;
    std::size_t n_bins = 180;
    std::vector<BinValue> bins;

    // Representative observation time of a bin (its midpoint).
    double bin_time(std::size_t bin) const { return (static_cast<double>(bin) + 0.5) * bin_width; }
    double window_len() const { return static_cast<double>(n_bins) * bin_width; }
};

struct NormalizationStats {
    std::vector<double> mean;
    std::vector<double> stddev;       // clamped to >= 1e-8
    std::vector<std::size_t> count;   // observed bin values per variable
};

// Reads `record_id,t_seconds,variable,value` rows (header required). One
// record per distinct id, sorted by id; triplets canonically sorted. Throws
// DataError naming the 1-based row for unknown variables or bad values.
std::vector<TimeSeriesRecord> ingest_csv(const std::string& path, const VariableCatalog& catalog);

// Non-overlapping windows [i*len, (i+1)*len); a trailing partial window is
// dropped. A record shorter than one window yields an empty list.
std::vector<RawWindow> segment(const TimeSeriesRecord& record, double window_len = 1800.0);

// Arithmetic mean per (bin, variable); bins with no observation stay absent.
// A window with zero observations yields nullopt (caller drops it).
std::optional<Sample> bin_average(const RawWindow& window, double bin_width = 10.0);

// Per-variable mean / population std over all observed bin values.
// Variables never observed get (0, 1); std is clamped to 1e-8.
NormalizationStats fit_normalization(std::span<const Sample> samples, std::size_t n_variables);

// (v - mean_f) / std_f per present value; the absence pattern is unchanged.
Sample normalize(const Sample& sample, const NormalizationStats& stats);

// segment + bin_average + drop empty windows over a whole dataset.
std::vector<Sample> make_samples(std::span<const TimeSeriesRecord> records,
                                 double window_len = 1800.0, double bin_width = 10.0);

}  // namespace slac::data
