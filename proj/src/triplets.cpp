#include "slac/triplets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <unordered_map>

#include <json.hpp>

#include "slac/csv.hpp"
#include "slac/error.hpp"
#include "slac/rng.hpp"

namespace slac::data {

VariableCatalog::VariableCatalog(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.empty()) throw ConfigError("catalog: needs at least one variable");
    for (std::size_t i = 0; i < names_.size(); ++i)
        for (std::size_t j = i + 1; j < names_.size(); ++j)
            if (names_[i] == names_[j])
                throw ConfigError("catalog: duplicate variable name '" + names_[i] + "'");
}

VariableCatalog VariableCatalog::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("catalog: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("catalog: bad JSON in " + path + ": " + e.what());
    }
    if (!j.is_array()) throw ConfigError("catalog: expected a JSON list of names in " + path);
    std::vector<std::string> names;
    for (const auto& item : j) {
        if (!item.is_string()) throw ConfigError("catalog: non-string entry in " + path);
        names.push_back(item.get<std::string>());
    }
    return VariableCatalog(std::move(names));
}

VariableCatalog VariableCatalog::default_vitals() {
    return VariableCatalog({"DBP", "SBP", "CPP", "HR", "ICP", "PRx", "RR", "SpO2"});
}

std::optional<std::size_t> VariableCatalog::find(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return i;
    return std::nullopt;
}

std::uint64_t VariableCatalog::hash() const {
    std::string joined;
    for (const auto& n : names_) {
        joined += n;
        joined += '\n';
    }
    return Rng::fnv1a(joined);
}

static void sort_canonically(std::vector<ObservationTriplet>& triplets) {
    std::sort(triplets.begin(), triplets.end(), [](const auto& a, const auto& b) {
        if (a.t != b.t) return a.t < b.t;
        if (a.variable != b.variable) return a.variable < b.variable;
        return a.value < b.value;
    });
}

std::vector<TimeSeriesRecord> ingest_csv(const std::string& path, const VariableCatalog& catalog) {
    auto lines = csv::read_lines(path);
    if (lines.empty()) return {};
    if (lines[0] != "record_id,t_seconds,variable,value")
        throw DataError(path + ": row 1: expected header 'record_id,t_seconds,variable,value'");

    std::map<std::string, TimeSeriesRecord> by_id;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const std::string row = "row " + std::to_string(i + 1);
        auto fields = csv::split(lines[i]);
        if (fields.size() != 4)
            throw DataError(path + ": " + row + ": expected 4 fields, got " +
                            std::to_string(fields.size()));
        std::string id(fields[0]);
        if (id.empty()) throw DataError(path + ": " + row + ": empty record_id");
        double t = csv::parse_double(fields[1], path + ": " + row);
        if (!std::isfinite(t) || t < 0.0)
            throw DataError(path + ": " + row + ": t_seconds must be finite and >= 0");
        auto var = catalog.find(std::string(fields[2]));
        if (!var)
            throw DataError(path + ": " + row + ": unknown variable '" + std::string(fields[2]) + "'");
        double value = csv::parse_double(fields[3], path + ": " + row);
        if (!std::isfinite(value))
            throw DataError(path + ": " + row + ": non-finite value");

        TimeSeriesRecord& rec = by_id[id];
        rec.record_id = id;
        rec.triplets.push_back({t, *var, value});
        rec.duration = std::max(rec.duration, t);
    }

    std::vector<TimeSeriesRecord> records;
    records.reserve(by_id.size());
    for (auto& [id, rec] : by_id) {
        sort_canonically(rec.triplets);
        records.push_back(std::move(rec));
    }
    return records;
}

std::vector<RawWindow> segment(const TimeSeriesRecord& record, double window_len) {
    if (window_len <= 0.0) throw ConfigError("segment: window_len must be > 0");
    const std::size_t n_windows = static_cast<std::size_t>(record.duration / window_len);
    std::vector<RawWindow> windows(n_windows);
    for (std::size_t i = 0; i < n_windows; ++i) {
        windows[i].record_id = record.record_id;
        windows[i].window_index = i;
        windows[i].start = static_cast<double>(i) * window_len;
        windows[i].window_len = window_len;
    }
    for (const auto& tr : record.triplets) {
        const auto w = static_cast<std::size_t>(tr.t / window_len);
        if (w >= n_windows) continue;  // trailing partial window dropped
        windows[w].triplets.push_back({tr.t - windows[w].start, tr.variable, tr.value});
    }
    return windows;
}

std::optional<Sample> bin_average(const RawWindow& window, double bin_width) {
    if (bin_width <= 0.0 || bin_width > window.window_len)
        throw ConfigError("bin_average: bad bin_width");
    if (window.triplets.empty()) return std::nullopt;

    const auto n_bins = static_cast<std::size_t>(std::llround(window.window_len / bin_width));
    std::map<std::pair<std::size_t, std::size_t>, std::pair<double, std::size_t>> acc;
    for (const auto& tr : window.triplets) {
        auto bin = static_cast<std::size_t>(tr.t / bin_width);
        if (bin >= n_bins) bin = n_bins - 1;
        auto& slot = acc[{bin, tr.variable}];
        slot.first += tr.value;
        slot.second += 1;
    }

    Sample s;
    s.parent_record = window.record_id;
    s.window_index = window.window_index;
    s.start = window.start;
    s.bin_width = bin_width;
    s.n_bins = n_bins;
    s.bins.reserve(acc.size());
    for (const auto& [key, sum_count] : acc)
        s.bins.push_back({key.first, key.second, sum_count.first / static_cast<double>(sum_count.second)});
    return s;
}

NormalizationStats fit_normalization(std::span<const Sample> samples, std::size_t n_variables) {
    if (samples.empty()) throw PreconditionError("fit_normalization: empty training split");
    NormalizationStats st;
    st.mean.assign(n_variables, 0.0);
    st.stddev.assign(n_variables, 1.0);
    st.count.assign(n_variables, 0);

    std::vector<double> sum(n_variables, 0.0), sum_sq(n_variables, 0.0);
    for (const Sample& s : samples) {
        for (const BinValue& bv : s.bins) {
            sum[bv.variable] += bv.value;
            sum_sq[bv.variable] += bv.value * bv.value;
            ++st.count[bv.variable];
        }
    }
    for (std::size_t f = 0; f < n_variables; ++f) {
        if (st.count[f] == 0) continue;  // unseen variable keeps (0, 1)
        const double n = static_cast<double>(st.count[f]);
        const double mean = sum[f] / n;
        const double var = std::max(0.0, sum_sq[f] / n - mean * mean);
        st.mean[f] = mean;
        st.stddev[f] = std::max(std::sqrt(var), 1e-8);
    }
    return st;
}

Sample normalize(const Sample& sample, const NormalizationStats& stats) {
    Sample out = sample;
    for (BinValue& bv : out.bins) {
        if (bv.variable >= stats.mean.size())
            throw DataError("normalize: variable id out of range of fitted stats");
        bv.value = (bv.value - stats.mean[bv.variable]) / stats.stddev[bv.variable];
    }
    return out;
}

std::vector<Sample> make_samples(std::span<const TimeSeriesRecord> records,
                                 double window_len, double bin_width) {
    std::vector<Sample> samples;
    for (const TimeSeriesRecord& rec : records) {
        for (const RawWindow& w : segment(rec, window_len)) {
            if (auto s = bin_average(w, bin_width)) samples.push_back(std::move(*s));
        }
    }
    return samples;
}

}  // namespace slac::data
