#include "slac/synth.hpp"

#include <algorithm>
#include <cmath>

#include "slac/csv.hpp"
#include "slac/error.hpp"
#include "slac/rng.hpp"

namespace slac::synth {

void RegimeSpec::validate() const {
    if (means.size() < 2) throw ConfigError("regimes: need at least 2 regimes");
    if (means.size() != stds.size()) throw ConfigError("regimes: means/stds regime count differs");
    const std::size_t f = n_variables();
    if (f == 0) throw ConfigError("regimes: need at least 1 variable");
    for (std::size_t r = 0; r < means.size(); ++r) {
        if (means[r].size() != f || stds[r].size() != f)
            throw ConfigError("regimes: ragged means/stds");
        for (double s : stds[r])
            if (s <= 0.0) throw ConfigError("regimes: stds must be > 0");
    }
    if (phi < 0.0 || phi >= 1.0) throw ConfigError("regimes: phi must be in [0,1)");
}

void GenConfig::validate() const {
    if (n_records == 0 || windows_per_record == 0)
        throw ConfigError("synth: n_records and windows_per_record must be >= 1");
    if (missing_rate < 0.0 || missing_rate >= 1.0)
        throw ConfigError("synth: missing_rate must be in [0,1)");
    if (base_interval_s <= 0.0 || window_len_s <= 0.0)
        throw ConfigError("synth: intervals must be > 0");
    if (jitter_s < 0.0 || jitter_s >= base_interval_s)
        throw ConfigError("synth: jitter_s must be in [0, base_interval_s)");
    if (event_switch_prob < 0.0 || event_switch_prob > 1.0)
        throw ConfigError("synth: event_switch_prob must be in [0,1]");
}

RegimeSpec default_regimes() {
    // Variables: DBP, SBP, CPP, HR, ICP, PRx, RR, SpO2
    RegimeSpec spec;
    spec.means = {
        {55.0, 95.0, 55.0, 90.0, 25.0, 0.30, 10.0, 96.0},    // hypertensive-ICP-like
        {65.0, 110.0, 70.0, 115.0, 8.0, 0.00, 28.0, 88.0},   // respiratory-distress-like
        {75.0, 140.0, 80.0, 60.0, 10.0, -0.10, 14.0, 98.0},  // stable
    };
    spec.stds = {
        {5.0, 6.0, 5.0, 6.0, 3.0, 0.15, 2.0, 1.5},
        {5.0, 6.0, 5.0, 6.0, 3.0, 0.15, 2.0, 1.5},
        {5.0, 6.0, 5.0, 6.0, 3.0, 0.15, 2.0, 1.5},
    };
    spec.phi = 0.8;
    return spec;
}

static std::string record_name(std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "R%03zu", index + 1);
    return std::string(buf);
}

SynthData generate(const GenConfig& config, const RegimeSpec& regimes) {
    config.validate();
    regimes.validate();
    const std::size_t n_vars = regimes.n_variables();
    const std::size_t n_regimes = regimes.n_regimes();
    const auto steps_per_window =
        static_cast<std::size_t>(config.window_len_s / config.base_interval_s);

    SynthData out;
    out.records.reserve(config.n_records);
    out.truth.regimes.resize(config.n_records);

    for (std::size_t rec = 0; rec < config.n_records; ++rec) {
        Rng rng = Rng::substream(config.seed, "synth-record", rec);
        data::TimeSeriesRecord record;
        record.record_id = record_name(rec);

        // Regime plan for every window of this record.
        std::vector<std::size_t>& plan = out.truth.regimes[rec];
        plan.resize(config.windows_per_record);
        std::size_t current = rec % n_regimes;
        for (std::size_t w = 0; w < config.windows_per_record; ++w) {
            switch (config.plan) {
                case PlanKind::fixed:
                    plan[w] = current;
                    break;
                case PlanKind::random:
                    plan[w] = static_cast<std::size_t>(rng.uniform_int(n_regimes));
                    break;
                case PlanKind::event_driven:
                    if (w > 0 && rng.bernoulli(config.event_switch_prob)) {
                        std::size_t next =
                            static_cast<std::size_t>(rng.uniform_int(n_regimes - 1));
                        if (next >= current) ++next;
                        current = next;
                    }
                    plan[w] = current;
                    break;
            }
        }
        for (std::size_t w = 1; w < config.windows_per_record; ++w) {
            if (plan[w] != plan[w - 1]) {
                analysis::EventAnnotation ev;
                ev.record_id = record.record_id;
                ev.time = static_cast<double>(w) * config.window_len_s;
                ev.description = "regime change " + std::to_string(plan[w - 1]) + "->" +
                                 std::to_string(plan[w]);
                out.truth.events.push_back(std::move(ev));
            }
        }

        for (std::size_t w = 0; w < config.windows_per_record; ++w) {
            const double window_start = static_cast<double>(w) * config.window_len_s;
            const std::size_t regime = plan[w];
            for (std::size_t f = 0; f < n_vars; ++f) {
                const double mean = regimes.means[regime][f];
                const double sd = regimes.stds[regime][f];
                const double phi = regimes.phi;
                const double innovation_scale = sd * std::sqrt(1.0 - phi * phi);
                double x = mean + sd * rng.normal();  // stationary start
                for (std::size_t i = 0; i < steps_per_window; ++i) {
                    if (i > 0) x = mean + phi * (x - mean) + innovation_scale * rng.normal();
                    const double t = window_start + static_cast<double>(i) * config.base_interval_s +
                                     config.jitter_s * rng.uniform();
                    const bool dropped = rng.uniform() < config.missing_rate;
                    if (!dropped) record.triplets.push_back({t, f, x});
                }
            }
        }

        // One reading at the boundary after the last full window, like a
        // recording that stops mid-window. It keeps the final window complete
        // (duration = windows * window_len) and never enters any sample.
        {
            const std::size_t last_regime = plan[config.windows_per_record - 1];
            const double t_end =
                static_cast<double>(config.windows_per_record) * config.window_len_s;
            const double v = regimes.means[last_regime][0] +
                             regimes.stds[last_regime][0] * rng.normal();
            record.triplets.push_back({t_end, 0, v});
        }

        std::sort(record.triplets.begin(), record.triplets.end(),
                  [](const data::ObservationTriplet& a, const data::ObservationTriplet& b) {
                      if (a.t != b.t) return a.t < b.t;
                      return a.variable < b.variable;
                  });
        for (const auto& tr : record.triplets) record.duration = std::max(record.duration, tr.t);
        out.records.push_back(std::move(record));
    }
    return out;
}

double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b) {
    if (a.size() != b.size())
        throw PreconditionError("adjusted_rand_index: labelings differ in length");
    const std::size_t n = a.size();
    if (n == 0) throw PreconditionError("adjusted_rand_index: empty labelings");

    std::size_t ka = 0, kb = 0;
    for (std::size_t v : a) ka = std::max(ka, v + 1);
    for (std::size_t v : b) kb = std::max(kb, v + 1);
    std::vector<std::vector<std::size_t>> table(ka, std::vector<std::size_t>(kb, 0));
    for (std::size_t i = 0; i < n; ++i) ++table[a[i]][b[i]];

    auto choose2 = [](std::size_t m) {
        return static_cast<double>(m) * static_cast<double>(m - 1) / 2.0;
    };
    double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
    std::vector<std::size_t> row_sum(ka, 0), col_sum(kb, 0);
    for (std::size_t i = 0; i < ka; ++i)
        for (std::size_t j = 0; j < kb; ++j) {
            sum_ij += choose2(table[i][j]);
            row_sum[i] += table[i][j];
            col_sum[j] += table[i][j];
        }
    for (std::size_t m : row_sum) sum_a += choose2(m);
    for (std::size_t m : col_sum) sum_b += choose2(m);

    const double total_pairs = choose2(n);
    const double expected = sum_a * sum_b / total_pairs;
    const double maximum = 0.5 * (sum_a + sum_b);
    if (maximum == expected) return 1.0;  // both partitions trivial
    return (sum_ij - expected) / (maximum - expected);
}

std::vector<std::size_t> flatten_truth(const GroundTruth& truth) {
    std::vector<std::size_t> out;
    for (const auto& rec : truth.regimes)
        for (std::size_t r : rec) out.push_back(r);
    return out;
}

void write_triplets_csv(const std::string& path, std::span<const data::TimeSeriesRecord> records,
                        const data::VariableCatalog& catalog) {
    csv::Writer w(path);
    w.raw_line("record_id,t_seconds,variable,value");
    for (const data::TimeSeriesRecord& rec : records)
        for (const data::ObservationTriplet& tr : rec.triplets)
            w.row({rec.record_id, csv::format_double(tr.t), catalog.name(tr.variable),
                   csv::format_double(tr.value)});
    w.close();
}

void write_ground_truth_csv(const std::string& path,
                            std::span<const data::TimeSeriesRecord> records,
                            const GroundTruth& truth) {
    csv::Writer w(path);
    w.raw_line("record_id,window_index,regime");
    for (std::size_t rec = 0; rec < records.size(); ++rec)
        for (std::size_t wi = 0; wi < truth.regimes[rec].size(); ++wi)
            w.row({records[rec].record_id, std::to_string(wi),
                   std::to_string(truth.regimes[rec][wi])});
    w.close();
}

void write_annotations_csv(const std::string& path,
                           std::span<const analysis::EventAnnotation> annotations) {
    csv::Writer w(path);
    w.raw_line("record_id,t_seconds,description");
    for (const analysis::EventAnnotation& a : annotations)
        w.row({a.record_id, csv::format_double(a.time), a.description});
    w.close();
}

}  // namespace slac::synth
