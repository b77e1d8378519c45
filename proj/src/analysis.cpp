#include "slac/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "slac/csv.hpp"
#include "slac/error.hpp"

namespace slac::analysis {

std::vector<StateTimeline> build_timeline(std::span<const data::Sample> samples,
                                          const std::vector<std::size_t>& assignments) {
    if (assignments.size() != samples.size()) {
        const std::size_t first_missing = std::min(assignments.size(), samples.size());
        std::string which = first_missing < samples.size()
                                ? samples[first_missing].parent_record + "/window " +
                                      std::to_string(samples[first_missing].window_index)
                                : "(extra assignments)";
        throw PreconditionError("build_timeline: missing assignment for sample " + which);
    }
    std::map<std::string, StateTimeline> by_record;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const data::Sample& s = samples[i];
        StateTimeline& tl = by_record[s.parent_record];
        tl.record_id = s.parent_record;
        tl.points.push_back({s.window_index, s.start, assignments[i]});
    }
    std::vector<StateTimeline> out;
    out.reserve(by_record.size());
    for (auto& [id, tl] : by_record) {
        std::sort(tl.points.begin(), tl.points.end(),
                  [](const TimelinePoint& a, const TimelinePoint& b) {
                      return a.window_index < b.window_index;
                  });
        out.push_back(std::move(tl));
    }
    return out;
}

FrequencyTable state_frequencies(std::span<const StateTimeline> timelines, std::size_t k) {
    if (timelines.empty()) throw PreconditionError("state_frequencies: no timelines");
    FrequencyTable table;
    table.k = k;
    table.totals.record_id = "total";
    table.totals.counts.assign(k, 0);
    for (const StateTimeline& tl : timelines) {
        FrequencyRow row;
        row.record_id = tl.record_id;
        row.counts.assign(k, 0);
        for (const TimelinePoint& p : tl.points) {
            if (p.state >= k)
                throw PreconditionError("state_frequencies: state id out of range in record " +
                                        tl.record_id);
            ++row.counts[p.state];
            ++table.totals.counts[p.state];
        }
        row.total = tl.points.size();
        table.totals.total += row.total;
        row.percentages.resize(k);
        for (std::size_t c = 0; c < k; ++c)
            row.percentages[c] = 100.0 * static_cast<double>(row.counts[c]) /
                                 static_cast<double>(row.total);
        table.rows.push_back(std::move(row));
    }
    table.totals.percentages.resize(k);
    for (std::size_t c = 0; c < k; ++c)
        table.totals.percentages[c] = 100.0 * static_cast<double>(table.totals.counts[c]) /
                                      static_cast<double>(table.totals.total);
    return table;
}

std::vector<TransitionEvent> transitions(const StateTimeline& timeline) {
    std::vector<TransitionEvent> out;
    for (std::size_t i = 1; i < timeline.points.size(); ++i) {
        const TimelinePoint& prev = timeline.points[i - 1];
        const TimelinePoint& cur = timeline.points[i];
        if (prev.state == cur.state) continue;
        TransitionEvent ev;
        ev.record_id = timeline.record_id;
        ev.window_index = cur.window_index;
        ev.window_start = cur.start;
        ev.from_state = prev.state;
        ev.to_state = cur.state;
        out.push_back(std::move(ev));
    }
    return out;
}

void overlay_events(std::vector<TransitionEvent>& transitions,
                    std::span<const EventAnnotation> annotations, double tolerance) {
    for (TransitionEvent& tr : transitions) {
        std::optional<std::size_t> best;
        double best_abs = tolerance;
        for (std::size_t i = 0; i < annotations.size(); ++i) {
            const EventAnnotation& a = annotations[i];
            if (a.record_id != tr.record_id) continue;
            const double gap = a.time - tr.window_start;
            const double abs_gap = std::fabs(gap);
            if (abs_gap > tolerance) continue;
            const bool closer = abs_gap < best_abs;
            const bool tie_earlier =
                best && abs_gap == best_abs && a.time < annotations[*best].time;
            if (!best || closer || tie_earlier) {
                best = i;
                best_abs = abs_gap;
            }
        }
        if (best) {
            tr.event_index = best;
            tr.gap_seconds = annotations[*best].time - tr.window_start;
        }
    }
}

FeatureProfile feature_profile(std::span<const data::Sample> samples,
                               const std::vector<std::size_t>& assignments, std::size_t k,
                               std::size_t n_variables) {
    if (assignments.size() != samples.size())
        throw PreconditionError("feature_profile: assignments must cover all samples");
    std::vector<bool> state_present(k, false);
    for (std::size_t a : assignments) {
        if (a >= k) throw PreconditionError("feature_profile: state id out of range");
        state_present[a] = true;
    }
    if (std::count(state_present.begin(), state_present.end(), true) < 2)
        throw PreconditionError("feature_profile: needs >= 2 states present");

    // Per (variable, state): the per-sample means of observed bin values.
    std::vector<std::vector<std::vector<double>>> pooled(
        n_variables, std::vector<std::vector<double>>(k));
    std::vector<double> sum(n_variables);
    std::vector<std::size_t> count(n_variables);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        std::fill(sum.begin(), sum.end(), 0.0);
        std::fill(count.begin(), count.end(), 0);
        for (const data::BinValue& bv : samples[i].bins) {
            sum[bv.variable] += bv.value;
            ++count[bv.variable];
        }
        for (std::size_t f = 0; f < n_variables; ++f)
            if (count[f] > 0)
                pooled[f][assignments[i]].push_back(sum[f] / static_cast<double>(count[f]));
    }

    FeatureProfile profile;
    profile.k = k;
    profile.variables.resize(n_variables);
    for (std::size_t f = 0; f < n_variables; ++f) {
        VariableProfile& vp = profile.variables[f];
        vp.per_state.resize(k);
        std::vector<std::vector<double>> groups;
        for (std::size_t c = 0; c < k; ++c) {
            auto& values = pooled[f][c];
            StateStats& st = vp.per_state[c];
            st.count = values.size();
            if (values.empty()) continue;
            st.mean = 0.0;
            for (double v : values) st.mean += v;
            st.mean /= static_cast<double>(values.size());
            std::vector<double> sorted = values;
            std::sort(sorted.begin(), sorted.end());
            const std::size_t mid = sorted.size() / 2;
            st.median = sorted.size() % 2 == 1 ? sorted[mid]
                                               : 0.5 * (sorted[mid - 1] + sorted[mid]);
            groups.push_back(values);
        }
        if (groups.size() < 2) {
            vp.kw_skipped = true;
            continue;
        }
        vp.kw = metrics::kruskal_wallis(groups);
        vp.distinctive = vp.kw.p_value < 0.05;
    }
    return profile;
}

std::string format_count_pct(std::size_t count, double pct) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", pct);
    std::string p(buf);
    if (p.size() >= 2 && p.compare(p.size() - 2, 2, ".0") == 0) p.erase(p.size() - 2);
    return std::to_string(count) + " (" + p + "%)";
}

std::vector<EventAnnotation> read_annotations_csv(const std::string& path) {
    auto lines = csv::read_lines(path);
    if (lines.empty()) return {};
    if (lines[0] != "record_id,t_seconds,description")
        throw DataError(path + ": row 1: expected header 'record_id,t_seconds,description'");
    std::vector<EventAnnotation> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const std::string row = path + ": row " + std::to_string(i + 1);
        auto fields = csv::split(lines[i], 3);
        if (fields.size() != 3) throw DataError(row + ": expected 3 fields");
        EventAnnotation a;
        a.record_id = std::string(fields[0]);
        a.time = csv::parse_double(fields[1], row);
        if (!std::isfinite(a.time) || a.time < 0.0)
            throw DataError(row + ": t_seconds must be finite and >= 0");
        a.description = std::string(fields[2]);
        out.push_back(std::move(a));
    }
    return out;
}

std::vector<std::string> state_names(std::size_t k, const std::vector<std::string>& user_names) {
    if (!user_names.empty() && user_names.size() != k)
        throw ConfigError("state_names: name map must have exactly k entries");
    std::vector<std::string> names;
    for (std::size_t c = 0; c < k; ++c)
        names.push_back(user_names.empty() ? std::to_string(c) : user_names[c]);
    return names;
}

void write_timeline_csv(const std::string& path, std::span<const StateTimeline> timelines) {
    csv::Writer w(path);
    w.raw_line("record_id,window_index,start_s,state");
    for (const StateTimeline& tl : timelines)
        for (const TimelinePoint& p : tl.points)
            w.row({tl.record_id, std::to_string(p.window_index), csv::format_double(p.start),
                   std::to_string(p.state)});
    w.close();
}

void write_frequency_csv(const std::string& path, const FrequencyTable& table,
                         const std::vector<std::string>& names) {
    csv::Writer w(path);
    std::string header = "record_id,windows";
    for (std::size_t c = 0; c < table.k; ++c) header += ",state_" + names[c];
    w.raw_line(header);
    auto write_row = [&](const FrequencyRow& row) {
        std::vector<std::string> fields = {row.record_id, std::to_string(row.total)};
        for (std::size_t c = 0; c < table.k; ++c)
            fields.push_back(format_count_pct(row.counts[c], row.percentages[c]));
        w.row(fields);
    };
    for (const FrequencyRow& row : table.rows) write_row(row);
    write_row(table.totals);
    w.close();
}

void write_transitions_csv(const std::string& path, std::span<const TransitionEvent> transitions,
                           std::span<const EventAnnotation> annotations) {
    csv::Writer w(path);
    w.raw_line("record_id,window_index,window_start_s,from_state,to_state,event_time_s,event_description,gap_s");
    for (const TransitionEvent& tr : transitions) {
        std::vector<std::string> fields = {tr.record_id, std::to_string(tr.window_index),
                                           csv::format_double(tr.window_start),
                                           std::to_string(tr.from_state),
                                           std::to_string(tr.to_state)};
        if (tr.event_index) {
            const EventAnnotation& a = annotations[*tr.event_index];
            fields.push_back(csv::format_double(a.time));
            fields.push_back(a.description);
            fields.push_back(csv::format_double(tr.gap_seconds));
        } else {
            fields.insert(fields.end(), {"", "", ""});
        }
        w.row(fields);
    }
    w.close();
}

void write_profile_json(const std::string& path, const FeatureProfile& profile,
                        const data::VariableCatalog& catalog,
                        const std::vector<std::string>& names) {
    nlohmann::json j;
    j["k"] = profile.k;
    nlohmann::json vars = nlohmann::json::object();
    for (std::size_t f = 0; f < profile.variables.size(); ++f) {
        const VariableProfile& vp = profile.variables[f];
        nlohmann::json v;
        nlohmann::json states = nlohmann::json::object();
        for (std::size_t c = 0; c < profile.k; ++c) {
            const StateStats& st = vp.per_state[c];
            states[names[c]] = {{"mean", st.mean}, {"median", st.median}, {"count", st.count}};
        }
        v["states"] = std::move(states);
        if (vp.kw_skipped) {
            v["kruskal_wallis"] = nullptr;
            v["note"] = "observed in fewer than 2 states; test skipped";
        } else {
            v["kruskal_wallis"] = {{"H", vp.kw.h},
                                   {"df", vp.kw.degrees_of_freedom},
                                   {"p_value", vp.kw.p_value},
                                   {"tie_correction", vp.kw.tie_correction}};
            v["distinctive"] = vp.distinctive;
        }
        vars[catalog.name(f)] = std::move(v);
    }
    j["variables"] = std::move(vars);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open file for writing: " + path);
    out << j.dump(1, '\t') << '\n';
    out.close();
    if (!out) throw DataError("write failed: " + path);
}

}  // namespace slac::analysis
