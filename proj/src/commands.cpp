#include "slac/commands.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include <json.hpp>

#include "slac/checkpoint.hpp"
#include "slac/csv.hpp"
#include "slac/error.hpp"
#include "slac/forecast.hpp"
#include "slac/metrics.hpp"

namespace slac::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string out_path(const RunConfig& cfg, const std::string& name) {
    fs::create_directories(cfg.paths.out_dir);
    return (fs::path(cfg.paths.out_dir) / name).string();
}

void write_run_meta(const RunConfig& cfg, const std::string& command) {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char stamp[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    json j;
    j["command"] = command;
    j["timestamp_utc"] = stamp;
    j["seed"] = cfg.seed;
    std::ofstream out(out_path(cfg, "run_meta.json"), std::ios::binary);
    out << j.dump(1, '\t') << '\n';
}

data::VariableCatalog load_catalog(const RunConfig& cfg) {
    if (cfg.paths.catalog.empty()) return data::VariableCatalog::default_vitals();
    return data::VariableCatalog::from_json_file(cfg.paths.catalog);
}

struct PreparedData {
    data::VariableCatalog catalog;
    std::vector<data::TimeSeriesRecord> records;
    std::vector<data::Sample> samples;  // raw (unnormalized)
};

PreparedData prepare(const RunConfig& cfg, const std::string& data_path) {
    if (data_path.empty())
        throw ConfigError("config: paths.data must point to a triplet CSV");
    PreparedData p{load_catalog(cfg), {}, {}};
    p.records = data::ingest_csv(data_path, p.catalog);
    if (p.records.empty()) throw PreconditionError("no records in " + data_path);
    p.samples = data::make_samples(p.records);
    if (p.samples.empty())
        throw PreconditionError("no usable 30-minute windows in " + data_path);
    return p;
}

std::vector<data::Sample> normalize_all(const std::vector<data::Sample>& samples,
                                        const data::NormalizationStats& stats) {
    std::vector<data::Sample> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(data::normalize(s, stats));
    return out;
}

json stats_to_json(const data::NormalizationStats& st) {
    return json{{"mean", st.mean}, {"std", st.stddev}, {"count", st.count}};
}

data::NormalizationStats stats_from_json(const json& j) {
    data::NormalizationStats st;
    st.mean = j.at("mean").get<std::vector<double>>();
    st.stddev = j.at("std").get<std::vector<double>>();
    st.count = j.at("count").get<std::vector<std::size_t>>();
    return st;
}

void write_representations_csv(const std::string& path,
                               const std::vector<data::Sample>& samples,
                               const std::vector<std::vector<double>>& reps) {
    csv::Writer w(path);
    std::string header = "record_id,window_index";
    for (std::size_t j = 0; j < reps[0].size(); ++j) header += ",r" + std::to_string(j);
    w.raw_line(header);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        std::vector<std::string> fields = {samples[i].parent_record,
                                           std::to_string(samples[i].window_index)};
        for (double v : reps[i]) fields.push_back(csv::format_double(v));
        w.row(fields);
    }
    w.close();
}

std::vector<std::vector<double>> read_representations_csv(const std::string& path) {
    auto lines = csv::read_lines(path);
    if (lines.size() < 2) throw PreconditionError("representations: no data rows in " + path);
    std::vector<std::vector<double>> points;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        auto fields = csv::split(lines[i]);
        if (fields.size() < 3)
            throw DataError(path + ": row " + std::to_string(i + 1) + ": too few fields");
        std::vector<double> p;
        for (std::size_t f = 2; f < fields.size(); ++f)
            p.push_back(csv::parse_double(fields[f], path + ": row " + std::to_string(i + 1)));
        points.push_back(std::move(p));
    }
    return points;
}

void write_assignments_csv(const std::string& path, const std::vector<data::Sample>& samples,
                           const std::vector<std::size_t>& assignment) {
    csv::Writer w(path);
    w.raw_line("record_id,window_index,state");
    for (std::size_t i = 0; i < samples.size(); ++i)
        w.row({samples[i].parent_record, std::to_string(samples[i].window_index),
               std::to_string(assignment[i])});
    w.close();
}

std::vector<std::size_t> read_assignments_for(const std::string& path,
                                              const std::vector<data::Sample>& samples) {
    auto lines = csv::read_lines(path);
    if (lines.empty() || lines[0] != "record_id,window_index,state")
        throw PreconditionError("assignments: bad or missing header in " + path);
    std::map<std::pair<std::string, std::size_t>, std::size_t> by_key;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const std::string row = path + ": row " + std::to_string(i + 1);
        auto fields = csv::split(lines[i]);
        if (fields.size() != 3) throw DataError(row + ": expected 3 fields");
        by_key[{std::string(fields[0]),
                static_cast<std::size_t>(csv::parse_int(fields[1], row))}] =
            static_cast<std::size_t>(csv::parse_int(fields[2], row));
    }
    std::vector<std::size_t> assignment;
    assignment.reserve(samples.size());
    for (const auto& s : samples) {
        auto it = by_key.find({s.parent_record, s.window_index});
        if (it == by_key.end())
            throw PreconditionError("assignments: no state for sample " + s.parent_record +
                                    "/window " + std::to_string(s.window_index) + " in " + path);
        assignment.push_back(it->second);
    }
    return assignment;
}

}  // namespace

std::string checkpoint_path(const RunConfig& cfg) {
    if (!cfg.paths.checkpoint.empty()) return cfg.paths.checkpoint;
    return (fs::path(cfg.paths.out_dir) / "checkpoint.json").string();
}

void cmd_synth(const RunConfig& cfg) {
    cfg.synth.validate();
    const synth::RegimeSpec regimes =
        cfg.regimes ? *cfg.regimes : synth::default_regimes();
    const data::VariableCatalog catalog = load_catalog(cfg);
    if (catalog.size() != regimes.n_variables())
        throw ConfigError("synth: regime profile has " + std::to_string(regimes.n_variables()) +
                          " variables but the catalog has " + std::to_string(catalog.size()));

    synth::SynthData out = synth::generate(cfg.synth, regimes);
    synth::write_triplets_csv(out_path(cfg, "data.csv"), out.records, catalog);
    synth::write_ground_truth_csv(out_path(cfg, "ground_truth.csv"), out.records, out.truth);
    synth::write_annotations_csv(out_path(cfg, "annotations.csv"), out.truth.events);
    {
        json names = json::array();
        for (const auto& n : catalog.names()) names.push_back(n);
        std::ofstream j(out_path(cfg, "catalog.json"), std::ios::binary);
        j << names.dump(1, '\t') << '\n';
    }
    write_run_meta(cfg, "synth");
}

void cmd_pretrain(const RunConfig& cfg) {
    const std::string data_path =
        cfg.paths.pretrain_data.empty() ? cfg.paths.data : cfg.paths.pretrain_data;
    PreparedData p = prepare(cfg, data_path);

    model::EncoderConfig enc = cfg.encoder;
    enc.n_variables = p.catalog.size();
    enc.validate();

    data::NormalizationStats stats = data::fit_normalization(p.samples, p.catalog.size());
    std::vector<data::Sample> normalized = normalize_all(p.samples, stats);

    train::TrainConfig tc = cfg.pretrain;
    tc.seed = cfg.seed;
    train::PretrainResult result = train::pretrain(normalized, enc, tc);

    std::vector<nn::Parameter*> params = result.encoder.all();
    for (nn::Parameter* hp : result.head.all()) params.push_back(hp);
    json extra;
    extra["normalization"] = stats_to_json(stats);
    extra["n_instances"] = result.n_instances;
    extra["best_epoch"] = result.log.best_epoch;
    model::save_checkpoint(checkpoint_path(cfg), params, p.catalog.hash(), enc.hash(), extra);
    train::write_train_log_csv(out_path(cfg, "pretrain_log.csv"), result.log);
    write_run_meta(cfg, "pretrain");
}

void cmd_cluster(const RunConfig& cfg, bool from_random) {
    PreparedData p = prepare(cfg, cfg.paths.data);

    model::EncoderConfig enc = cfg.encoder;
    enc.n_variables = p.catalog.size();
    enc.validate();

    model::EncoderParams encoder = model::init_params(enc, cfg.seed);
    data::NormalizationStats stats;
    if (from_random) {
        stats = data::fit_normalization(p.samples, p.catalog.size());
    } else {
        const std::string ckpt = checkpoint_path(cfg);
        if (!model::checkpoint_exists(ckpt))
            throw PreconditionError("cluster: checkpoint " + ckpt +
                                    " not found; run pretrain first or pass --from-random");
        train::ForecastHead head =
            train::init_forecast_head(enc.representation_dim(), p.catalog.size(), cfg.seed);
        std::vector<nn::Parameter*> params = encoder.all();
        for (nn::Parameter* hp : head.all()) params.push_back(hp);
        json extra = model::load_checkpoint(ckpt, params, p.catalog.hash(), enc.hash());
        if (!extra.contains("normalization"))
            throw DataError("cluster: checkpoint lacks normalization stats");
        stats = stats_from_json(extra.at("normalization"));
    }
    std::vector<data::Sample> normalized = normalize_all(p.samples, stats);

    train::SlacConfig sc = cfg.slac;
    sc.seed = cfg.seed;
    train::SlacResult result = train::run_slac(normalized, sc, std::move(encoder), enc);

    write_assignments_csv(out_path(cfg, "assignments.csv"), p.samples,
                          result.final_model.assignment);
    train::write_iteration_log_csv(out_path(cfg, "iteration_log.csv"), result.log);
    write_representations_csv(out_path(cfg, "representations.csv"), p.samples,
                              result.final_representations);
    {
        std::vector<nn::Parameter*> params = result.encoder.all();
        for (nn::Parameter* hp : result.head.all()) params.push_back(hp);
        json extra;
        extra["normalization"] = stats_to_json(stats);
        extra["k"] = sc.k;
        model::save_checkpoint(out_path(cfg, "final_checkpoint.json"), params, p.catalog.hash(),
                               enc.hash(), extra);
    }
    write_run_meta(cfg, "cluster");
}

void cmd_metrics(const RunConfig& cfg) {
    const std::string reps_path = (fs::path(cfg.paths.out_dir) / "representations.csv").string();
    if (!fs::exists(reps_path))
        throw PreconditionError("metrics: " + reps_path + " not found; run cluster first");
    auto points = read_representations_csv(reps_path);
    for (std::size_t k : cfg.k_sweep)
        if (k >= points.size())
            throw PreconditionError("metrics: k=" + std::to_string(k) + " >= N=" +
                                    std::to_string(points.size()));
    metrics::KSweepResult sweep =
        metrics::k_sweep(points, cfg.k_sweep, cfg.slac.kmeans_restarts, cfg.seed);
    metrics::write_k_sweep_csv(out_path(cfg, "k_sweep.csv"), sweep);
    write_run_meta(cfg, "metrics");
}

void cmd_report(const RunConfig& cfg) {
    PreparedData p = prepare(cfg, cfg.paths.data);
    const std::string assign_path = (fs::path(cfg.paths.out_dir) / "assignments.csv").string();
    if (!fs::exists(assign_path))
        throw PreconditionError("report: " + assign_path + " not found; run cluster first");
    std::vector<std::size_t> assignment = read_assignments_for(assign_path, p.samples);

    std::size_t k = cfg.slac.k;
    for (std::size_t a : assignment) k = std::max(k, a + 1);
    const auto names = analysis::state_names(k, cfg.state_names);

    auto timelines = analysis::build_timeline(p.samples, assignment);
    analysis::FrequencyTable freq = analysis::state_frequencies(timelines, k);

    std::vector<analysis::EventAnnotation> annotations;
    if (!cfg.paths.annotations.empty())
        annotations = analysis::read_annotations_csv(cfg.paths.annotations);

    std::vector<analysis::TransitionEvent> all_transitions;
    for (const auto& tl : timelines) {
        auto tr = analysis::transitions(tl);
        all_transitions.insert(all_transitions.end(), tr.begin(), tr.end());
    }
    analysis::overlay_events(all_transitions, annotations);

    analysis::FeatureProfile profile =
        analysis::feature_profile(p.samples, assignment, k, p.catalog.size());

    analysis::write_timeline_csv(out_path(cfg, "timeline.csv"), timelines);
    analysis::write_frequency_csv(out_path(cfg, "frequency.csv"), freq, names);
    analysis::write_transitions_csv(out_path(cfg, "transitions.csv"), all_transitions,
                                    annotations);
    analysis::write_profile_json(out_path(cfg, "profile.json"), profile, p.catalog, names);
    write_run_meta(cfg, "report");
}

}  // namespace slac::cli
