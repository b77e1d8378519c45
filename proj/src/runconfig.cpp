#include "slac/runconfig.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "slac/error.hpp"

namespace slac::cli {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.contains(it.key()))
            throw ConfigError("config: unknown key '" + it.key() + "' in " + where);
}

template <typename T>
void get_to(const json& obj, const char* key, T& out) {
    if (!obj.contains(key)) return;
    try {
        obj.at(key).get_to(out);
    } catch (const json::exception&) {
        throw ConfigError(std::string("config: bad value for '") + key + "'");
    }
}

void parse_paths(const json& j, Paths& p) {
    reject_unknown(j, {"data", "catalog", "annotations", "out_dir", "checkpoint", "pretrain_data"},
                   "paths");
    get_to(j, "data", p.data);
    get_to(j, "catalog", p.catalog);
    get_to(j, "annotations", p.annotations);
    get_to(j, "out_dir", p.out_dir);
    get_to(j, "checkpoint", p.checkpoint);
    get_to(j, "pretrain_data", p.pretrain_data);
}

void parse_encoder(const json& j, model::EncoderConfig& e) {
    reject_unknown(j, {"d", "ffn_units", "n_blocks", "n_heads", "dropout", "max_triplets",
                       "static_dim"},
                   "encoder");
    get_to(j, "d", e.d);
    get_to(j, "ffn_units", e.ffn_units);
    get_to(j, "n_blocks", e.n_blocks);
    get_to(j, "n_heads", e.n_heads);
    get_to(j, "dropout", e.dropout);
    get_to(j, "max_triplets", e.max_triplets);
    get_to(j, "static_dim", e.static_dim);
}

void parse_pretrain(const json& j, train::TrainConfig& t) {
    reject_unknown(
        j, {"batch_size", "patience", "split", "max_epochs", "split_by_sample", "learning_rate"},
        "pretrain");
    get_to(j, "batch_size", t.batch_size);
    get_to(j, "patience", t.patience);
    get_to(j, "split", t.split);
    get_to(j, "max_epochs", t.max_epochs);
    get_to(j, "split_by_sample", t.split_by_sample);
    get_to(j, "learning_rate", t.learning_rate);
}

void parse_slac(const json& j, train::SlacConfig& s) {
    reject_unknown(j,
                   {"k", "outer_iterations", "epochs_per_iteration", "patience", "batch_size",
                    "split", "kmeans_restarts", "learning_rate"},
                   "slac");
    get_to(j, "k", s.k);
    get_to(j, "outer_iterations", s.outer_iterations);
    get_to(j, "epochs_per_iteration", s.epochs_per_iteration);
    get_to(j, "patience", s.patience);
    get_to(j, "batch_size", s.batch_size);
    get_to(j, "split", s.split);
    get_to(j, "kmeans_restarts", s.kmeans_restarts);
    get_to(j, "learning_rate", s.learning_rate);
}

void parse_synth(const json& j, synth::GenConfig& g) {
    reject_unknown(j,
                   {"n_records", "windows_per_record", "plan", "missing_rate", "jitter_s",
                    "base_interval_s", "window_len_s", "event_switch_prob"},
                   "synth");
    get_to(j, "n_records", g.n_records);
    get_to(j, "windows_per_record", g.windows_per_record);
    get_to(j, "missing_rate", g.missing_rate);
    get_to(j, "jitter_s", g.jitter_s);
    get_to(j, "base_interval_s", g.base_interval_s);
    get_to(j, "window_len_s", g.window_len_s);
    get_to(j, "event_switch_prob", g.event_switch_prob);
    if (j.contains("plan")) {
        const std::string plan = j.at("plan").get<std::string>();
        if (plan == "fixed")
            g.plan = synth::PlanKind::fixed;
        else if (plan == "random")
            g.plan = synth::PlanKind::random;
        else if (plan == "event")
            g.plan = synth::PlanKind::event_driven;
        else
            throw ConfigError("config: synth.plan must be one of fixed|random|event");
    }
}

void parse_regimes(const json& j, synth::RegimeSpec& r) {
    reject_unknown(j, {"means", "stds", "phi"}, "regimes");
    get_to(j, "means", r.means);
    get_to(j, "stds", r.stds);
    get_to(j, "phi", r.phi);
    r.validate();
}

}  // namespace

void RunConfig::apply_seed() {
    pretrain.seed = seed;
    slac.seed = seed;
    synth.seed = seed;
}

RunConfig default_config() {
    RunConfig cfg;
    cfg.apply_seed();
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config: bad JSON in " + path + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    reject_unknown(j,
                   {"seed", "paths", "encoder", "pretrain", "slac", "k_sweep", "synth", "regimes",
                    "state_names"},
                   "top level");

    RunConfig cfg;
    get_to(j, "seed", cfg.seed);
    if (j.contains("paths")) parse_paths(j.at("paths"), cfg.paths);
    if (j.contains("encoder")) parse_encoder(j.at("encoder"), cfg.encoder);
    if (j.contains("pretrain")) parse_pretrain(j.at("pretrain"), cfg.pretrain);
    if (j.contains("slac")) parse_slac(j.at("slac"), cfg.slac);
    get_to(j, "k_sweep", cfg.k_sweep);
    if (j.contains("synth")) parse_synth(j.at("synth"), cfg.synth);
    if (j.contains("regimes")) {
        synth::RegimeSpec spec;
        parse_regimes(j.at("regimes"), spec);
        cfg.regimes = std::move(spec);
    }
    get_to(j, "state_names", cfg.state_names);
    cfg.apply_seed();
    return cfg;
}

}  // namespace slac::cli
