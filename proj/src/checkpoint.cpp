#include "slac/checkpoint.hpp"

#include <filesystem>
#include <fstream>

#include "slac/error.hpp"

namespace slac::model {

using nlohmann::json;

static constexpr int kFormatVersion = 1;

static std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

void save_checkpoint(const std::string& path, const std::vector<nn::Parameter*>& params,
                     std::uint64_t catalog_hash, std::uint64_t config_hash, const json& extra) {
    json j;
    j["format_version"] = kFormatVersion;
    j["catalog_hash"] = hex64(catalog_hash);
    j["config_hash"] = hex64(config_hash);
    j["extra"] = extra;
    json p = json::object();
    for (const nn::Parameter* param : params) {
        if (param->name.empty()) throw Error("checkpoint: unnamed parameter");
        json entry;
        entry["shape"] = param->value.shape();
        entry["data"] = param->value.data();
        p[param->name] = std::move(entry);
    }
    j["params"] = std::move(p);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("checkpoint: cannot open " + path + " for writing");
    out << j.dump(1, '\t') << '\n';
    out.close();
    if (!out) throw DataError("checkpoint: write failed for " + path);
}

json load_checkpoint(const std::string& path, const std::vector<nn::Parameter*>& params,
                     std::uint64_t catalog_hash, std::uint64_t config_hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PreconditionError("checkpoint: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("checkpoint: bad JSON in " + path + ": " + e.what());
    }
    if (!j.contains("format_version") || j["format_version"].get<int>() != kFormatVersion)
        throw DataError("checkpoint: unsupported format version in " + path);
    if (j.value("catalog_hash", "") != hex64(catalog_hash))
        throw ConfigError("checkpoint: catalog hash mismatch; " + path +
                          " was written for a different variable catalog");
    if (j.value("config_hash", "") != hex64(config_hash))
        throw ConfigError("checkpoint: config hash mismatch; " + path +
                          " was written for a different model configuration");

    const json& p = j.at("params");
    for (nn::Parameter* param : params) {
        auto it = p.find(param->name);
        if (it == p.end())
            throw DataError("checkpoint: missing parameter '" + param->name + "' in " + path);
        std::vector<std::size_t> shape = (*it)["shape"].get<std::vector<std::size_t>>();
        std::vector<double> data = (*it)["data"].get<std::vector<double>>();
        if (shape != param->value.shape())
            throw DataError("checkpoint: shape mismatch for '" + param->name + "' in " + path);
        if (data.size() != param->value.size())
            throw DataError("checkpoint: data length mismatch for '" + param->name + "'");
        param->value.data() = std::move(data);
        param->grad = nn::Tensor::zeros(param->value.shape());
    }
    return j.value("extra", json::object());
}

bool checkpoint_exists(const std::string& path) {
    return std::filesystem::exists(path);
}

}  // namespace slac::model
