#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "slac/tape.hpp"

namespace slac::model {

// Versioned single-file parameter checkpoint: name -> shape + row-major
// values, plus catalog/config hashes so a checkpoint cannot silently be
// applied to a different variable set or architecture.
void save_checkpoint(const std::string& path, const std::vector<nn::Parameter*>& params,
                     std::uint64_t catalog_hash, std::uint64_t config_hash,
                     const nlohmann::json& extra = nlohmann::json::object());

// Fills every listed parameter by name; shapes must match. Entries present
// in the file but not requested are ignored. Returns the "extra" blob.
nlohmann::json load_checkpoint(const std::string& path, const std::vector<nn::Parameter*>& params,
                               std::uint64_t catalog_hash, std::uint64_t config_hash);

bool checkpoint_exists(const std::string& path);

}  // namespace slac::model
