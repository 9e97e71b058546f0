#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "iact/model/config.hpp"

namespace iact::io {

/// Nested document: profile, model, train, inference, ablation, precision, seed.
nlohmann::json config_to_json(const ModelConfig& config);
/// Starts from the profile named in the document (default "desk") and applies
/// every field present. Unknown keys and invalid values are ConfigErrors.
ModelConfig config_from_json(const nlohmann::json& doc);

/// Compact dump with sorted keys; the input to the digest.
std::string canonical_config_text(const ModelConfig& config);
/// 64-bit FNV-1a of the canonical text.
std::uint64_t config_digest(const ModelConfig& config);
std::string digest_hex(std::uint64_t digest);

ModelConfig load_config(const std::filesystem::path& path);
void save_config(const ModelConfig& config, const std::filesystem::path& path);

}  // namespace iact::io
