#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "iact/core/parameters.hpp"
#include "iact/io/stats.hpp"
#include "iact/model/config.hpp"
#include "iact/policy/policy.hpp"

namespace iact::io {

inline constexpr char kCheckpointMagic[4] = {'I', 'A', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointTensor {
  std::string name;
  Shape shape;
  std::vector<float> data;
  bool operator==(const CheckpointTensor&) const = default;
};

/// Parameters (and normalization stats, under "stats.*") with the canonical
/// text of the config that produced them.
struct Checkpoint {
  std::uint64_t digest = 0;
  std::string config_text;
  std::vector<CheckpointTensor> tensors;
  bool operator==(const Checkpoint&) const = default;

  ModelConfig config() const;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
/// Throws FormatError on bad magic/version, truncation, trailing bytes, or a
/// digest that does not match the embedded config text.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

template <typename T>
Checkpoint make_checkpoint(const ModelConfig& config, const ParameterStore<T>& params, const NormStats* stats);

/// Copies every tensor into `params` (and `stats`). Throws ConfigError when the
/// checkpoint digest differs from `expected` unless `force`, and FormatError
/// when names or shapes do not line up.
template <typename T>
void restore(const Checkpoint& ckpt, const ModelConfig& expected, ParameterStore<T>& params, NormStats* stats,
             bool force = false);

/// Rebuilds the model from the embedded config and restores it.
Policy load_policy(const Checkpoint& ckpt);

}  // namespace iact::io
