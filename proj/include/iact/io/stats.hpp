#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "iact/io/episode.hpp"

namespace iact::io {

inline constexpr double kStdFloor = 1e-6;

/// Per-dimension mean and population standard deviation of joint positions
/// and actions over every timestep of a dataset.
struct NormStats {
  std::vector<float> qpos_mean, qpos_std;
  std::vector<float> action_mean, action_std;

  std::size_t dim() const { return qpos_mean.size(); }
  bool empty() const { return qpos_mean.empty(); }

  std::vector<float> normalize_qpos(std::span<const float> q) const;
  std::vector<float> normalize_action(std::span<const float> a) const;
  std::vector<float> denormalize_action(std::span<const float> a) const;
  bool operator==(const NormStats&) const = default;
};

/// Single streaming pass (Welford) over all episodes. Throws UsageError for an
/// empty dataset and DimensionError for inconsistent joint counts.
NormStats compute_stats(std::span<const DemoEpisode> episodes);
NormStats compute_stats(const std::vector<std::filesystem::path>& paths);

}  // namespace iact::io
