#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "iact/core/tensor.hpp"

namespace iact::io {

inline constexpr char kEpisodeMagic[4] = {'I', 'A', 'C', 'T'};
inline constexpr std::uint32_t kEpisodeVersion = 1;
inline constexpr std::size_t kEpisodeHeaderBytes = 28;

/// One demonstration: per-step joint positions, commanded joint targets and
/// camera frames, all row-major float32.
struct DemoEpisode {
  std::uint32_t joints_per_arm = 0;
  std::uint32_t steps = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t channels = 0;
  std::vector<float> qpos;    // steps x 2J
  std::vector<float> action;  // steps x 2J
  std::vector<float> image;   // steps x H x W x C

  std::size_t action_dim() const { return 2 * std::size_t{joints_per_arm}; }
  std::size_t frame_size() const { return std::size_t{height} * width * channels; }
  std::span<const float> qpos_at(std::size_t t) const { return {qpos.data() + t * action_dim(), action_dim()}; }
  std::span<const float> action_at(std::size_t t) const {
    return {action.data() + t * action_dim(), action_dim()};
  }
  std::span<const float> frame_at(std::size_t t) const { return {image.data() + t * frame_size(), frame_size()}; }
  Tensor<float> image_at(std::size_t t) const;

  /// Throws DimensionError when array lengths disagree with the header.
  void validate() const;
  bool operator==(const DemoEpisode&) const = default;
};

/// Payload bytes that follow the header for the given dimensions.
std::uint64_t episode_payload_bytes(std::uint64_t joints_per_arm, std::uint64_t steps, std::uint64_t height,
                                    std::uint64_t width, std::uint64_t channels);

std::vector<std::uint8_t> encode_episode(const DemoEpisode& ep);
/// Throws FormatError on bad magic, version, zero dimensions or a byte length
/// that differs from the one implied by the header.
DemoEpisode decode_episode(std::span<const std::uint8_t> bytes);

void write_episode(const DemoEpisode& ep, const std::filesystem::path& path);
DemoEpisode read_episode(const std::filesystem::path& path);

}  // namespace iact::io
