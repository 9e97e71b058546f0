#include "iact/io/episode.hpp"

#include "iact/core/error.hpp"
#include "iact/io/binary.hpp"

namespace iact::io {

Tensor<float> DemoEpisode::image_at(std::size_t t) const {
  const auto f = frame_at(t);
  return Tensor<float>({height, width, channels}, std::vector<float>(f.begin(), f.end()));
}

void DemoEpisode::validate() const {
  const std::size_t n = std::size_t{steps} * action_dim();
  if (qpos.size() != n || action.size() != n) {
    throw DimensionError("episode: qpos/action length " + std::to_string(qpos.size()) + "/" +
                         std::to_string(action.size()) + ", header implies " + std::to_string(n));
  }
  if (image.size() != std::size_t{steps} * frame_size()) {
    throw DimensionError("episode: image length " + std::to_string(image.size()) + ", header implies " +
                         std::to_string(std::size_t{steps} * frame_size()));
  }
}

std::uint64_t episode_payload_bytes(std::uint64_t joints_per_arm, std::uint64_t steps, std::uint64_t height,
                                    std::uint64_t width, std::uint64_t channels) {
  const std::uint64_t joint_block = checked_mul(checked_mul(steps, 2 * joints_per_arm), 4);
  const std::uint64_t frames = checked_mul(checked_mul(checked_mul(checked_mul(steps, height), width), channels), 4);
  std::uint64_t total = 0;
  if (__builtin_add_overflow(2 * joint_block, frames, &total)) throw FormatError("declared size overflows 64 bits");
  return total;
}

std::vector<std::uint8_t> encode_episode(const DemoEpisode& ep) {
  ep.validate();
  ByteWriter w;
  w.bytes({kEpisodeMagic, 4});
  w.u32(kEpisodeVersion);
  w.u32(ep.joints_per_arm);
  w.u32(ep.steps);
  w.u32(ep.height);
  w.u32(ep.width);
  w.u32(ep.channels);
  w.f32s(ep.qpos);
  w.f32s(ep.action);
  w.f32s(ep.image);
  return w.take();
}

DemoEpisode decode_episode(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "episode");
  if (r.bytes(4) != std::string_view(kEpisodeMagic, 4)) r.fail("bad magic (expected IACT)");
  const std::uint32_t version = r.u32();
  if (version != kEpisodeVersion) {
    r.fail("unsupported version " + std::to_string(version) + " (expected " + std::to_string(kEpisodeVersion) + ")");
  }
  DemoEpisode ep;
  ep.joints_per_arm = r.u32();
  ep.steps = r.u32();
  ep.height = r.u32();
  ep.width = r.u32();
  ep.channels = r.u32();
  if (ep.joints_per_arm == 0 || ep.steps == 0 || ep.height == 0 || ep.width == 0 || ep.channels == 0) {
    r.fail("zero dimension in header");
  }
  const std::uint64_t expected = episode_payload_bytes(ep.joints_per_arm, ep.steps, ep.height, ep.width, ep.channels);
  if (expected != r.remaining()) {
    r.fail("payload length mismatch: header implies " + std::to_string(expected + kEpisodeHeaderBytes) +
           " bytes total, file has " + std::to_string(bytes.size()));
  }
  ep.qpos.resize(std::size_t{ep.steps} * ep.action_dim());
  ep.action.resize(ep.qpos.size());
  ep.image.resize(std::size_t{ep.steps} * ep.frame_size());
  r.f32s(ep.qpos);
  r.f32s(ep.action);
  r.f32s(ep.image);
  r.expect_end();
  return ep;
}

void write_episode(const DemoEpisode& ep, const std::filesystem::path& path) {
  write_file(path, encode_episode(ep));
}

DemoEpisode read_episode(const std::filesystem::path& path) {
  try {
    return decode_episode(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace iact::io
