#include "iact/io/checkpoint.hpp"

#include <json.hpp>

#include "iact/core/error.hpp"
#include "iact/core/hash.hpp"
#include "iact/io/binary.hpp"
#include "iact/io/config_io.hpp"

namespace iact::io {
namespace {

constexpr std::uint32_t kMaxNameLength = 1 << 12;
constexpr std::uint32_t kMaxRank = 8;

const char* const kStatNames[4] = {"stats.qpos_mean", "stats.qpos_std", "stats.action_mean", "stats.action_std"};

std::vector<float>* stat_field(NormStats& s, std::size_t i) {
  std::vector<float>* fields[4] = {&s.qpos_mean, &s.qpos_std, &s.action_mean, &s.action_std};
  return fields[i];
}

}  // namespace

ModelConfig Checkpoint::config() const {
  try {
    return config_from_json(nlohmann::json::parse(config_text));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint config text: ") + e.what());
  }
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  ByteWriter w;
  w.bytes({kCheckpointMagic, 4});
  w.u32(kCheckpointVersion);
  w.u64(ckpt.digest);
  w.u32(static_cast<std::uint32_t>(ckpt.config_text.size()));
  w.bytes(ckpt.config_text);
  w.u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    if (shape_volume(t.shape) != t.data.size()) throw DimensionError("checkpoint tensor " + t.name + ": shape/data mismatch");
    w.u32(static_cast<std::uint32_t>(t.name.size()));
    w.bytes(t.name);
    w.u32(static_cast<std::uint32_t>(t.shape.size()));
    for (std::size_t e : t.shape) w.u32(static_cast<std::uint32_t>(e));
    w.f32s(t.data);
  }
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "checkpoint");
  if (r.bytes(4) != std::string_view(kCheckpointMagic, 4)) r.fail("bad magic (expected IAPT)");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) r.fail("unsupported version " + std::to_string(version));
  Checkpoint c;
  c.digest = r.u64();
  const std::uint32_t text_len = r.u32();
  c.config_text = r.bytes(text_len);
  if (fnv1a64(c.config_text) != c.digest) r.fail("config digest does not match the embedded config text");
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointTensor t;
    const std::uint32_t name_len = r.u32();
    if (name_len == 0 || name_len > kMaxNameLength) r.fail("bad tensor name length " + std::to_string(name_len));
    t.name = r.bytes(name_len);
    const std::uint32_t rank = r.u32();
    if (rank == 0 || rank > kMaxRank) r.fail("bad rank " + std::to_string(rank) + " for " + t.name);
    std::uint64_t volume = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      const std::uint32_t e = r.u32();
      if (e == 0) r.fail("zero extent in " + t.name);
      t.shape.push_back(e);
      volume = checked_mul(volume, e);
    }
    if (checked_mul(volume, 4) > r.remaining()) {
      r.fail("tensor " + t.name + " declares " + std::to_string(volume) + " floats, " +
             std::to_string(r.remaining()) + " bytes remain");
    }
    t.data.resize(volume);
    r.f32s(t.data);
    c.tensors.push_back(std::move(t));
  }
  r.expect_end();
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return decode_checkpoint(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

template <typename T>
Checkpoint make_checkpoint(const ModelConfig& config, const ParameterStore<T>& params, const NormStats* stats) {
  Checkpoint c;
  c.config_text = canonical_config_text(config);
  c.digest = fnv1a64(c.config_text);
  for (const auto& [name, p] : params) {
    c.tensors.push_back({name, p.value.shape(), std::vector<float>(p.value.storage().begin(), p.value.storage().end())});
  }
  if (stats != nullptr && !stats->empty()) {
    NormStats copy = *stats;
    for (std::size_t i = 0; i < 4; ++i) {
      const auto& v = *stat_field(copy, i);
      c.tensors.push_back({kStatNames[i], {v.size()}, v});
    }
  }
  return c;
}

template <typename T>
void restore(const Checkpoint& ckpt, const ModelConfig& expected, ParameterStore<T>& params, NormStats* stats,
             bool force) {
  const std::uint64_t want = config_digest(expected);
  if (ckpt.digest != want && !force) {
    throw ConfigError("checkpoint config digest " + digest_hex(ckpt.digest) + " does not match config digest " +
                      digest_hex(want) + " (use force to override)");
  }
  std::size_t restored = 0;
  NormStats loaded;
  std::size_t stat_count = 0;
  for (const auto& t : ckpt.tensors) {
    bool is_stat = false;
    for (std::size_t i = 0; i < 4; ++i) {
      if (t.name == kStatNames[i]) {
        *stat_field(loaded, i) = t.data;
        ++stat_count;
        is_stat = true;
      }
    }
    if (is_stat) continue;
    if (!params.contains(t.name)) throw FormatError("checkpoint tensor '" + t.name + "' has no matching parameter");
    Parameter<T>& p = params.at(t.name);
    if (p.value.shape() != t.shape) {
      throw FormatError("checkpoint tensor '" + t.name + "' has shape " + shape_string(t.shape) + ", model expects " +
                        shape_string(p.value.shape()));
    }
    for (std::size_t i = 0; i < t.data.size(); ++i) p.value[i] = static_cast<T>(t.data[i]);
    ++restored;
  }
  if (restored != params.size()) {
    throw FormatError("checkpoint holds " + std::to_string(restored) + " of " + std::to_string(params.size()) +
                      " model parameters");
  }
  if (stat_count != 0 && stat_count != 4) throw FormatError("checkpoint has incomplete normalization stats");
  if (stats != nullptr && stat_count == 4) *stats = std::move(loaded);
}

Policy load_policy(const Checkpoint& ckpt) {
  const ModelConfig config = ckpt.config();
  InterActModel<float> model(config);
  NormStats stats;
  restore(ckpt, config, model.params(), &stats, false);
  return Policy(std::move(model), stats.empty() ? std::nullopt : std::optional<NormStats>(stats));
}

template Checkpoint make_checkpoint(const ModelConfig&, const ParameterStore<float>&, const NormStats*);
template Checkpoint make_checkpoint(const ModelConfig&, const ParameterStore<double>&, const NormStats*);
template void restore(const Checkpoint&, const ModelConfig&, ParameterStore<float>&, NormStats*, bool);
template void restore(const Checkpoint&, const ModelConfig&, ParameterStore<double>&, NormStats*, bool);

}  // namespace iact::io
