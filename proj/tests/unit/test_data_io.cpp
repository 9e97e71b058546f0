#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <json.hpp>

#include "helpers.hpp"
#include "iact/core/error.hpp"
#include "iact/core/hash.hpp"
#include "iact/io/binary.hpp"
#include "iact/io/checkpoint.hpp"
#include "iact/io/config_io.hpp"
#include "iact/io/episode.hpp"
#include "iact/io/stats.hpp"
#include "iact/policy/policy.hpp"

using namespace iact;
namespace fs = std::filesystem;

namespace {

io::DemoEpisode random_episode(Rng& rng, std::uint32_t j, std::uint32_t steps, std::uint32_t h, std::uint32_t w,
                               std::uint32_t c) {
  io::DemoEpisode ep;
  ep.joints_per_arm = j;
  ep.steps = steps;
  ep.height = h;
  ep.width = w;
  ep.channels = c;
  for (std::size_t i = 0; i < std::size_t{steps} * 2 * j; ++i) {
    ep.qpos.push_back(static_cast<float>(rng.normal()));
    ep.action.push_back(static_cast<float>(rng.normal()));
  }
  for (std::size_t i = 0; i < std::size_t{steps} * h * w * c; ++i) ep.image.push_back(static_cast<float>(rng.uniform()));
  return ep;
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("iact_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

/// Feeds truncated and byte-mutated copies of `good` to `decode`; every
/// outcome must be either a successful decode or a FormatError.
template <typename Decode>
std::size_t fuzz(const std::vector<std::uint8_t>& good, Decode decode, Rng& rng, std::size_t cases) {
  std::size_t rejected = 0;
  for (std::size_t i = 0; i < cases; ++i) {
    std::vector<std::uint8_t> bad = good;
    switch (i % 4) {
      case 0: bad.resize(rng.below(good.size())); break;
      case 1: bad[rng.below(bad.size())] ^= static_cast<std::uint8_t>(1 + rng.below(255)); break;
      case 2: {
        // Mutate a header byte, where lengths and dimensions live.
        bad[rng.below(std::min<std::size_t>(bad.size(), 64))] = static_cast<std::uint8_t>(rng.below(256));
        break;
      }
      default: bad.push_back(static_cast<std::uint8_t>(rng.below(256))); break;
    }
    try {
      decode(bad);
    } catch (const FormatError&) {
      ++rejected;
    }
  }
  return rejected;
}

}  // namespace

TEST_CASE("episode encoding round-trips byte-exactly") {
  Rng rng(61);
  const auto ep = random_episode(rng, 4, 7, 8, 6, 2);
  const auto bytes = io::encode_episode(ep);
  CHECK(bytes.size() == io::kEpisodeHeaderBytes + io::episode_payload_bytes(4, 7, 8, 6, 2));
  const auto back = io::decode_episode(bytes);
  CHECK(back == ep);
  CHECK(io::encode_episode(back) == bytes);

  const auto dir = temp_dir("episode");
  io::write_episode(ep, dir / "e.iact");
  CHECK(io::read_file(dir / "e.iact") == bytes);
  CHECK(io::read_episode(dir / "e.iact") == ep);
  CHECK_THROWS_AS(io::read_episode(dir / "missing.iact"), Error);
  CHECK(ep.image_at(3).shape() == Shape{8, 6, 2});
}

TEST_CASE("episode decoder rejects malformed input with format errors") {
  Rng rng(62);
  const auto bytes = io::encode_episode(random_episode(rng, 2, 3, 4, 4, 1));
  CHECK_THROWS_AS(io::decode_episode(std::span(bytes).first(10)), FormatError);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(io::decode_episode(bad_magic), FormatError);
  auto bad_version = bytes;
  bad_version[4] = 9;
  CHECK_THROWS_AS(io::decode_episode(bad_version), FormatError);
  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(io::decode_episode(trailing), FormatError);
  // Huge declared dimensions must not allocate or overflow.
  auto huge = bytes;
  for (std::size_t i = 8; i < 28; ++i) huge[i] = 0xff;
  CHECK_THROWS_AS(io::decode_episode(huge), FormatError);
  try {
    io::decode_episode(std::span(bytes).first(bytes.size() - 1));
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("byte") != std::string::npos);
  }
}

TEST_CASE("episode fuzzing: 1200 truncations and mutations never crash") {
  Rng rng(63);
  const auto bytes = io::encode_episode(random_episode(rng, 4, 5, 8, 8, 1));
  const std::size_t rejected = fuzz(bytes, [](const auto& b) { io::decode_episode(b); }, rng, 1200);
  CHECK(rejected >= 600);  // truncation and appended bytes always fail
}

TEST_CASE("checkpoint round-trips and restores parameters and stats") {
  ModelConfig c = test::quiet_desk();
  c.seed = 3;
  InterActModel<float> a(c);
  Rng rng(64);
  io::NormStats stats;
  for (std::size_t i = 0; i < c.action_dim(); ++i) {
    stats.qpos_mean.push_back(static_cast<float>(rng.normal()));
    stats.qpos_std.push_back(static_cast<float>(rng.uniform(0.5, 2)));
    stats.action_mean.push_back(static_cast<float>(rng.normal()));
    stats.action_std.push_back(static_cast<float>(rng.uniform(0.5, 2)));
  }
  const auto ckpt = io::make_checkpoint(c, a.params(), &stats);
  const auto bytes = io::encode_checkpoint(ckpt);
  CHECK(io::decode_checkpoint(bytes) == ckpt);
  CHECK(io::encode_checkpoint(io::decode_checkpoint(bytes)) == bytes);
  CHECK(ckpt.config() == c);

  ModelConfig other = c;
  other.seed = 4;  // different init, same digest apart from the seed
  InterActModel<float> b(other);
  io::NormStats restored;
  CHECK_THROWS_AS(io::restore(ckpt, other, b.params(), &restored), ConfigError);
  io::restore(ckpt, other, b.params(), &restored, /*force=*/true);
  for (const auto& [name, p] : a.params()) CHECK(b.params().at(name).value == p.value);
  CHECK(restored == stats);

  const auto dir = temp_dir("ckpt");
  io::save_checkpoint(ckpt, dir / "m.iapt");
  CHECK(io::read_file(dir / "m.iapt") == bytes);
  const Policy p = io::load_policy(io::load_checkpoint(dir / "m.iapt"));
  CHECK(p.config() == c);
  CHECK(p.stats() == stats);
}

TEST_CASE("64-bit parameters are stored as 32-bit floats") {
  ModelConfig c = test::quiet_desk();
  c.precision = Precision::kF64;
  InterActModel<double> m(c);
  const auto ckpt = io::make_checkpoint(c, m.params(), nullptr);
  InterActModel<float> f(c);
  io::restore(ckpt, c, f.params(), nullptr);
  const auto& w = m.params().at("dec.arm1.head.w").value;
  CHECK(f.params().at("dec.arm1.head.w").value[0] == static_cast<float>(w[0]));
}

TEST_CASE("checkpoint decoder rejects mismatched tensors and corrupt files") {
  ModelConfig c = test::quiet_desk();
  InterActModel<float> m(c);
  auto ckpt = io::make_checkpoint(c, m.params(), nullptr);
  auto renamed = ckpt;
  renamed.tensors[0].name = "bogus";
  CHECK_THROWS_AS(io::restore(renamed, c, m.params(), nullptr), FormatError);
  auto reshaped = ckpt;
  reshaped.tensors[0].shape = {1, reshaped.tensors[0].data.size()};
  if (reshaped.tensors[0].shape != ckpt.tensors[0].shape) {
    CHECK_THROWS_AS(io::restore(reshaped, c, m.params(), nullptr), FormatError);
  }
  auto tampered = io::encode_checkpoint(ckpt);
  tampered[20] ^= 1;  // inside the config text: digest no longer matches
  CHECK_THROWS_AS(io::decode_checkpoint(tampered), FormatError);
}

TEST_CASE("checkpoint fuzzing: 1200 truncations and mutations never crash") {
  ModelConfig c = test::quiet_desk();
  c.d_model = 8;
  c.ffn_dim = 8;
  InterActModel<float> m(c);
  const auto bytes = io::encode_checkpoint(io::make_checkpoint(c, m.params(), nullptr));
  Rng rng(65);
  const std::size_t rejected = fuzz(bytes, [](const auto& b) { io::decode_checkpoint(b); }, rng, 1200);
  CHECK(rejected >= 600);
}

TEST_CASE("normalization stats match a two-pass computation") {
  Rng rng(66);
  std::vector<io::DemoEpisode> eps;
  for (int i = 0; i < 4; ++i) eps.push_back(random_episode(rng, 3, 5 + i, 2, 2, 1));
  for (auto& ep : eps)
    for (std::size_t t = 0; t < ep.steps; ++t) ep.qpos[t * 6 + 5] = 2.5f;  // constant column
  const auto s = io::compute_stats(eps);

  for (std::size_t d = 0; d < 6; ++d) {
    double sum = 0, n = 0;
    for (const auto& ep : eps)
      for (std::size_t t = 0; t < ep.steps; ++t) {
        sum += ep.qpos_at(t)[d];
        ++n;
      }
    const double mean = sum / n;
    double sq = 0;
    for (const auto& ep : eps)
      for (std::size_t t = 0; t < ep.steps; ++t) sq += std::pow(ep.qpos_at(t)[d] - mean, 2);
    const double sd = std::max(std::sqrt(sq / n), io::kStdFloor);
    CHECK(s.qpos_mean[d] == doctest::Approx(mean).epsilon(1e-6));
    CHECK(s.qpos_std[d] == doctest::Approx(sd).epsilon(1e-5));
  }
  CHECK(s.qpos_std[5] == doctest::Approx(io::kStdFloor));

  const std::vector<float> a = {0.1f, -2.f, 3.f, 0.f, 1.f, 5.f};
  const auto round = s.denormalize_action(s.normalize_action(a));
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(round[i] == doctest::Approx(a[i]).epsilon(1e-5));
  CHECK_THROWS_AS(io::compute_stats(std::span<const io::DemoEpisode>{}), UsageError);
  eps.push_back(random_episode(rng, 2, 3, 2, 2, 1));
  CHECK_THROWS_AS(io::compute_stats(eps), DimensionError);
}

TEST_CASE("config JSON round-trips and rejects unknown keys") {
  ModelConfig c = ModelConfig::desk();
  c.ablation.no_sync = true;
  c.stacking = Stacking::kSequential;
  c.precision = Precision::kF64;
  c.seed = 99;
  c.cls_counts = {3, 1, 0};
  CHECK(io::config_from_json(io::config_to_json(c)) == c);
  CHECK(io::config_from_json(io::config_to_json(ModelConfig::paper())) == ModelConfig::paper());

  const auto dir = temp_dir("config");
  io::save_config(c, dir / "c.json");
  CHECK(io::load_config(dir / "c.json") == c);

  auto doc = io::config_to_json(c);
  doc["model"]["d_modle"] = 16;
  CHECK_THROWS_AS(io::config_from_json(doc), ConfigError);
  auto bad = io::config_to_json(c);
  bad["model"]["n_heads"] = 3;  // 32 not divisible by 3
  CHECK_THROWS_AS(io::config_from_json(bad), ConfigError);
  CHECK_THROWS_AS(io::config_from_json(nlohmann::json{{"profile", "huge"}}), ConfigError);
  // A partial document starts from its profile.
  CHECK(io::config_from_json(nlohmann::json{{"profile", "paper"}}) == ModelConfig::paper());
}

TEST_CASE("config digest is stable and sensitive") {
  const ModelConfig a = ModelConfig::desk();
  ModelConfig b = a;
  CHECK(io::config_digest(a) == io::config_digest(b));
  b.ensemble_decay = 0.02;
  CHECK(io::config_digest(a) != io::config_digest(b));
  CHECK(io::digest_hex(0x1234) == "0000000000001234");
  const auto text = io::canonical_config_text(a);
  CHECK(io::config_digest(a) == fnv1a64(text));
  CHECK(text.find('\n') == std::string::npos);
}

TEST_CASE("byte reader bounds and overflow checks") {
  const std::vector<std::uint8_t> data = {1, 0, 0, 0, 2};
  io::ByteReader r(data, "test");
  CHECK(r.u32() == 1);
  CHECK_THROWS_AS(r.u32(), FormatError);
  CHECK_THROWS_AS(r.expect_end(), FormatError);
  CHECK_THROWS_AS(io::checked_mul(1ULL << 40, 1ULL << 40), FormatError);
  CHECK(io::checked_mul(3, 5) == 15);
  io::ByteWriter w;
  w.u64(0x0102030405060708ULL);
  CHECK(w.data().front() == 0x08);
}
