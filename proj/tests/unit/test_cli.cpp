#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "cli.hpp"
#include "iact/io/binary.hpp"
#include "iact/io/config_io.hpp"

using namespace iact;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run iact_run(std::vector<std::string> args) {
  args.insert(args.begin(), "iact");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("iact_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Small model so CLI round trips stay fast.
fs::path tiny_config(const fs::path& dir) {
  fs::create_directories(dir);
  ModelConfig c = ModelConfig::desk();
  c.d_model = 8;
  c.ffn_dim = 8;
  c.stem_channels = 4;
  c.image_height = c.image_width = 16;
  c.chunk_size = 4;
  c.latent_dim = 2;
  c.steps = 3;
  io::save_config(c, dir / "tiny.json");
  return dir / "tiny.json";
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(iact_run({}).code == 2);
  CHECK(iact_run({"frobnicate"}).code == 2);
  CHECK(iact_run({"eval", "--bogus"}).code == 2);
  CHECK(iact_run({"gen-demos", "--out", scratch("u").string(), "--num", "0"}).code == 2);
  CHECK(iact_run({"gen-demos", "--out", scratch("u").string(), "--num", "-3"}).code == 2);
  CHECK(iact_run({"gen-demos", "--out", scratch("u").string(), "--task", "toy_stack"}).code == 2);
  const auto bad = iact_run({"train", "--data", ".", "--out", "x", "--ablate", "no-cls,no-foo"});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("no-cls, no-cross, no-sync") != std::string::npos);
  CHECK(iact_run({"ablate", "--data", ".", "--out", "x", "--variants", "full,half"}).code == 2);
  CHECK(iact_run({"--help"}).code == 0);
  CHECK(iact_run({"grad-check", "--help"}).code == 0);
}

TEST_CASE("gen-demos writes a reproducible dataset and guards its output") {
  const auto root = scratch("gen");
  const auto cfg = tiny_config(root);
  const auto a = root / "a", b = root / "b";
  for (const auto& dir : {a, b}) {
    const auto r = iact_run({"gen-demos", "--task", "toy_slot", "--num", "3", "--seed", "5", "--out", dir.string(),
                             "--config", cfg.string()});
    REQUIRE(r.code == 0);
  }
  for (const char* f : {"episode_0000.iact", "episode_0002.iact", "manifest.json", "config.json"}) {
    CHECK(slurp(a / f) == slurp(b / f));
  }
  const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
  CHECK(manifest["task"] == "toy_slot");
  CHECK(manifest["seeds"] == nlohmann::json::array({5, 6, 7}));
  CHECK(manifest["config_digest"].get<std::string>().size() == 16);

  const auto again = iact_run({"gen-demos", "--num", "2", "--out", a.string()});
  CHECK(again.code == 1);
  CHECK(again.err.find("--force") != std::string::npos);
  CHECK(iact_run({"gen-demos", "--num", "2", "--out", a.string(), "--force", "--config", cfg.string()}).code == 0);
  CHECK_FALSE(fs::exists(a / "episode_0002.iact"));
}

TEST_CASE("train, eval, attn-trace round trip") {
  const auto root = scratch("pipeline");
  const auto cfg = tiny_config(root);
  const auto data = root / "demos";
  REQUIRE(iact_run({"gen-demos", "--num", "2", "--out", data.string(), "--config", cfg.string()}).code == 0);

  const auto run = root / "run";
  REQUIRE(iact_run({"train", "--data", data.string(), "--config", cfg.string(), "--out", run.string()}).code == 0);
  for (const char* f : {"checkpoint.iapt", "metrics.jsonl", "config.json", "train_summary.json"}) {
    CHECK(fs::exists(run / f));
  }
  std::ifstream metrics(run / "metrics.jsonl");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(metrics, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("l1"));
    ++lines;
  }
  CHECK(lines == 3);

  const auto ev = root / "eval";
  const auto ckpt = (run / "checkpoint.iapt").string();
  const auto r = iact_run({"eval", "--ckpt", ckpt, "--episodes", "2", "--seed", "3", "--out", ev.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("Transfer") != std::string::npos);
  const auto results = nlohmann::json::parse(slurp(ev / "results.json"));
  CHECK(results["episodes"] == 2);
  CHECK(results["per_episode"].size() == 2);
  CHECK(results["per_episode"][1]["seed"] == 4);
  CHECK(fs::exists(ev / "config.json"));

  // Wrong config: digest mismatch unless forced.
  ModelConfig other = io::load_config(cfg);
  other.ensemble_decay = 0.5;
  io::save_config(other, root / "other.json");
  const auto mismatch = iact_run({"eval", "--ckpt", ckpt, "--episodes", "1", "--config", (root / "other.json").string()});
  CHECK(mismatch.code == 1);
  CHECK(mismatch.err.find("digest") != std::string::npos);
  CHECK(iact_run({"eval", "--ckpt", ckpt, "--episodes", "1", "--config", (root / "other.json").string(), "--force"})
            .code == 0);

  const auto csv = root / "trace.csv";
  REQUIRE(iact_run({"attn-trace", "--ckpt", ckpt, "--episode", (data / "episode_0000.iact").string(), "--out",
                    csv.string()})
              .code == 0);
  std::ifstream in(csv);
  std::getline(in, line);
  CHECK(line == "t,arm,layer,head,cls_mass");
  std::getline(in, line);
  CHECK(line.rfind("0,1,0,0,", 0) == 0);

  const auto nocls = root / "nocls";
  REQUIRE(iact_run({"train", "--data", data.string(), "--config", cfg.string(), "--out", nocls.string(), "--ablate",
                    "no-cls"})
              .code == 0);
  const auto refused = iact_run({"attn-trace", "--ckpt", (nocls / "checkpoint.iapt").string(), "--episode",
                                 (data / "episode_0000.iact").string(), "--out", (root / "x.csv").string()});
  CHECK(refused.code == 1);
  CHECK(refused.err.find("no-cls") != std::string::npos);
}

TEST_CASE("eval with a baseline controller needs no checkpoint") {
  const auto r = iact_run({"eval", "--controller", "scripted", "--task", "toy_slot", "--episodes", "3"});
  CHECK(r.code == 0);
  CHECK(r.out.find("100.0") != std::string::npos);
  CHECK(iact_run({"eval", "--episodes", "1"}).code == 1);  // policy controller without --ckpt
}

TEST_CASE("runtime failures exit with 1") {
  const auto root = scratch("fail");
  CHECK(iact_run({"train", "--data", (root / "nothing").string(), "--out", (root / "o").string()}).code == 1);
  fs::create_directories(root / "junk");
  std::ofstream(root / "junk" / "episode_0000.iact") << "not an episode";
  const auto r = iact_run({"train", "--data", (root / "junk").string(), "--out", (root / "o").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("error:") != std::string::npos);
}

TEST_CASE("grad-check exit status follows the threshold") {
  const auto root = scratch("gc");
  const auto cfg = tiny_config(root);
  // The reduced model has gradients near 1e-5 whose central-difference
  // truncation error alone reaches a few 1e-4, so this plumbing test uses a
  // looser bar; the injected fault is two orders of magnitude above it.
  const auto ok = iact_run({"grad-check", "--config", cfg.string(), "--coords", "2", "--threshold", "1e-3", "--out",
                            (root / "o").string()});
  CHECK(ok.code == 0);
  CHECK(ok.out.find("max relative error") != std::string::npos);
  CHECK(fs::exists(root / "o" / "gradcheck.json"));
  const auto bad =
      iact_run({"grad-check", "--config", cfg.string(), "--coords", "2", "--threshold", "1e-3", "--inject-fault"});
  CHECK(bad.code == 1);
  CHECK(bad.out.find("FAILED") != std::string::npos);
}
