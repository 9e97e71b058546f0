#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "iact/core/error.hpp"
#include "iact/io/checkpoint.hpp"
#include "iact/io/config_io.hpp"
#include "iact/io/episode.hpp"
#include "iact/io/stats.hpp"
#include "iact/policy/gradcheck_model.hpp"
#include "iact/policy/trainer.hpp"
#include "iact/sim/controller.hpp"

namespace iact::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string> kAblationNames = {"no-cls", "no-cross", "no-sync"};
const std::vector<std::string> kVariantNames = {"full", "no-cls", "no-cross", "no-sync"};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

const CLI::Validator kAtLeastOne(
    [](std::string& value) -> std::string {
      try {
        if (std::stoll(value) >= 1) return {};
      } catch (const std::exception&) {
      }
      return "must be a positive integer, got '" + value + "'";
    },
    "POSITIVE");

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
  return s;
}

/// CLI11 validator for comma-separated names drawn from `valid`.
CLI::Validator name_list(const std::vector<std::string>& valid, const std::string& what) {
  return CLI::Validator(
      [valid, what](std::string& value) -> std::string {
        for (const auto& n : split_list(value)) {
          if (std::find(valid.begin(), valid.end(), n) == valid.end()) {
            return "invalid " + what + " '" + n + "' (valid: " + join(valid) + ")";
          }
        }
        return {};
      },
      "LIST");
}

void apply_ablation(ModelConfig& c, const std::string& list) {
  for (const auto& n : split_list(list)) {
    if (n == "no-cls") c.ablation.no_cls = true;
    if (n == "no-cross") c.ablation.no_cross = true;
    if (n == "no-sync") c.ablation.no_sync = true;
  }
}

struct Common {
  std::string config_path;
  std::string profile = "desk";
  std::optional<std::uint64_t> seed;
  std::string out;

  void add(CLI::App* cmd, bool out_required) {
    cmd->add_option("--config", config_path, "Config file (overrides --profile)")->check(CLI::ExistingFile);
    cmd->add_option("--profile", profile, "Named profile")->check(CLI::IsMember({"paper", "desk"}));
    cmd->add_option("--seed", seed, "Seed");
    auto* o = cmd->add_option("--out", out, "Output path");
    if (out_required) o->required();
  }

  ModelConfig resolve() const {
    ModelConfig c = config_path.empty() ? ModelConfig::named(profile) : io::load_config(config_path);
    if (seed) c.seed = *seed;
    c.validate();
    return c;
  }
};

void write_json(const fs::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

/// Output directory that must be absent or empty unless `force`.
void prepare_out_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw Error(dir.string() + " exists and is not a directory");
    if (!fs::is_empty(dir) && !force) throw Error(dir.string() + " is not empty (pass --force to overwrite)");
  }
  fs::create_directories(dir);
}

std::vector<fs::path> episode_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("dataset directory " + dir.string() + " does not exist");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".iact") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error("no .iact episodes in " + dir.string());
  return files;
}

std::vector<io::DemoEpisode> load_dataset(const fs::path& dir) {
  std::vector<io::DemoEpisode> eps;
  for (const auto& f : episode_files(dir)) eps.push_back(io::read_episode(f));
  return eps;
}

void check_task_config(const ModelConfig& c) {
  if (c.joints_per_arm != sim::kJointsPerArm) {
    throw DimensionError("config has " + std::to_string(c.joints_per_arm) + " joints per arm, the toy tasks have " +
                         std::to_string(sim::kJointsPerArm));
  }
  if (c.use_visual && c.image_channels != 1) throw DimensionError("the toy renderer produces one channel");
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------- training

struct TrainResult {
  io::Checkpoint checkpoint;
  double initial_l1 = 0.0;
  double smoothed_l1 = 0.0;
  double wall_ms = 0.0;
  std::size_t steps = 0;
};

/// Trailing mean of the last `window` L1 values.
double tail_mean(const std::vector<double>& v, std::size_t window) {
  const std::size_t n = std::min(window, v.size());
  double s = 0;
  for (std::size_t i = v.size() - n; i < v.size(); ++i) s += v[i];
  return n ? s / static_cast<double>(n) : 0.0;
}

template <typename T>
TrainResult train_model(const ModelConfig& c, const std::vector<io::DemoEpisode>& eps, const fs::path& out_dir,
                        std::ostream& log, bool quiet) {
  const io::NormStats stats = io::compute_stats(eps);
  InterActModel<T> model(c);
  Trainer<T> trainer(model, eps, stats);
  std::ofstream metrics(out_dir / "metrics.jsonl");
  if (!metrics) throw Error("cannot write " + (out_dir / "metrics.jsonl").string());
  std::vector<double> l1s;
  TrainResult r;
  for (std::size_t s = 0; s < c.steps; ++s) {
    const StepMetrics m = trainer.step();
    l1s.push_back(m.l1);
    metrics << json{{"step", m.step}, {"l1", m.l1}, {"kl", m.kl}, {"total", m.total}, {"wall_ms", m.wall_ms}}.dump()
            << '\n';
    r.wall_ms = m.wall_ms;
    if (!quiet && (m.step % 100 == 0 || m.step == 1 || m.step == c.steps)) {
      log << "step " << m.step << "  l1 " << fmt("%.5f", m.l1) << "  kl " << fmt("%.5f", m.kl) << "  total "
          << fmt("%.5f", m.total) << "  " << fmt("%.0f", m.wall_ms) << " ms\n";
    }
    if (c.checkpoint_interval > 0 && m.step % c.checkpoint_interval == 0 && m.step != c.steps) {
      io::save_checkpoint(io::make_checkpoint(c, model.params(), &stats),
                          out_dir / ("checkpoint_" + std::to_string(m.step) + ".iapt"));
    }
  }
  r.checkpoint = io::make_checkpoint(c, model.params(), &stats);
  io::save_checkpoint(r.checkpoint, out_dir / "checkpoint.iapt");
  r.steps = c.steps;
  r.initial_l1 = l1s.empty() ? 0.0 : l1s.front();
  r.smoothed_l1 = tail_mean(l1s, 100);
  write_json(out_dir / "train_summary.json", {{"steps", r.steps},
                                              {"initial_l1", r.initial_l1},
                                              {"smoothed_final_l1", r.smoothed_l1},
                                              {"smoothing_window", 100},
                                              {"wall_ms", r.wall_ms}});
  return r;
}

TrainResult train_any(const ModelConfig& c, const std::vector<io::DemoEpisode>& eps, const fs::path& out_dir,
                      std::ostream& log, bool quiet = false) {
  io::save_config(c, out_dir / "config.json");
  return c.precision == Precision::kF64 ? train_model<double>(c, eps, out_dir, log, quiet)
                                        : train_model<float>(c, eps, out_dir, log, quiet);
}

// -------------------------------------------------------------- evaluation

json report_json(const sim::EvalReport& rep) {
  json stages = json::object();
  const auto rates = rep.rates();
  for (std::size_t i = 0; i < rates.size(); ++i) stages[rep.stage_names[i]] = rates[i];
  json per = json::array();
  for (const auto& e : rep.episodes) {
    json st = json::object();
    for (std::size_t i = 0; i < e.stages.size(); ++i) st[rep.stage_names[i]] = static_cast<bool>(e.stages[i]);
    per.push_back({{"seed", e.seed}, {"length", e.length}, {"stages", st}});
  }
  return {{"task", rep.task}, {"episodes", rep.episodes.size()}, {"seed", rep.seed}, {"stages", stages},
          {"per_episode", per}};
}

void print_table(std::ostream& out, const std::vector<std::string>& stage_names,
                 const std::vector<std::pair<std::string, std::vector<double>>>& rows) {
  std::size_t w = 8;
  for (const auto& r : rows) w = std::max(w, r.first.size() + 2);
  std::string line(w, ' ');
  out << std::string(w, ' ');
  for (const auto& s : stage_names) out << s << std::string(s.size() < 10 ? 10 - s.size() : 1, ' ');
  out << '\n';
  for (const auto& [name, vals] : rows) {
    out << name << std::string(w - name.size(), ' ');
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const std::string v = fmt("%.1f", vals[i]);
      const std::size_t col = std::max<std::size_t>(stage_names[i].size(), 9) + 1;
      out << v << std::string(col > v.size() ? col - v.size() : 1, ' ');
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------- commands

int cmd_gen_demos(const Common& common, const std::string& task_name, std::size_t num, double noise, bool force,
                  std::ostream& out) {
  const ModelConfig c = common.resolve();
  check_task_config(c);
  const sim::TaskSpec task = sim::TaskSpec::named(task_name);
  const fs::path dir = common.out;
  prepare_out_dir(dir, force);
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto ext = e.path().extension();
    if (ext == ".iact" || e.path().filename() == "manifest.json") fs::remove(e.path());
  }
  sim::ScriptedController demo(task, noise);
  json files = json::array(), seeds = json::array(), success = json::array();
  std::size_t ok = 0;
  for (std::size_t i = 0; i < num; ++i) {
    const std::uint64_t seed = c.seed + i;
    sim::StageOutcome outcome;
    const io::DemoEpisode ep = sim::record_episode(demo, task, seed, c.image_height, c.image_width, &outcome);
    char name[32];
    std::snprintf(name, sizeof name, "episode_%04zu.iact", i);
    io::write_episode(ep, dir / name);
    files.push_back(name);
    seeds.push_back(seed);
    success.push_back(static_cast<bool>(outcome.stages.back()));
    ok += outcome.stages.back();
  }
  write_json(dir / "manifest.json", {{"task", task.name},
                                     {"num", num},
                                     {"noise", noise},
                                     {"seed", c.seed},
                                     {"seeds", seeds},
                                     {"config_digest", io::digest_hex(io::config_digest(c))},
                                     {"episodes", files},
                                     {"final_stage_success", success}});
  io::save_config(c, dir / "config.json");
  out << "wrote " << num << " " << task.name << " episodes to " << dir.string() << " (" << ok << "/" << num
      << " reached " << task.stages.back() << ")\n";
  return 0;
}

int cmd_train(const Common& common, const std::string& data, const std::string& ablate,
              std::optional<std::size_t> steps, std::ostream& out) {
  ModelConfig c = common.resolve();
  apply_ablation(c, ablate);
  if (steps) c.steps = *steps;
  c.validate();
  const auto eps = load_dataset(data);
  const fs::path dir = common.out;
  fs::create_directories(dir);
  const TrainResult r = train_any(c, eps, dir, out);
  out << "trained " << r.steps << " steps on " << eps.size() << " episodes: l1 " << fmt("%.5f", r.initial_l1)
      << " -> " << fmt("%.5f", r.smoothed_l1) << " (trailing mean), checkpoint " << (dir / "checkpoint.iapt").string()
      << "\n";
  return 0;
}

sim::EvalReport run_eval(const Policy* policy, const std::string& controller, const sim::TaskSpec& task,
                         std::size_t episodes, std::uint64_t seed, double noise) {
  if (controller == "scripted") {
    sim::ScriptedController c(task, noise);
    return sim::evaluate(c, task, episodes, seed);
  }
  if (controller == "random") {
    sim::RandomController c;
    return sim::evaluate(c, task, episodes, seed);
  }
  sim::PolicyController c(*policy);
  return sim::evaluate(c, task, episodes, seed);
}

int cmd_eval(const Common& common, const std::string& ckpt, const std::string& task_name, std::size_t episodes,
             const std::string& controller, double noise, bool force, std::ostream& out) {
  const sim::TaskSpec task = sim::TaskSpec::named(task_name);
  const std::uint64_t seed = common.seed.value_or(0);
  std::optional<Policy> policy;
  ModelConfig resolved;
  if (controller == "policy") {
    if (ckpt.empty()) throw UsageError("eval: --ckpt is required for the learned policy");
    const io::Checkpoint cp = io::load_checkpoint(ckpt);
    resolved = cp.config();
    if (!common.config_path.empty()) {
      const ModelConfig expected = common.resolve();
      io::NormStats stats;
      InterActModel<float> model(expected);
      io::restore(cp, expected, model.params(), &stats, force);
      resolved = expected;
      policy.emplace(std::move(model), stats);
    } else {
      policy.emplace(io::load_policy(cp));
    }
    check_task_config(resolved);
  } else {
    resolved = common.resolve();
  }
  const sim::EvalReport rep = run_eval(policy ? &*policy : nullptr, controller, task, episodes, seed, noise);
  print_table(out, rep.stage_names, {{task.name, rep.rates()}});
  if (!common.out.empty()) {
    const fs::path dir = common.out;
    fs::create_directories(dir);
    write_json(dir / "results.json", report_json(rep));
    io::save_config(resolved, dir / "config.json");
  }
  return 0;
}

int cmd_ablate(const Common& common, const std::string& data, const std::string& task_name, std::size_t episodes,
               std::optional<std::size_t> steps, std::size_t num_seeds, const std::string& variants,
               std::uint64_t eval_seed, std::ostream& out) {
  ModelConfig base = common.resolve();
  if (steps) base.steps = *steps;
  check_task_config(base);
  const sim::TaskSpec task = sim::TaskSpec::named(task_name);
  const auto eps = load_dataset(data);
  const fs::path dir = common.out;
  fs::create_directories(dir);
  io::save_config(base, dir / "config.json");

  std::vector<std::string> names = split_list(variants);
  if (names.empty()) names = kVariantNames;
  json doc = {{"task", task.name}, {"episodes", episodes}, {"eval_seed", eval_seed}, {"num_seeds", num_seeds}};
  std::vector<std::pair<std::string, std::vector<double>>> rows;
  for (const auto& variant : names) {
    std::vector<double> mean(task.stages.size(), 0.0);
    json per_seed = json::array();
    for (std::size_t s = 0; s < num_seeds; ++s) {
      ModelConfig c = base;
      if (variant != "full") apply_ablation(c, variant);
      c.seed = base.seed + s;
      c.validate();
      const fs::path run_dir = dir / variant / ("seed" + std::to_string(c.seed));
      fs::create_directories(run_dir);
      out << "[" << variant << " seed " << c.seed << "] training " << c.steps << " steps\n";
      const TrainResult r = train_any(c, eps, run_dir, out, true);
      const Policy policy = io::load_policy(r.checkpoint);
      const sim::EvalReport rep = run_eval(&policy, "policy", task, episodes, eval_seed, 0.0);
      write_json(run_dir / "results.json", report_json(rep));
      const auto rates = rep.rates();
      for (std::size_t i = 0; i < rates.size(); ++i) mean[i] += rates[i] / static_cast<double>(num_seeds);
      per_seed.push_back({{"seed", c.seed}, {"stages", report_json(rep)["stages"]}, {"final_l1", r.smoothed_l1}});
    }
    json stages = json::object();
    for (std::size_t i = 0; i < mean.size(); ++i) stages[task.stages[i]] = mean[i];
    doc["variants"][variant] = {{"stages", stages}, {"per_seed", per_seed}};
    rows.emplace_back(variant, mean);
  }
  write_json(dir / "ablation.json", doc);
  print_table(out, task.stages, rows);
  return 0;
}

int cmd_attn_trace(const std::string& ckpt, const std::string& episode, const std::string& out_csv,
                   std::ostream& out) {
  const io::Checkpoint cp = io::load_checkpoint(ckpt);
  const Policy policy = io::load_policy(cp);
  const ModelConfig& c = policy.config();
  if (c.ablation.no_cls) {
    throw UsageError("checkpoint was trained with no-cls: the decoder memory has no CLS tokens to trace");
  }
  const io::DemoEpisode ep = io::read_episode(episode);
  if (ep.joints_per_arm != c.joints_per_arm) {
    throw DimensionError("episode has " + std::to_string(ep.joints_per_arm) + " joints per arm, checkpoint expects " +
                         std::to_string(c.joints_per_arm));
  }
  std::ofstream csv(out_csv);
  if (!csv) throw Error("cannot write " + out_csv);
  csv << "t,arm,layer,head,cls_mass\n";
  std::size_t rows = 0;
  for (std::size_t t = 0; t < ep.steps; ++t) {
    Observation obs;
    obs.qpos.assign(ep.qpos_at(t).begin(), ep.qpos_at(t).end());
    if (c.use_visual) obs.image = ep.image_at(t);
    const TracedPrediction p = policy.predict_traced(obs);
    if (!p.trace) throw UsageError("decoder memory carries no other-arm CLS tokens; nothing to trace");
    const AttnTrace& tr = *p.trace;
    for (std::size_t arm = 0; arm < 2; ++arm) {
      for (std::size_t l = 0; l < tr.layers; ++l) {
        for (std::size_t h = 0; h <= tr.heads; ++h) {
          const long head = h == tr.heads ? -1 : static_cast<long>(h);
          char buf[128];
          std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%ld,%.9g\n", t, arm + 1, l, head, tr.mass[arm][l][h]);
          csv << buf;
          ++rows;
        }
      }
    }
  }
  io::save_config(policy.config(), fs::path(out_csv).replace_extension(".config.json"));
  out << "wrote " << rows << " rows to " << out_csv << "\n";
  return 0;
}

int cmd_grad_check(const Common& common, double eps, std::size_t coords, double threshold, bool inject_fault,
                   std::ostream& out) {
  ModelConfig c = common.resolve();
  GradCheckOptions o;
  o.eps = eps;
  o.coords_per_tensor = coords;
  o.seed = c.seed;
  o.corrupt_backward = inject_fault;
  const GradCheckReport r = check_model_gradients(c, o);
  std::size_t probed = 0, skipped = 0;
  for (const auto& e : r.entries) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-40s probed %4zu  kink-skipped %3zu  max rel err %.3e\n", e.name.c_str(), e.probed,
                  e.skipped_kinks, e.max_rel_error);
    out << buf;
    probed += e.probed;
    skipped += e.skipped_kinks;
  }
  out << r.entries.size() << " parameter tensors, " << probed << " coordinates probed, " << skipped
      << " skipped at kinks\n";
  out << "max relative error: " << fmt("%.3e", r.max_rel_error) << " (" << r.worst_parameter << ")\n";
  for (const auto& e : r.entries) {
    if (e.name != r.worst_parameter) continue;
    char buf[160];
    std::snprintf(buf, sizeof buf, "  worst coordinate %zu: analytic %.9e numeric %.9e\n", e.worst_index,
                  e.analytic_at_worst, e.numeric_at_worst);
    out << buf;
  }
  if (!common.out.empty()) {
    const fs::path dir = common.out;
    fs::create_directories(dir);
    json entries = json::array();
    for (const auto& e : r.entries) {
      entries.push_back({{"name", e.name}, {"probed", e.probed}, {"skipped_kinks", e.skipped_kinks},
                         {"max_rel_error", e.max_rel_error}});
    }
    write_json(dir / "gradcheck.json", {{"max_rel_error", r.max_rel_error},
                                        {"worst_parameter", r.worst_parameter},
                                        {"threshold", threshold},
                                        {"entries", entries}});
    io::save_config(c, dir / "config.json");
  }
  if (!(r.max_rel_error < threshold)) {
    out << "FAILED: " << r.worst_parameter << " exceeds " << fmt("%.1e", threshold) << "\n";
    return 1;
  }
  out << "PASSED (< " << fmt("%.1e", threshold) << ")\n";
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bimanual hierarchical-attention imitation policy toolkit", "iact"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  // gen-demos
  Common gen;
  std::string gen_task = "toy_transfer";
  std::size_t gen_num = 50;
  double gen_noise = 0.01;
  bool gen_force = false;
  auto* gen_cmd = app.add_subcommand("gen-demos", "Record scripted demonstrations");
  gen.add(gen_cmd, true);
  gen_cmd->add_option("--task", gen_task)->check(CLI::IsMember({"toy_transfer", "toy_slot"}));
  gen_cmd->add_option("--num", gen_num, "Number of episodes")->check(kAtLeastOne);
  gen_cmd->add_option("--noise", gen_noise, "Action noise std (rad)")->check(CLI::NonNegativeNumber);
  gen_cmd->add_flag("--force", gen_force, "Overwrite a non-empty output directory");

  // train
  Common tr;
  std::string tr_data, tr_ablate;
  std::optional<std::size_t> tr_steps;
  auto* tr_cmd = app.add_subcommand("train", "Train a policy on a demo directory");
  tr.add(tr_cmd, true);
  tr_cmd->add_option("--data", tr_data, "Dataset directory")->required();
  tr_cmd->add_option("--ablate", tr_ablate, "Comma-separated: no-cls,no-cross,no-sync")
      ->check(name_list(kAblationNames, "ablation"));
  tr_cmd->add_option("--steps", tr_steps, "Override the number of steps")->check(kAtLeastOne);

  // eval
  Common ev;
  std::string ev_ckpt, ev_task = "toy_transfer", ev_controller = "policy";
  std::size_t ev_episodes = 50;
  double ev_noise = 0.0;
  bool ev_force = false;
  auto* ev_cmd = app.add_subcommand("eval", "Evaluate per-stage success");
  ev.add(ev_cmd, false);
  ev_cmd->add_option("--ckpt", ev_ckpt, "Checkpoint")->check(CLI::ExistingFile);
  ev_cmd->add_option("--task", ev_task)->check(CLI::IsMember({"toy_transfer", "toy_slot"}));
  ev_cmd->add_option("--episodes", ev_episodes)->check(kAtLeastOne);
  ev_cmd->add_option("--controller", ev_controller, "policy, scripted or random")
      ->check(CLI::IsMember({"policy", "scripted", "random"}));
  ev_cmd->add_option("--noise", ev_noise, "Scripted controller noise")->check(CLI::NonNegativeNumber);
  ev_cmd->add_flag("--force", ev_force, "Load despite a config digest mismatch");

  // ablate
  Common ab;
  std::string ab_data, ab_task = "toy_transfer", ab_variants;
  std::size_t ab_episodes = 50, ab_seeds = 1;
  std::optional<std::size_t> ab_steps;
  std::uint64_t ab_eval_seed = 10000;
  auto* ab_cmd = app.add_subcommand("ablate", "Train and evaluate full / no-cls / no-cross / no-sync");
  ab.add(ab_cmd, true);
  ab_cmd->add_option("--data", ab_data)->required();
  ab_cmd->add_option("--task", ab_task)->check(CLI::IsMember({"toy_transfer", "toy_slot"}));
  ab_cmd->add_option("--episodes", ab_episodes)->check(kAtLeastOne);
  ab_cmd->add_option("--steps", ab_steps)->check(kAtLeastOne);
  ab_cmd->add_option("--num-seeds", ab_seeds, "Training seeds averaged per variant")->check(kAtLeastOne);
  ab_cmd->add_option("--variants", ab_variants, "Subset of full,no-cls,no-cross,no-sync")
      ->check(name_list(kVariantNames, "variant"));
  ab_cmd->add_option("--eval-seed", ab_eval_seed, "First evaluation episode seed");

  // attn-trace
  std::string at_ckpt, at_episode, at_out;
  auto* at_cmd = app.add_subcommand("attn-trace", "Per-timestep decoder attention mass on other-arm CLS tokens");
  at_cmd->add_option("--ckpt", at_ckpt)->required()->check(CLI::ExistingFile);
  at_cmd->add_option("--episode", at_episode)->required()->check(CLI::ExistingFile);
  at_cmd->add_option("--out", at_out, "CSV path")->required();

  // grad-check
  Common gc;
  double gc_eps = 1e-3, gc_threshold = 1e-4;
  std::size_t gc_coords = 10;
  bool gc_fault = false;
  auto* gc_cmd = app.add_subcommand("grad-check", "Finite-difference check of the full model in 64-bit");
  gc.add(gc_cmd, false);
  gc_cmd->add_option("--eps", gc_eps)->check(CLI::PositiveNumber);
  gc_cmd->add_option("--coords", gc_coords, "Coordinates per tensor (0 = all)");
  gc_cmd->add_option("--threshold", gc_threshold)->check(CLI::PositiveNumber);
  gc_cmd->add_flag("--inject-fault", gc_fault)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen_demos(gen, gen_task, gen_num, gen_noise, gen_force, out);
    if (tr_cmd->parsed()) return cmd_train(tr, tr_data, tr_ablate, tr_steps, out);
    if (ev_cmd->parsed()) return cmd_eval(ev, ev_ckpt, ev_task, ev_episodes, ev_controller, ev_noise, ev_force, out);
    if (ab_cmd->parsed()) {
      return cmd_ablate(ab, ab_data, ab_task, ab_episodes, ab_steps, ab_seeds, ab_variants, ab_eval_seed, out);
    }
    if (at_cmd->parsed()) return cmd_attn_trace(at_ckpt, at_episode, at_out, out);
    if (gc_cmd->parsed()) return cmd_grad_check(gc, gc_eps, gc_coords, gc_threshold, gc_fault, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace iact::cli
