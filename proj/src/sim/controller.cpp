#include "iact/sim/controller.hpp"

#include <cmath>

#include "iact/core/error.hpp"

namespace iact::sim {
namespace {

using G = Geometry;

constexpr double kNear = 0.02;
constexpr double kAbove = 0.12;

Vec2 step_toward(Vec2 from, Vec2 to, double max_step) {
  const double dx = to.x - from.x, dy = to.y - from.y;
  const double d = std::hypot(dx, dy);
  if (d <= max_step) return to;
  return {from.x + dx * max_step / d, from.y + dy * max_step / d};
}

struct ArmCommand {
  Vec2 target;
  double grip;
};

/// Approach from above, descend, close once at the target.
ArmCommand pick(Vec2 p, Vec2 goal) {
  if (distance(p, goal) <= kNear) return {goal, 0.0};
  if (std::abs(p.x - goal.x) <= kNear && p.y >= goal.y - kNear) return {goal, 1.0};
  return {{goal.x, goal.y + kAbove}, 1.0};
}

}  // namespace

ScriptedController::ScriptedController(TaskSpec task, double noise_std) : task_(std::move(task)), noise_(noise_std) {}

void ScriptedController::reset(const WorldState&, std::uint64_t episode_seed) {
  rng_ = Rng(episode_seed).substream("demo-noise");
}

std::vector<double> ScriptedController::act(const WorldState& s) {
  const Vec2 p[2] = {tip(s.arms[0], 0), tip(s.arms[1], 1)};
  const Vec2 wait[2] = {{-0.25, 0.4}, {0.25, 0.4}};
  ArmCommand cmd[2];
  bool cartesian_step = true;

  if (task_.id == TaskId::kTransfer) {
    const Vec2 meet{0.0, 0.4};
    const Vec2 o = s.object;
    const bool h1 = s.holding[0], h2 = s.holding[1];
    if (h2 && !h1) {
      cmd[0] = {wait[0], 1.0};
      cmd[1] = {wait[1], 0.0};
    } else if (h1 && h2) {
      cmd[0] = {p[0], 1.0};
      cmd[1] = {p[1], 0.0};
    } else if (h1) {
      cmd[0] = {{meet.x + p[0].x - o.x, meet.y + p[0].y - o.y}, 0.0};
      if (distance(o, meet) <= kNear) {
        cmd[1] = {o, distance(p[1], o) <= kNear ? 0.0 : 1.0};
      } else {
        cmd[1] = {wait[1], 1.0};
      }
    } else {
      cmd[0] = pick(p[0], o);
      cmd[1] = {wait[1], 1.0};
    }
  } else {
    if (s.holding[0] && s.holding[1]) {
      const Vec2 c = s.rod_centroid();
      const Vec2 next = step_toward(c, s.slot, kTipSpeed);
      for (std::size_t a = 0; a < 2; ++a) {
        cmd[a] = {{s.rod[a].x + next.x - c.x, s.rod[a].y + next.y - c.y}, 0.0};
      }
      cartesian_step = false;
    } else {
      for (std::size_t a = 0; a < 2; ++a) {
        cmd[a] = s.holding[a] ? ArmCommand{s.rod[a], 0.0} : pick(p[a], s.rod[a]);
      }
    }
  }

  std::vector<double> action(kActionDim);
  for (std::size_t a = 0; a < 2; ++a) {
    const Vec2 next = cartesian_step ? step_toward(p[a], cmd[a].target, kTipSpeed) : cmd[a].target;
    const auto q = inverse_kinematics(next, a);
    for (std::size_t i = 0; i < 3; ++i) {
      const double noisy = q[i] + (noise_ > 0 ? noise_ * rng_.normal() : 0.0);
      action[a * kJointsPerArm + i] = std::clamp(noisy, G::kJointLo[i], G::kJointHi[i]);
    }
    action[a * kJointsPerArm + 3] = cmd[a].grip;
  }
  return action;
}

void RandomController::reset(const WorldState&, std::uint64_t episode_seed) {
  rng_ = Rng(episode_seed).substream("random-policy");
}

std::vector<double> RandomController::act(const WorldState&) {
  std::vector<double> action(kActionDim);
  for (std::size_t a = 0; a < 2; ++a) {
    for (std::size_t i = 0; i < 3; ++i) action[a * kJointsPerArm + i] = rng_.uniform(G::kJointLo[i], G::kJointHi[i]);
    action[a * kJointsPerArm + 3] = rng_.uniform();
  }
  return action;
}

PolicyController::PolicyController(const Policy& policy)
    : policy_(policy), buffer_(policy.config().chunk_size, policy.config().action_dim()) {
  if (policy.config().joints_per_arm != kJointsPerArm) {
    throw DimensionError("policy has " + std::to_string(policy.config().joints_per_arm) +
                         " joints per arm, the toy world has " + std::to_string(kJointsPerArm));
  }
}

void PolicyController::reset(const WorldState&, std::uint64_t) { buffer_.clear(); }

std::vector<double> PolicyController::act(const WorldState& s) {
  buffer_.push(s.t, policy_.predict_chunk(observe(s, policy_.config())).cast<double>());
  return temporal_ensemble(buffer_, s.t, policy_.config().ensemble_decay);
}

Observation observe(const WorldState& s, const ModelConfig& config) {
  Observation obs;
  for (double v : qpos(s)) obs.qpos.push_back(static_cast<float>(v));
  if (config.use_visual) obs.image = render(s, config.image_height, config.image_width);
  return obs;
}

std::vector<double> EvalReport::rates() const {
  std::vector<double> r(stage_names.size(), 0.0);
  if (episodes.empty()) return r;
  for (std::size_t i = 0; i < r.size(); ++i) {
    std::size_t hits = 0;
    for (const auto& e : episodes) hits += e.stages[i];
    r[i] = 100.0 * static_cast<double>(hits) / static_cast<double>(episodes.size());
  }
  return r;
}

namespace {

StageOutcome run(Controller& controller, const TaskSpec& task, std::uint64_t seed, io::DemoEpisode* record) {
  WorldState s = reset(task, seed);
  controller.reset(s, seed);
  for (std::size_t t = 0; t < task.episode_steps; ++t) {
    const std::vector<double> a = controller.act(s);
    if (record != nullptr) {
      for (double v : qpos(s)) record->qpos.push_back(static_cast<float>(v));
      for (double v : a) record->action.push_back(static_cast<float>(v));
      const Tensor<float> frame = render(s, record->height, record->width);
      record->image.insert(record->image.end(), frame.storage().begin(), frame.storage().end());
    }
    s = step(s, task, a);
  }
  StageOutcome out;
  out.seed = seed;
  out.length = task.episode_steps;
  out.stages.assign(s.stages.begin(), s.stages.begin() + static_cast<std::ptrdiff_t>(task.stages.size()));
  return out;
}

}  // namespace

EvalReport evaluate(Controller& controller, const TaskSpec& task, std::size_t n_episodes, std::uint64_t seed) {
  EvalReport rep;
  rep.task = task.name;
  rep.seed = seed;
  rep.stage_names = task.stages;
  for (std::size_t i = 0; i < n_episodes; ++i) rep.episodes.push_back(run(controller, task, seed + i, nullptr));
  return rep;
}

io::DemoEpisode record_episode(Controller& controller, const TaskSpec& task, std::uint64_t seed,
                               std::size_t height, std::size_t width, StageOutcome* outcome) {
  io::DemoEpisode ep;
  ep.joints_per_arm = kJointsPerArm;
  ep.steps = static_cast<std::uint32_t>(task.episode_steps);
  ep.height = static_cast<std::uint32_t>(height);
  ep.width = static_cast<std::uint32_t>(width);
  ep.channels = 1;
  StageOutcome o = run(controller, task, seed, &ep);
  if (outcome != nullptr) *outcome = o;
  return ep;
}

}  // namespace iact::sim
