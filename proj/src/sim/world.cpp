#include "iact/sim/world.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "iact/core/error.hpp"
#include "iact/core/rng.hpp"

namespace iact::sim {
namespace {

using G = Geometry;

double sign_of(std::size_t which) { return which == 0 ? 1.0 : -1.0; }

Vec2 base_of(std::size_t which) { return {-sign_of(which) * G::kBaseX, G::kBaseY}; }

/// Joint positions of base, elbow, wrist and tip.
std::array<Vec2, 4> chain(const ArmState& arm, std::size_t which) {
  std::array<Vec2, 4> p;
  p[0] = base_of(which);
  double theta = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    theta += arm.q[i];
    p[i + 1] = {p[i].x + sign_of(which) * G::kLinks[i] * std::cos(theta), p[i].y + G::kLinks[i] * std::sin(theta)};
  }
  return p;
}

double move_toward(double cur, double target, double max_step) {
  if (!std::isfinite(target)) return cur;
  return cur + std::clamp(target - cur, -max_step, max_step);
}

Vec2 add(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
Vec2 sub(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }

void update_stages(WorldState& s, const TaskSpec& task) {
  bool pred[3] = {false, false, false};
  if (task.id == TaskId::kTransfer) {
    pred[0] = distance(tip(s.arms[0], 0), s.object) <= G::kGraspRadius;
    pred[1] = s.holding[0] && s.object.y > task.lift_height;
    pred[2] = s.holding[1] && !s.holding[0];
  } else {
    pred[0] = s.holding[0] && s.holding[1] && s.rod_centroid().y > task.lift_height;
    const Vec2 c = s.rod_centroid();
    pred[1] = std::abs(c.x - s.slot.x) <= task.slot_tolerance && std::abs(c.y - s.slot.y) <= task.slot_tolerance;
  }
  for (std::size_t i = 0; i < task.stages.size(); ++i) {
    const bool prior = i == 0 || s.stages[i - 1];
    s.stages[i] = s.stages[i] || (prior && pred[i]);
  }
}

}  // namespace

double distance(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

TaskSpec TaskSpec::transfer() {
  TaskSpec t;
  t.id = TaskId::kTransfer;
  t.name = "toy_transfer";
  t.x_lo = -0.3;
  t.x_hi = -0.1;
  t.episode_steps = 80;
  t.stages = {"Touch", "Lift", "Transfer"};
  return t;
}

TaskSpec TaskSpec::slot() {
  TaskSpec t;
  t.id = TaskId::kSlot;
  t.name = "toy_slot";
  t.x_lo = -0.1;
  t.x_hi = 0.1;
  t.slot_x_lo = -0.1;
  t.slot_x_hi = 0.1;
  t.episode_steps = 60;
  t.stages = {"Lift", "Insert"};
  return t;
}

TaskSpec TaskSpec::named(std::string_view name) {
  if (name == "toy_transfer") return transfer();
  if (name == "toy_slot") return slot();
  throw UsageError("unknown task '" + std::string(name) + "' (expected toy_transfer or toy_slot)");
}

Vec2 tip(const ArmState& arm, std::size_t which) { return chain(arm, which)[3]; }

std::array<double, 3> inverse_kinematics(Vec2 target, std::size_t which) {
  const Vec2 b = base_of(which);
  const double wx = sign_of(which) * (target.x - b.x);
  const double wy = target.y + G::kLinks[2] - b.y;
  const double l1 = G::kLinks[0], l2 = G::kLinks[1];
  const double c = std::clamp((wx * wx + wy * wy - l1 * l1 - l2 * l2) / (2 * l1 * l2), -1.0, 1.0);
  const double q1 = -std::acos(c);
  const double q0 = std::atan2(wy, wx) - std::atan2(l2 * std::sin(q1), l1 + l2 * std::cos(q1));
  const double q2 = -std::numbers::pi / 2 - q0 - q1;
  std::array<double, 3> q{q0, q1, q2};
  for (std::size_t i = 0; i < 3; ++i) q[i] = std::clamp(q[i], G::kJointLo[i], G::kJointHi[i]);
  return q;
}

WorldState reset(const TaskSpec& task, std::uint64_t seed) {
  Rng rng = Rng(seed).substream("reset");
  WorldState s;
  s.task = task.id;
  const Vec2 home[2] = {{-0.35, 0.4}, {0.35, 0.4}};
  for (std::size_t a = 0; a < 2; ++a) {
    s.arms[a].q = inverse_kinematics(home[a], a);
    s.arms[a].grip = 1.0;
  }
  const double x = rng.uniform(task.x_lo, task.x_hi);
  if (task.id == TaskId::kTransfer) {
    s.object = {x, 0.0};
  } else {
    s.rod = {Vec2{x - G::kRodLength / 2, 0.0}, Vec2{x + G::kRodLength / 2, 0.0}};
    s.slot = {rng.uniform(task.slot_x_lo, task.slot_x_hi), task.slot_y};
  }
  return s;
}

WorldState step(const WorldState& prev, const TaskSpec& task, std::span<const double> action) {
  if (action.size() != kActionDim) {
    throw DimensionError("step: action width " + std::to_string(action.size()) + ", expected " +
                         std::to_string(kActionDim));
  }
  WorldState s = prev;
  std::array<Vec2, 2> delta;
  for (std::size_t a = 0; a < 2; ++a) {
    ArmState& arm = s.arms[a];
    const Vec2 before = tip(arm, a);
    for (std::size_t i = 0; i < 3; ++i) {
      const double cmd = action[a * kJointsPerArm + i];
      if (!std::isfinite(cmd)) continue;
      const double target = std::clamp(cmd, G::kJointLo[i], G::kJointHi[i]);
      arm.q[i] = std::clamp(move_toward(arm.q[i], target, G::kMaxJointSpeed), G::kJointLo[i], G::kJointHi[i]);
    }
    const double g = action[a * kJointsPerArm + 3];
    if (std::isfinite(g)) arm.grip = std::clamp(move_toward(arm.grip, std::clamp(g, 0.0, 1.0), G::kMaxGripSpeed), 0.0, 1.0);
    delta[a] = sub(tip(arm, a), before);
  }

  // Held objects follow the mean displacement of the tips holding them; the
  // rod needs both ends held to move at all.
  if (task.id == TaskId::kTransfer) {
    const int n = int(s.holding[0]) + int(s.holding[1]);
    if (n > 0) {
      Vec2 d{0, 0};
      for (std::size_t a = 0; a < 2; ++a) {
        if (s.holding[a]) d = add(d, delta[a]);
      }
      s.object = add(s.object, {d.x / n, d.y / n});
    }
  } else if (s.holding[0] && s.holding[1]) {
    const Vec2 d{(delta[0].x + delta[1].x) / 2, (delta[0].y + delta[1].y) / 2};
    s.rod[0] = add(s.rod[0], d);
    s.rod[1] = add(s.rod[1], d);
  }

  for (std::size_t a = 0; a < 2; ++a) {
    const Vec2 p = tip(s.arms[a], a);
    const Vec2 target = task.id == TaskId::kTransfer ? s.object : s.rod[a];
    const bool closed = s.arms[a].grip < 0.5;
    if (!closed) {
      s.holding[a] = false;
    } else if (s.holding[a]) {
      if (distance(p, target) > G::kBreakDistance) s.holding[a] = false;
    } else if (!prev.holding[a] && distance(p, target) <= G::kGraspRadius) {
      s.holding[a] = true;
    }
  }
  ++s.t;
  update_stages(s, task);
  return s;
}

std::vector<double> qpos(const WorldState& s) {
  std::vector<double> q;
  q.reserve(kActionDim);
  for (const auto& arm : s.arms) {
    q.insert(q.end(), arm.q.begin(), arm.q.end());
    q.push_back(arm.grip);
  }
  return q;
}

namespace {

double segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = sub(b, a), ap = sub(p, a);
  const double len2 = ab.x * ab.x + ab.y * ab.y;
  const double u = len2 > 0 ? std::clamp((ap.x * ab.x + ap.y * ab.y) / len2, 0.0, 1.0) : 0.0;
  return distance(p, {a.x + u * ab.x, a.y + u * ab.y});
}

}  // namespace

Tensor<float> render(const WorldState& s, std::size_t height, std::size_t width) {
  constexpr double kX0 = -0.8, kX1 = 0.8, kY0 = -0.1, kY1 = 0.9;
  Tensor<float> img({height, width, 1});
  std::array<std::array<Vec2, 4>, 2> arms{chain(s.arms[0], 0), chain(s.arms[1], 1)};
  std::array<Vec2, 2> tips{arms[0][3], arms[1][3]};
  const double px = (kX1 - kX0) / static_cast<double>(width);
  const double py = (kY1 - kY0) / static_cast<double>(height);
  const double half_pixel = 0.5 * std::max(px, py);

  // Linear coverage ramp one pixel wide around each edge, so sub-pixel
  // positions show up as intensity.
  const auto cover = [&](double signed_dist) { return std::clamp(0.5 - signed_dist / (2.0 * half_pixel), 0.0, 1.0); };
  const auto paint = [](double& v, double level, double coverage) { v = std::max(v, level * coverage); };

  for (std::size_t r = 0; r < height; ++r) {
    const double y = kY1 - (static_cast<double>(r) + 0.5) * py;
    for (std::size_t c = 0; c < width; ++c) {
      const Vec2 p{kX0 + (static_cast<double>(c) + 0.5) * px, y};
      double v = 0.2 * cover(y);
      for (std::size_t a = 0; a < 2; ++a) {
        for (std::size_t i = 0; i < 3; ++i) paint(v, 0.5, cover(segment_distance(p, arms[a][i], arms[a][i + 1]) - 0.015));
        paint(v, s.arms[a].grip < 0.5 ? 0.7 : 0.6, cover(distance(p, tips[a]) - 0.03));
      }
      if (s.task == TaskId::kTransfer) {
        paint(v, 1.0, cover(std::max(std::abs(p.x - s.object.x), std::abs(p.y - s.object.y)) - 0.035));
      } else {
        paint(v, 1.0, cover(segment_distance(p, s.rod[0], s.rod[1]) - 0.02));
        const double dx = std::abs(p.x - s.slot.x), dy = std::abs(p.y - s.slot.y);
        const double outer = std::max(dx - 0.2, dy - 0.05);
        const double inner = std::max(dx - 0.15, dy - 0.0375);
        paint(v, 0.35, std::min(cover(outer), 1.0 - cover(inner)));
      }
      img(r, c) = static_cast<float>(v);
    }
  }
  return img;
}

}  // namespace iact::sim
