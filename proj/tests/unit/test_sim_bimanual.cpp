#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>

#include "iact/core/error.hpp"
#include "iact/sim/controller.hpp"

using namespace iact;
using namespace iact::sim;

namespace {

using G = Geometry;

std::vector<double> hold(const WorldState& s) { return qpos(s); }

/// One line per step: qpos, object, rod ends, holding and stage flags, all as
/// hex floats so the comparison is bit-exact.
std::string trajectory_text() {
  const TaskSpec task = TaskSpec::slot();
  ScriptedController ctl(task, 0.01);
  WorldState s = reset(task, 7);
  ctl.reset(s, 7);
  std::ostringstream out;
  char buf[64];
  for (int t = 0; t < 200; ++t) {
    s = step(s, task, ctl.act(s));
    std::vector<double> v = qpos(s);
    for (const auto& p : {s.object, s.rod[0], s.rod[1], s.slot}) {
      v.push_back(p.x);
      v.push_back(p.y);
    }
    for (double x : v) {
      std::snprintf(buf, sizeof buf, "%a ", x);
      out << buf;
    }
    out << s.holding[0] << s.holding[1] << s.stages[0] << s.stages[1] << s.stages[2] << '\n';
  }
  return out.str();
}

double rate_final(Controller& c, const TaskSpec& task, std::size_t n) {
  return evaluate(c, task, n, 0).rates().back();
}

}  // namespace

TEST_CASE("reset is deterministic and places objects within range") {
  for (const auto& task : {TaskSpec::transfer(), TaskSpec::slot()}) {
    CHECK(reset(task, 3) == reset(task, 3));
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const WorldState s = reset(task, seed);
      if (task.id == TaskId::kTransfer) {
        CHECK((s.object.x >= task.x_lo && s.object.x <= task.x_hi));
      } else {
        CHECK((s.rod_centroid().x >= task.x_lo && s.rod_centroid().x <= task.x_hi));
        CHECK((s.slot.x >= task.slot_x_lo && s.slot.x <= task.slot_x_hi));
        CHECK(distance(s.rod[0], s.rod[1]) == doctest::Approx(G::kRodLength));
      }
    }
  }
  // Earlier resets leave later ones untouched.
  const WorldState alone = reset(TaskSpec::slot(), 11);
  for (int i = 0; i < 5; ++i) reset(TaskSpec::slot(), i);
  CHECK(reset(TaskSpec::slot(), 11) == alone);
  CHECK(reset(TaskSpec::slot(), 11) != reset(TaskSpec::slot(), 12));
  CHECK_THROWS_AS(TaskSpec::named("toy_stack"), UsageError);
}

TEST_CASE("commanding the current pose is a fixed point") {
  const TaskSpec task = TaskSpec::transfer();
  const WorldState s = reset(task, 1);
  WorldState n = step(s, task, hold(s));
  n.t = s.t;
  CHECK(n == s);
}

TEST_CASE("joint motion is clamped to the speed limit and the joint range") {
  const TaskSpec task = TaskSpec::transfer();
  const WorldState s = reset(task, 2);
  auto a = hold(s);
  a[0] += 1.0;
  a[1] -= 1.0;
  a[7] = 0.0;
  const WorldState n = step(s, task, a);
  CHECK(n.arms[0].q[0] == doctest::Approx(s.arms[0].q[0] + G::kMaxJointSpeed).epsilon(1e-15));
  CHECK(n.arms[0].q[1] == doctest::Approx(s.arms[0].q[1] - G::kMaxJointSpeed).epsilon(1e-15));
  CHECK(n.arms[1].grip == doctest::Approx(1.0 - G::kMaxGripSpeed));

  Rng rng(3);
  WorldState w = s;
  for (int t = 0; t < 500; ++t) {
    std::vector<double> act(kActionDim);
    for (auto& v : act) v = rng.uniform(-10, 10);
    w = step(w, task, act);
    for (const auto& arm : w.arms) {
      for (std::size_t i = 0; i < 3; ++i) CHECK((arm.q[i] >= G::kJointLo[i] && arm.q[i] <= G::kJointHi[i]));
      CHECK((arm.grip >= 0.0 && arm.grip <= 1.0));
    }
  }
  CHECK_THROWS_AS(step(s, task, std::vector<double>(3)), DimensionError);
}

TEST_CASE("non-finite commands hold the joint") {
  const TaskSpec task = TaskSpec::transfer();
  const WorldState s = reset(task, 4);
  auto a = hold(s);
  a[0] = NAN;
  a[3] = INFINITY;
  a[5] = -INFINITY;
  const WorldState n = step(s, task, a);
  CHECK(n.arms[0].q[0] == s.arms[0].q[0]);
  CHECK(n.arms[0].grip == s.arms[0].grip);
  CHECK(n.arms[1].q[1] == s.arms[1].q[1]);
}

TEST_CASE("inverse kinematics reaches targets with the tool pointing down") {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const std::size_t which = rng.below(2);
    // Inside the reachable band of the arm on its own side of the table.
    const double sx = which == 0 ? 1.0 : -1.0;
    const Vec2 target{sx * rng.uniform(-0.35, 0.05), rng.uniform(0.0, 0.45)};
    ArmState arm;
    arm.q = inverse_kinematics(target, which);
    CHECK(distance(tip(arm, which), target) < 1e-9);
    CHECK(arm.q[0] + arm.q[1] + arm.q[2] == doctest::Approx(-std::numbers::pi / 2));
  }
}

TEST_CASE("the rod only moves when both ends are held") {
  const TaskSpec task = TaskSpec::slot();
  WorldState s = reset(task, 5);
  s.arms[0].q = inverse_kinematics(s.rod[0], 0);
  s.arms[0].grip = 0.0;
  s = step(s, task, qpos(s));
  REQUIRE(s.holding[0]);
  const auto rod = s.rod;
  auto lift = qpos(s);
  const auto up = inverse_kinematics({s.rod[0].x, 0.03}, 0);
  for (std::size_t i = 0; i < 3; ++i) lift[i] = up[i];
  s = step(s, task, lift);
  CHECK(s.rod == rod);
  CHECK_FALSE(s.stages[0]);

  // Both ends held: the rod follows the mean tip displacement.
  WorldState b = reset(task, 5);
  for (std::size_t a = 0; a < 2; ++a) {
    b.arms[a].q = inverse_kinematics(b.rod[a], a);
    b.arms[a].grip = 0.0;
  }
  b = step(b, task, qpos(b));
  REQUIRE((b.holding[0] && b.holding[1]));
  auto act = qpos(b);
  for (std::size_t a = 0; a < 2; ++a) {
    const auto q = inverse_kinematics({b.rod[a].x, b.rod[a].y + 0.02}, a);
    for (std::size_t i = 0; i < 3; ++i) act[a * kJointsPerArm + i] = q[i];
  }
  const Vec2 before = b.rod_centroid();
  b = step(b, task, act);
  CHECK(b.rod_centroid().y > before.y);
}

TEST_CASE("stage flags are monotone under random play") {
  RandomController rc;
  for (const auto& task : {TaskSpec::transfer(), TaskSpec::slot()}) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      WorldState s = reset(task, seed);
      rc.reset(s, seed);
      std::array<bool, 3> prev{};
      for (std::size_t t = 0; t < task.episode_steps; ++t) {
        s = step(s, task, rc.act(s));
        for (std::size_t i = 0; i < task.stages.size(); ++i) {
          CHECK((!prev[i] || s.stages[i]));
          if (i > 0) CHECK((!s.stages[i] || s.stages[i - 1]));
        }
        prev = s.stages;
      }
    }
  }
}

TEST_CASE("scripted demonstrator succeeds; random play does not") {
  for (const auto& task : {TaskSpec::transfer(), TaskSpec::slot()}) {
    CAPTURE(task.name);
    ScriptedController clean(task, 0.0);
    CHECK(rate_final(clean, task, 20) == 100.0);
    ScriptedController noisy(task, 0.01);
    CHECK(rate_final(noisy, task, 50) >= 95.0);
    RandomController rc;
    CHECK(rate_final(rc, task, 20) < 50.0);
  }
}

TEST_CASE("scripted actions respect the joint limits") {
  const TaskSpec task = TaskSpec::transfer();
  ScriptedController ctl(task, 0.5);
  WorldState s = reset(task, 9);
  ctl.reset(s, 9);
  for (std::size_t t = 0; t < task.episode_steps; ++t) {
    const auto a = ctl.act(s);
    for (std::size_t arm = 0; arm < 2; ++arm) {
      for (std::size_t i = 0; i < 3; ++i) {
        CHECK(a[arm * kJointsPerArm + i] >= G::kJointLo[i]);
        CHECK(a[arm * kJointsPerArm + i] <= G::kJointHi[i]);
      }
      CHECK((a[arm * kJointsPerArm + 3] >= 0.0 && a[arm * kJointsPerArm + 3] <= 1.0));
    }
    s = step(s, task, a);
  }
}

TEST_CASE("renderer is deterministic, bounded and sensitive to the object") {
  for (const auto& task : {TaskSpec::transfer(), TaskSpec::slot()}) {
    const WorldState s = reset(task, 6);
    const auto a = render(s), b = render(s);
    CHECK(a == b);
    CHECK(a.shape() == Shape{64, 64, 1});
    for (float v : a.storage()) CHECK((v >= 0.0f && v <= 1.0f));
    WorldState moved = s;
    moved.object.x += G::kGraspRadius;
    moved.rod[0].x += G::kGraspRadius;
    moved.rod[1].x += G::kGraspRadius;
    CHECK_FALSE(render(moved) == a);
  }
  CHECK(render(reset(TaskSpec::transfer(), 0), 32, 48).shape() == Shape{32, 48, 1});
}

TEST_CASE("recorded episodes pair each frame with the action chosen from it") {
  const TaskSpec task = TaskSpec::transfer();
  ScriptedController ctl(task, 0.0);
  StageOutcome out;
  const auto ep = record_episode(ctl, task, 3, 64, 64, &out);
  CHECK(ep.steps == task.episode_steps);
  CHECK(out.stages.back());
  WorldState s = reset(task, 3);
  const auto frame0 = render(s);
  for (std::size_t i = 0; i < frame0.size(); ++i) CHECK(ep.frame_at(0)[i] == frame0[i]);
  const auto q0 = qpos(s);
  for (std::size_t i = 0; i < kActionDim; ++i) CHECK(ep.qpos_at(0)[i] == static_cast<float>(q0[i]));
}

TEST_CASE("200-step scripted rollout matches the stored golden trajectory") {
  const std::string path = std::string(IACT_TEST_DATA_DIR) + "/golden_slot_seed7.txt";
  const std::string now = trajectory_text();
  if (std::getenv("IACT_UPDATE_GOLDEN")) {
    std::ofstream(path) << now;
  }
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream stored;
  stored << in.rdbuf();
  CHECK(stored.str() == now);
}
