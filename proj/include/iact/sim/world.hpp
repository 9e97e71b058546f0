#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "iact/core/tensor.hpp"

namespace iact::sim {

inline constexpr std::size_t kJointsPerArm = 4;  // 3 revolute + gripper
inline constexpr std::size_t kActionDim = 2 * kJointsPerArm;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Vec2&) const = default;
};

double distance(Vec2 a, Vec2 b);

/// Fixed geometry and actuation limits. Arm 2 is the mirror image of arm 1
/// about x = 0, and its joint angles are expressed in the mirrored frame.
struct Geometry {
  static constexpr double kLinks[3] = {0.40, 0.35, 0.10};
  static constexpr double kBaseX = 0.6;  // bases at (-0.6, y) and (+0.6, y)
  static constexpr double kBaseY = 0.35;
  static constexpr double kJointLo[3] = {-1.0, -2.9, -2.9};
  static constexpr double kJointHi[3] = {2.8, 2.9, 2.9};
  static constexpr double kMaxJointSpeed = 0.15;  // rad per step
  static constexpr double kMaxGripSpeed = 0.25;  // per step
  static constexpr double kGraspRadius = 0.04;
  /// An attached rod end is lost when the tip strays this far from it.
  static constexpr double kBreakDistance = 0.08;
  static constexpr double kRodLength = 0.3;
};

enum class TaskId { kTransfer, kSlot };

/// Randomization ranges and stage names of a toy task.
struct TaskSpec {
  TaskId id = TaskId::kTransfer;
  std::string name;
  double x_lo = 0.0, x_hi = 0.0;            // object (transfer) / rod centroid (slot)
  double slot_x_lo = 0.0, slot_x_hi = 0.0;  // slot only
  double slot_y = 0.4;
  double lift_height = 0.1;
  double slot_tolerance = 0.02;
  std::size_t episode_steps = 0;
  std::vector<std::string> stages;

  /// Accepts "toy_transfer" and "toy_slot"; anything else is a UsageError.
  static TaskSpec named(std::string_view name);
  static TaskSpec transfer();
  static TaskSpec slot();
};

struct ArmState {
  std::array<double, 3> q{};
  double grip = 1.0;  // 1 open, 0 closed; closed below 0.5
  bool operator==(const ArmState&) const = default;
};

struct WorldState {
  TaskId task = TaskId::kTransfer;
  std::array<ArmState, 2> arms;
  Vec2 object;                // transfer: the cube
  std::array<Vec2, 2> rod{};  // slot: left and right ends
  Vec2 slot;
  /// Transfer: arm a holds the cube. Slot: arm a holds rod end a.
  std::array<bool, 2> holding{false, false};
  /// Latched stage flags in task order; stage i only latches after i - 1.
  std::array<bool, 3> stages{false, false, false};
  std::size_t t = 0;

  bool operator==(const WorldState&) const = default;
  Vec2 rod_centroid() const { return {(rod[0].x + rod[1].x) / 2, (rod[0].y + rod[1].y) / 2}; }
};

/// Gripper tip position of an arm.
Vec2 tip(const ArmState& arm, std::size_t which);
/// Joint angles placing the tip at `target` with the tool pointing down
/// (elbow up; unreachable targets are approached fully stretched).
std::array<double, 3> inverse_kinematics(Vec2 target, std::size_t which);

/// Deterministic initial state; placements come from substreams of `seed`.
WorldState reset(const TaskSpec& task, std::uint64_t seed);
/// Moves each joint toward its commanded target (clamped to speed and joint
/// limits), then updates attachments, objects, and stage flags. Non-finite
/// commands are treated as "hold".
WorldState step(const WorldState& s, const TaskSpec& task, std::span<const double> action);

/// Joint observation, 2J, arm 1 first.
std::vector<double> qpos(const WorldState& s);
/// Grayscale frame over x in [-0.8, 0.8], y in [-0.1, 0.9], row 0 at the top.
Tensor<float> render(const WorldState& s, std::size_t height = 64, std::size_t width = 64);

}  // namespace iact::sim
