#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "iact/core/rng.hpp"
#include "iact/io/episode.hpp"
#include "iact/policy/policy.hpp"
#include "iact/sim/world.hpp"

namespace iact::sim {

/// Closed-loop actor over a toy task. reset() is called once per episode with
/// the episode seed before the first act().
class Controller {
 public:
  virtual ~Controller() = default;
  virtual void reset(const WorldState& initial, std::uint64_t episode_seed) = 0;
  virtual std::vector<double> act(const WorldState& s) = 0;
};

/// Reactive waypoint demonstrator: tips move in bounded Cartesian steps toward
/// phase waypoints derived from the current state, joint targets come from
/// inverse kinematics, then Gaussian noise is added to the revolute joints.
class ScriptedController : public Controller {
 public:
  static constexpr double kTipSpeed = 0.03;

  ScriptedController(TaskSpec task, double noise_std);
  void reset(const WorldState& initial, std::uint64_t episode_seed) override;
  std::vector<double> act(const WorldState& s) override;

 private:
  TaskSpec task_;
  double noise_;
  Rng rng_;
};

/// Uniform joint targets within the limits and a uniform gripper command.
class RandomController : public Controller {
 public:
  void reset(const WorldState& initial, std::uint64_t episode_seed) override;
  std::vector<double> act(const WorldState& s) override;

 private:
  Rng rng_;
};

/// Runs a learned policy every step and executes the temporal ensemble of the
/// overlapping chunks.
class PolicyController : public Controller {
 public:
  explicit PolicyController(const Policy& policy);
  void reset(const WorldState& initial, std::uint64_t episode_seed) override;
  std::vector<double> act(const WorldState& s) override;

 private:
  const Policy& policy_;
  ChunkBuffer buffer_;
};

Observation observe(const WorldState& s, const ModelConfig& config);

struct StageOutcome {
  std::uint64_t seed = 0;
  std::size_t length = 0;
  std::vector<bool> stages;
};

struct EvalReport {
  std::string task;
  std::uint64_t seed = 0;
  std::vector<std::string> stage_names;
  std::vector<StageOutcome> episodes;

  /// 100 * successes / episodes for each stage.
  std::vector<double> rates() const;
};

/// Episode i uses seed `seed + i`.
EvalReport evaluate(Controller& controller, const TaskSpec& task, std::size_t n_episodes, std::uint64_t seed);

/// Full rollout recorded as a demonstration (qpos before each action, the
/// action, and the frame the action was chosen from).
io::DemoEpisode record_episode(Controller& controller, const TaskSpec& task, std::uint64_t seed,
                               std::size_t height = 64, std::size_t width = 64, StageOutcome* outcome = nullptr);

}  // namespace iact::sim
