#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "iact/core/adam.hpp"
#include "iact/io/episode.hpp"
#include "iact/io/stats.hpp"
#include "iact/policy/model.hpp"

namespace iact {

struct StepMetrics {
  std::size_t step = 0;
  double l1 = 0.0;
  double kl = 0.0;
  double total = 0.0;
  /// Milliseconds since the trainer was constructed.
  double wall_ms = 0.0;
};

/// One normalized (observation, k-step target window) pair. Windows running
/// past the episode end repeat the last action and are masked out.
template <typename T>
struct TrainSample {
  ModelInput<T> input;
  Tensor<T> target;                // k x 2J
  std::vector<std::uint8_t> mask;  // k
};

/// Behavior cloning with the CVAE objective. Batches are drawn uniformly over
/// all (episode, timestep) pairs; every random draw (batches, dropout, latent
/// noise) comes from named substreams of the config seed.
template <typename T>
class Trainer {
 public:
  /// Throws ConfigError if the chunk is longer than every episode and
  /// DimensionError if episodes disagree with the model configuration.
  Trainer(InterActModel<T>& model, std::span<const io::DemoEpisode> episodes, const io::NormStats& stats);

  StepMetrics step();
  std::size_t steps_done() const noexcept { return steps_; }
  const Adam<T>& optimizer() const noexcept { return adam_; }

  TrainSample<T> sample_at(std::size_t episode, std::size_t t) const;
  /// Sum of the per-sample losses' parts averaged over a batch, without
  /// updating parameters (for inspection).
  StepMetrics evaluate_batch(std::span<const TrainSample<T>> batch, bool train_mode);

 private:
  struct Prepared {
    std::size_t steps = 0;
    std::vector<T> qpos, action;  // normalized, steps x 2J
    const io::DemoEpisode* source = nullptr;
  };

  StepMetrics run_batch(std::span<const TrainSample<T>> batch, bool train_mode, bool update);

  InterActModel<T>& model_;
  std::vector<Prepared> data_;
  std::size_t total_steps_ = 0;
  Adam<T> adam_;
  Rng batch_rng_, dropout_rng_, latent_rng_;
  std::size_t steps_ = 0;
  std::chrono::steady_clock::time_point start_;
};

extern template class Trainer<float>;
extern template class Trainer<double>;

}  // namespace iact
