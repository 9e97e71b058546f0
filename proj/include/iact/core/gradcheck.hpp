#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "iact/core/graph.hpp"

namespace iact {

struct GradCheckOptions {
  double eps = 1e-3;
  /// Coordinates probed per parameter tensor; 0 probes every coordinate.
  /// Probed coordinates are drawn without replacement from `seed`.
  std::size_t coords_per_tensor = 0;
  std::uint64_t seed = 0;
  /// Skip probes whose +/- eps evaluations change the activation pattern of a
  /// kinked op (relu, abs, clamp); central differences are not derivative
  /// estimates across a kink.
  bool skip_kinks = true;
  /// Denominator floor of the relative error. Central differences carry an
  /// absolute noise of roughly 1e-11 at eps = 1e-3 on the model objective, so
  /// gradients far below this floor cannot be compared relatively.
  double abs_floor = 1e-6;
  /// Forwarded to the analytic pass (fault injection for self-tests).
  bool corrupt_backward = false;
};

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  std::size_t probed = 0;
  std::size_t skipped_kinks = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::vector<GradCheckEntry> entries;
};

/// Builds the scalar objective on a fresh graph. Must be a pure function of the
/// parameter values (fixed data, fixed noise draws).
using ScalarObjective = std::function<Var<double>(Graph<double>&)>;

/// Compares reverse-mode gradients against central differences for every
/// trainable parameter. The per-coordinate error is
/// |analytic - numeric| / max(|analytic|, |numeric|, abs_floor); the report holds
/// the maximum per tensor and overall. Throws UsageError if the objective is
/// not scalar or eps is not positive.
GradCheckReport finite_diff_check(const ScalarObjective& f, ParameterStore<double>& params,
                                  const GradCheckOptions& options = {});

}  // namespace iact
