#include "iact/core/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "iact/core/error.hpp"
#include "iact/core/rng.hpp"

namespace iact {
namespace {

struct Probe {
  double value;
  std::uint64_t kinks;
};

Probe evaluate(const ScalarObjective& f) {
  Graph<double> g(GraphOptions{.record = false, .track_kinks = true});
  Var<double> out = f(g);
  if (out.value().size() != 1) {
    throw UsageError("finite_diff_check: objective must be scalar, got " + shape_string(out.value().shape()));
  }
  return {out.value()[0], g.kink_signature()};
}

}  // namespace

GradCheckReport finite_diff_check(const ScalarObjective& f, ParameterStore<double>& params,
                                  const GradCheckOptions& options) {
  if (!(options.eps > 0.0)) throw UsageError("finite_diff_check: eps must be positive");

  // Analytic pass.
  params.zero_grad();
  {
    Graph<double> g(GraphOptions{.record = true, .corrupt_backward = options.corrupt_backward});
    Var<double> loss = f(g);
    if (loss.value().size() != 1) {
      throw UsageError("finite_diff_check: objective must be scalar, got " + shape_string(loss.value().shape()));
    }
    g.backward(loss);
  }
  const std::uint64_t base_kinks = evaluate(f).kinks;

  GradCheckReport report;
  Rng rng = Rng(options.seed).substream("gradcheck");
  for (auto& [name, p] : params) {
    if (!p.trainable) continue;
    GradCheckEntry entry;
    entry.name = name;
    std::vector<std::size_t> coords(p.value.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.coords_per_tensor != 0 && options.coords_per_tensor < coords.size()) {
      // Partial Fisher-Yates.
      Rng local = rng.substream(name);
      for (std::size_t i = 0; i < options.coords_per_tensor; ++i) {
        std::swap(coords[i], coords[i + local.below(coords.size() - i)]);
      }
      coords.resize(options.coords_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t idx : coords) {
      const double saved = p.value[idx];
      p.value[idx] = saved + options.eps;
      const Probe plus = evaluate(f);
      p.value[idx] = saved - options.eps;
      const Probe minus = evaluate(f);
      p.value[idx] = saved;
      if (options.skip_kinks && (plus.kinks != base_kinks || minus.kinks != base_kinks)) {
        ++entry.skipped_kinks;
        continue;
      }
      const double numeric = (plus.value - minus.value) / (2.0 * options.eps);
      const double analytic = p.grad[idx];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), options.abs_floor});
      const double err = std::abs(analytic - numeric) / denom;
      ++entry.probed;
      if (entry.probed == 1 || err > entry.max_rel_error) {
        entry.max_rel_error = err;
        entry.worst_index = idx;
        entry.analytic_at_worst = analytic;
        entry.numeric_at_worst = numeric;
      }
    }
    if (report.worst_parameter.empty() || entry.max_rel_error > report.max_rel_error) {
      report.worst_parameter = name;
      report.max_rel_error = entry.max_rel_error;
    }
    report.entries.push_back(std::move(entry));
  }
  params.zero_grad();
  return report;
}

}  // namespace iact
