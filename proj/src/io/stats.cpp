#include "iact/io/stats.hpp"

#include <algorithm>
#include <cmath>

#include "iact/core/error.hpp"

namespace iact::io {
namespace {

struct Welford {
  std::vector<double> mean, m2;
  std::size_t n = 0;

  void add(std::span<const float> x) {
    if (mean.empty()) {
      mean.assign(x.size(), 0.0);
      m2.assign(x.size(), 0.0);
    }
    ++n;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - mean[i];
      mean[i] += d / static_cast<double>(n);
      m2[i] += d * (x[i] - mean[i]);
    }
  }

  void emit(std::vector<float>& mu, std::vector<float>& sd) const {
    mu.resize(mean.size());
    sd.resize(mean.size());
    for (std::size_t i = 0; i < mean.size(); ++i) {
      mu[i] = static_cast<float>(mean[i]);
      sd[i] = static_cast<float>(std::max(std::sqrt(m2[i] / static_cast<double>(n)), kStdFloor));
    }
  }
};

void check_dim(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw DimensionError(std::string("normalize ") + what + ": width " + std::to_string(got) + " vs stats " +
                         std::to_string(want));
  }
}

}  // namespace

std::vector<float> NormStats::normalize_qpos(std::span<const float> q) const {
  check_dim(q.size(), qpos_mean.size(), "qpos");
  std::vector<float> out(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) out[i] = (q[i] - qpos_mean[i]) / qpos_std[i];
  return out;
}

std::vector<float> NormStats::normalize_action(std::span<const float> a) const {
  const std::size_t d = action_mean.size();
  if (d == 0 || a.size() % d != 0) check_dim(a.size(), d, "action");
  std::vector<float> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = (a[i] - action_mean[i % d]) / action_std[i % d];
  return out;
}

std::vector<float> NormStats::denormalize_action(std::span<const float> a) const {
  const std::size_t d = action_mean.size();
  if (d == 0 || a.size() % d != 0) check_dim(a.size(), d, "action");
  std::vector<float> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * action_std[i % d] + action_mean[i % d];
  return out;
}

NormStats compute_stats(std::span<const DemoEpisode> episodes) {
  if (episodes.empty()) throw UsageError("compute_stats: empty dataset");
  Welford q, a;
  const std::size_t dim = episodes.front().action_dim();
  for (const auto& ep : episodes) {
    ep.validate();
    if (ep.action_dim() != dim) {
      throw DimensionError("compute_stats: episodes mix " + std::to_string(dim) + " and " +
                           std::to_string(ep.action_dim()) + " joint dimensions");
    }
    for (std::size_t t = 0; t < ep.steps; ++t) {
      q.add(ep.qpos_at(t));
      a.add(ep.action_at(t));
    }
  }
  NormStats s;
  q.emit(s.qpos_mean, s.qpos_std);
  a.emit(s.action_mean, s.action_std);
  return s;
}

NormStats compute_stats(const std::vector<std::filesystem::path>& paths) {
  std::vector<DemoEpisode> eps;
  eps.reserve(paths.size());
  for (const auto& p : paths) eps.push_back(read_episode(p));
  return compute_stats(eps);
}

}  // namespace iact::io
