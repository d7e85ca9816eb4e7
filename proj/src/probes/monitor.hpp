#pragma once

// Per-epoch query ΔAUCPR for training traces.

#include "fsprobe/metrics.hpp"
#include "fsprobe/probes/common.hpp"

#include <optional>

namespace fsprobe::detail {

template <class Predict>
std::optional<double> monitor_delta_aucpr(const FitOptions& options, Predict&& predict) {
  if (options.monitor_query == nullptr) return std::nullopt;
  const SupportView& q = *options.monitor_query;
  ScoredQuery scored;
  scored.labels = q.labels;
  scored.scores.reserve(q.size());
  for (Eigen::Index i = 0; i < q.points.cols(); ++i) {
    scored.scores.push_back(predict(q.points.col(i)).log_odds);
  }
  return delta_aucpr(scored);
}

}  // namespace fsprobe::detail
