#pragma once

#include "fsprobe/core.hpp"
#include "fsprobe/probes/common.hpp"

#include <array>
#include <utility>

namespace fsprobe {

/// Cosine-similarity head: logit_k = tau * <z, w_k> + b_k with unit w_k.
struct LinearProbeParams {
  std::array<Vector, 2> w;
  std::array<double, 2> b{0.0, 0.0};
  double tau = 10.0;

  /// w_k = normalized class means, b_k = 0.
  static LinearProbeParams initial(const SupportView& support, double tau);
};

Prediction linear_probe_predict(const LinearProbeParams& params, const Eigen::Ref<const Vector>& z);

struct LinearProbeGradient {
  double ce = 0.0;
  std::array<Vector, 2> w;
  std::array<double, 2> b{0.0, 0.0};
};

/// Mean support cross-entropy and its gradient w.r.t. w_k, b_k (ignoring
/// the unit-norm constraint, which the fit re-imposes after each step).
LinearProbeGradient linear_probe_gradient(const LinearProbeParams& params,
                                          const SupportView& support);

double linear_probe_loss(const LinearProbeParams& params, const SupportView& support);

std::pair<LinearProbeParams, TrainTrace> linear_probe_fit(const SupportView& support,
                                                          const TrainConfig& cfg,
                                                          const FitOptions& options = {});

std::pair<LinearProbeParams, TrainTrace> linear_probe_fit(
    const std::vector<LabelledSample>& support, const EmbeddingSet& embeddings,
    const TrainConfig& cfg, const FitOptions& options = {});

}  // namespace fsprobe
