#pragma once

#include "fsprobe/core.hpp"
#include "fsprobe/probes/common.hpp"

#include <array>
#include <utility>

namespace fsprobe {

/// Mahalanobis head trained by plain gradient descent on w_k and a square
/// factor D_k with M_k = D_k^T D_k.
struct FreeOptParams {
  std::array<Vector, 2> w;
  std::array<Matrix, 2> d_factor;

  /// Class means, D_k = I.
  static FreeOptParams initial(const SupportView& support);

  Matrix precision(int k) const;
};

Prediction free_opt_predict(const FreeOptParams& params, const Eigen::Ref<const Vector>& z);

struct FreeOptGradient {
  double loss = 0.0;
  std::array<Vector, 2> w;
  std::array<Matrix, 2> d_factor;
};

/// Mean support cross-entropy plus reg_weight * sum_k ||D_k^T D_k||_F, and
/// its gradient.
FreeOptGradient free_opt_gradient(const FreeOptParams& params, const SupportView& support,
                                  double reg_weight);

double free_opt_loss(const FreeOptParams& params, const SupportView& support, double reg_weight);

/// `regularized` selects the penalty weight cfg.free_opt_reg_weight, else 0.
std::pair<FreeOptParams, TrainTrace> free_opt_fit(const SupportView& support,
                                                  const TrainConfig& cfg, bool regularized,
                                                  const FitOptions& options = {});

std::pair<FreeOptParams, TrainTrace> free_opt_fit(const std::vector<LabelledSample>& support,
                                                  const EmbeddingSet& embeddings,
                                                  const TrainConfig& cfg, bool regularized,
                                                  const FitOptions& options = {});

}  // namespace fsprobe
