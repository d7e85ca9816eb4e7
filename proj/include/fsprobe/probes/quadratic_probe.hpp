#pragma once

#include "fsprobe/core.hpp"
#include "fsprobe/probes/common.hpp"
#include "fsprobe/symlinalg.hpp"

#include <array>
#include <utility>

namespace fsprobe {

/// Mahalanobis head: logit_k = -(z - w_k)^T M_k (z - w_k). Each precision
/// matrix is held together with its Cholesky factor, so construction fails
/// with NotPositiveDefinite unless every M_k is SPD.
class QuadraticProbeParams {
 public:
  QuadraticProbeParams(std::array<Vector, 2> w, std::array<Matrix, 2> m);

  /// Class means with identity precision: nearest-prototype inference.
  static QuadraticProbeParams prototypes(const SupportView& support);

  const Vector& w(int k) const { return w_[static_cast<std::size_t>(k)]; }
  const Matrix& m(int k) const { return m_[static_cast<std::size_t>(k)]; }
  const SpdFactor<double>& factor(int k) const { return factor_[static_cast<std::size_t>(k)]; }
  Eigen::Index dim() const { return w_[0].size(); }

  void set_w(int k, Vector w);

  /// Squared Mahalanobis distances to both prototypes.
  std::array<double, 2> distances(const Eigen::Ref<const Vector>& z) const;

 private:
  std::array<Vector, 2> w_;
  std::array<Matrix, 2> m_;
  std::array<SpdFactor<double>, 2> factor_;
};

Prediction quadratic_probe_predict(const QuadraticProbeParams& params,
                                   const Eigen::Ref<const Vector>& z);

/// Cross-entropy split ce = f1 + f2 plus the log-det surrogate of f2.
struct LossTerms {
  double ce = 0.0;
  double f1 = 0.0;
  double f2 = 0.0;
  double f2_tilde = 0.0;
};

LossTerms loss_decomposition(const QuadraticProbeParams& params, const SupportView& support);

/// f1 + f2_tilde: with w_k fixed its minimizer over M_k is the inverse
/// empirical covariance around w_k.
double modified_loss(const QuadraticProbeParams& params, const SupportView& support);

struct QuadraticProbeGradient {
  double ce = 0.0;
  std::array<Vector, 2> w;
};

/// Gradient of the mean support cross-entropy w.r.t. w_k, M_k held fixed:
/// (1/|S|) sum_i (p_ik - [y_i = k]) * 2 M_k (z_i - w_k).
QuadraticProbeGradient quadratic_probe_w_gradient(const QuadraticProbeParams& params,
                                                  const SupportView& support);

/// Closed-form precision for one class: inverse of the shrunk empirical
/// covariance of `points` around `prototype`.
Matrix closed_form_precision(const Matrix& points, const Vector& prototype, double lambda);

/// Block-coordinate training. Each epoch first sets every M_k in closed
/// form from the current prototypes, then takes one full-batch gradient
/// step on the prototypes with M_k fixed.
std::pair<QuadraticProbeParams, TrainTrace> quadratic_probe_fit(const SupportView& support,
                                                                const TrainConfig& cfg,
                                                                const FitOptions& options = {});

std::pair<QuadraticProbeParams, TrainTrace> quadratic_probe_fit(
    const std::vector<LabelledSample>& support, const EmbeddingSet& embeddings,
    const TrainConfig& cfg, const FitOptions& options = {});

}  // namespace fsprobe
