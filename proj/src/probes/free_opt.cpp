#include "fsprobe/probes/free_opt.hpp"

#include "fsprobe/rng.hpp"
#include "fsprobe/symlinalg.hpp"
#include "monitor.hpp"

#include <Eigen/LU>

#include <cmath>
#include <limits>

namespace fsprobe {

FreeOptParams FreeOptParams::initial(const SupportView& support) {
  const Eigen::Index d = support.points.rows();
  FreeOptParams params;
  params.w = class_means(support);
  params.d_factor = {Matrix::Identity(d, d), Matrix::Identity(d, d)};
  return params;
}

Matrix FreeOptParams::precision(int k) const {
  const Matrix& dk = d_factor[static_cast<std::size_t>(k)];
  return symmetrize_lower((dk.transpose() * dk).eval());
}

namespace {
std::array<double, 2> distances(const FreeOptParams& params, const Eigen::Ref<const Vector>& z) {
  return {(params.d_factor[0] * (z - params.w[0])).squaredNorm(),
          (params.d_factor[1] * (z - params.w[1])).squaredNorm()};
}
}  // namespace

Prediction free_opt_predict(const FreeOptParams& params, const Eigen::Ref<const Vector>& z) {
  const auto dist = distances(params, z);
  return Prediction::from_logits(-dist[0], -dist[1]);
}

FreeOptGradient free_opt_gradient(const FreeOptParams& params, const SupportView& support,
                                  double reg_weight) {
  const Eigen::Index d = params.w[0].size();
  const double n = static_cast<double>(support.size());
  // sum_i g_ik u_ik and sum_i g_ik u_ik u_ik^T with u_ik = z_i - w_k.
  std::array<Vector, 2> first = {Vector::Zero(d), Vector::Zero(d)};
  std::array<Matrix, 2> second = {Matrix::Zero(d, d), Matrix::Zero(d, d)};
  FreeOptGradient grad;
  for (Eigen::Index i = 0; i < support.points.cols(); ++i) {
    const auto z = support.points.col(i);
    const int y = support.labels[static_cast<std::size_t>(i)];
    const auto dist = distances(params, z);
    const Prediction p = Prediction::from_logits(-dist[0], -dist[1]);
    grad.loss += cross_entropy_from_logits(-dist[0], -dist[1], y);
    const double g[2] = {p.p0 - (y == 0 ? 1.0 : 0.0), p.p1 - (y == 1 ? 1.0 : 0.0)};
    for (std::size_t k = 0; k < 2; ++k) {
      const Vector u = z - params.w[k];
      first[k] += g[k] * u;
      second[k].noalias() += g[k] * (u * u.transpose());
    }
  }
  grad.loss /= n;
  for (std::size_t k = 0; k < 2; ++k) {
    const Matrix& dk = params.d_factor[k];
    const Matrix mk = params.precision(static_cast<int>(k));
    grad.w[k] = (2.0 / n) * (mk * first[k]);
    grad.d_factor[k] = (-2.0 / n) * (dk * second[k]);
    if (reg_weight > 0.0) {
      const double fro = mk.norm();
      grad.loss += reg_weight * fro;
      if (fro > 0.0) grad.d_factor[k] += (2.0 * reg_weight / fro) * (dk * mk);
    }
  }
  return grad;
}

double free_opt_loss(const FreeOptParams& params, const SupportView& support, double reg_weight) {
  double ce = 0.0;
  for (Eigen::Index i = 0; i < support.points.cols(); ++i) {
    const auto dist = distances(params, support.points.col(i));
    ce += cross_entropy_from_logits(-dist[0], -dist[1], support.labels[static_cast<std::size_t>(i)]);
  }
  ce /= static_cast<double>(support.size());
  if (reg_weight > 0.0) {
    for (int k = 0; k < 2; ++k) ce += reg_weight * params.precision(k).norm();
  }
  return ce;
}

namespace {
TraceRecord record(const FreeOptParams& params, const SupportView& support, const TrainConfig& cfg,
                   const FitOptions& options, int epoch) {
  TraceRecord r;
  r.epoch = epoch;
  const double n = static_cast<double>(support.size());
  double ce = 0.0, f1 = 0.0, f2 = 0.0;
  for (Eigen::Index i = 0; i < support.points.cols(); ++i) {
    const int y = support.labels[static_cast<std::size_t>(i)];
    const auto dist = distances(params, support.points.col(i));
    const double hi = std::max(-dist[0], -dist[1]);
    f1 += dist[static_cast<std::size_t>(y)];
    f2 += hi + std::log(std::exp(-dist[0] - hi) + std::exp(-dist[1] - hi));
    ce += cross_entropy_from_logits(-dist[0], -dist[1], y);
  }
  r.ce = ce / n;
  r.f1 = f1 / n;
  r.f2 = f2 / n;
  // log det M_k = 2 log |det D_k|; -inf contributions when D_k is singular.
  double f2_tilde = 0.0;
  for (int k = 0; k < 2; ++k) {
    const Eigen::PartialPivLU<Matrix> lu(params.d_factor[static_cast<std::size_t>(k)]);
    const double logabs = lu.matrixLU().diagonal().cwiseAbs().array().log().sum();
    f2_tilde -= static_cast<double>(support.count(k)) / n * 2.0 * logabs;
  }
  r.f2_tilde = f2_tilde;
  if (options.track_spectrum) {
    for (int k = 0; k < 2; ++k) {
      const Matrix mk = params.precision(k);
      r.fro_norm[static_cast<std::size_t>(k)] = mk.norm();
      r.max_eig[static_cast<std::size_t>(k)] = max_eigenvalue(
          mk, 1e-10,
          hash_combine(hash_combine(cfg.seed, static_cast<std::uint64_t>(epoch)),
                       static_cast<std::uint64_t>(k)));
    }
  }
  r.query_delta_aucpr = detail::monitor_delta_aucpr(
      options, [&](const auto& z) { return free_opt_predict(params, z); });
  return r;
}
}  // namespace

std::pair<FreeOptParams, TrainTrace> free_opt_fit(const SupportView& support,
                                                  const TrainConfig& cfg, bool regularized,
                                                  const FitOptions& options) {
  cfg.validate();
  const double reg = regularized ? cfg.free_opt_reg_weight : 0.0;
  FreeOptParams params = FreeOptParams::initial(support);
  TrainTrace trace;
  trace.initial = record(params, support, cfg, options, 0);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const FreeOptGradient grad = free_opt_gradient(params, support, reg);
    for (std::size_t k = 0; k < 2; ++k) {
      params.w[k] -= cfg.learning_rate * grad.w[k];
      params.d_factor[k] -= cfg.learning_rate * grad.d_factor[k];
    }
    trace.epochs.push_back(record(params, support, cfg, options, epoch));
  }
  return {std::move(params), std::move(trace)};
}

std::pair<FreeOptParams, TrainTrace> free_opt_fit(const std::vector<LabelledSample>& support,
                                                  const EmbeddingSet& embeddings,
                                                  const TrainConfig& cfg, bool regularized,
                                                  const FitOptions& options) {
  return free_opt_fit(gather_support(support, embeddings), cfg, regularized, options);
}

}  // namespace fsprobe
