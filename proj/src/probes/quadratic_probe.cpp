#include "fsprobe/probes/quadratic_probe.hpp"

#include "fsprobe/rng.hpp"
#include "monitor.hpp"

#include <cmath>

namespace fsprobe {

QuadraticProbeParams::QuadraticProbeParams(std::array<Vector, 2> w, std::array<Matrix, 2> m)
    : w_(std::move(w)), m_(std::move(m)) {
  for (std::size_t k = 0; k < 2; ++k) {
    if (m_[k].rows() != w_[k].size() || m_[k].cols() != w_[k].size() ||
        w_[k].size() != w_[0].size()) {
      throw Error(ErrorCode::DimMismatch, "prototype and precision dimensions disagree");
    }
    factor_[k] = spd_factorize(m_[k], "precision matrix of class " + std::to_string(k));
  }
}

QuadraticProbeParams QuadraticProbeParams::prototypes(const SupportView& support) {
  const Eigen::Index d = support.points.rows();
  return QuadraticProbeParams(class_means(support), {Matrix::Identity(d, d), Matrix::Identity(d, d)});
}

void QuadraticProbeParams::set_w(int k, Vector w) {
  if (w.size() != dim()) throw Error(ErrorCode::DimMismatch, "prototype dimension changed");
  w_[static_cast<std::size_t>(k)] = std::move(w);
}

std::array<double, 2> QuadraticProbeParams::distances(const Eigen::Ref<const Vector>& z) const {
  return {mahalanobis_sq(z, w_[0], factor_[0]), mahalanobis_sq(z, w_[1], factor_[1])};
}

Prediction quadratic_probe_predict(const QuadraticProbeParams& params,
                                   const Eigen::Ref<const Vector>& z) {
  const auto dist = params.distances(z);
  return Prediction::from_logits(-dist[0], -dist[1]);
}

LossTerms loss_decomposition(const QuadraticProbeParams& params, const SupportView& support) {
  LossTerms terms;
  for (Eigen::Index i = 0; i < support.points.cols(); ++i) {
    const int y = support.labels[static_cast<std::size_t>(i)];
    const auto dist = params.distances(support.points.col(i));
    const double hi = std::max(-dist[0], -dist[1]);
    terms.f1 += dist[static_cast<std::size_t>(y)];
    terms.f2 += hi + std::log(std::exp(-dist[0] - hi) + std::exp(-dist[1] - hi));
    terms.ce += cross_entropy_from_logits(-dist[0], -dist[1], y);
  }
  const double n = static_cast<double>(support.size());
  terms.f1 /= n;
  terms.f2 /= n;
  terms.ce /= n;
  for (int k = 0; k < 2; ++k) {
    terms.f2_tilde -= static_cast<double>(support.count(k)) / n * params.factor(k).log_det();
  }
  return terms;
}

double modified_loss(const QuadraticProbeParams& params, const SupportView& support) {
  const LossTerms terms = loss_decomposition(params, support);
  return terms.f1 + terms.f2_tilde;
}

QuadraticProbeGradient quadratic_probe_w_gradient(const QuadraticProbeParams& params,
                                                  const SupportView& support) {
  const Eigen::Index d = params.dim();
  // Accumulate sum_i g_ik (z_i - w_k), then apply 2 M_k / |S| once.
  std::array<Vector, 2> weighted = {Vector::Zero(d), Vector::Zero(d)};
  QuadraticProbeGradient grad;
  for (Eigen::Index i = 0; i < support.points.cols(); ++i) {
    const auto z = support.points.col(i);
    const int y = support.labels[static_cast<std::size_t>(i)];
    const auto dist = params.distances(z);
    const Prediction p = Prediction::from_logits(-dist[0], -dist[1]);
    grad.ce += cross_entropy_from_logits(-dist[0], -dist[1], y);
    const double g[2] = {p.p0 - (y == 0 ? 1.0 : 0.0), p.p1 - (y == 1 ? 1.0 : 0.0)};
    for (int k = 0; k < 2; ++k) {
      weighted[static_cast<std::size_t>(k)] += g[k] * (z - params.w(k));
    }
  }
  const double n = static_cast<double>(support.size());
  grad.ce /= n;
  for (int k = 0; k < 2; ++k) {
    grad.w[static_cast<std::size_t>(k)] = (2.0 / n) * (params.m(k) * weighted[static_cast<std::size_t>(k)]);
  }
  return grad;
}

Matrix closed_form_precision(const Matrix& points, const Vector& prototype, double lambda) {
  const Matrix sigma = shrink(empirical_covariance(points, prototype), lambda);
  return spd_inverse(spd_factorize(
      sigma, "class covariance is singular at shrinkage lambda " + std::to_string(lambda) +
                 "; raise lambda"));
}

namespace {
TraceRecord record(const QuadraticProbeParams& params, const SupportView& support,
                   const TrainConfig& cfg, const FitOptions& options, int epoch) {
  TraceRecord r;
  r.epoch = epoch;
  const LossTerms terms = loss_decomposition(params, support);
  r.ce = terms.ce;
  r.f1 = terms.f1;
  r.f2 = terms.f2;
  r.f2_tilde = terms.f2_tilde;
  if (options.track_spectrum) {
    for (int k = 0; k < 2; ++k) {
      r.fro_norm[static_cast<std::size_t>(k)] = frobenius_norm(params.m(k));
      r.max_eig[static_cast<std::size_t>(k)] = max_eigenvalue(
          params.m(k), 1e-10,
          hash_combine(hash_combine(cfg.seed, static_cast<std::uint64_t>(epoch)),
                       static_cast<std::uint64_t>(k)));
    }
  }
  r.query_delta_aucpr = detail::monitor_delta_aucpr(
      options, [&](const auto& z) { return quadratic_probe_predict(params, z); });
  return r;
}
}  // namespace

std::pair<QuadraticProbeParams, TrainTrace> quadratic_probe_fit(const SupportView& support,
                                                                const TrainConfig& cfg,
                                                                const FitOptions& options) {
  cfg.validate();
  const std::array<Matrix, 2> class_points = {support.class_points(0), support.class_points(1)};
  QuadraticProbeParams params = QuadraticProbeParams::prototypes(support);
  TrainTrace trace;
  trace.initial = record(params, support, cfg, options, 0);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::array<Vector, 2> w = {params.w(0), params.w(1)};
    std::array<Matrix, 2> m;
    for (std::size_t k = 0; k < 2; ++k) {
      m[k] = closed_form_precision(class_points[k], w[k], cfg.shrinkage_lambda);
    }
    params = QuadraticProbeParams(std::move(w), std::move(m));
    if (!cfg.freeze_prototypes) {
      const QuadraticProbeGradient grad = quadratic_probe_w_gradient(params, support);
      for (int k = 0; k < 2; ++k) {
        params.set_w(k, params.w(k) - cfg.learning_rate * grad.w[static_cast<std::size_t>(k)]);
      }
    }
    trace.epochs.push_back(record(params, support, cfg, options, epoch));
  }
  return {std::move(params), std::move(trace)};
}

std::pair<QuadraticProbeParams, TrainTrace> quadratic_probe_fit(
    const std::vector<LabelledSample>& support, const EmbeddingSet& embeddings,
    const TrainConfig& cfg, const FitOptions& options) {
  return quadratic_probe_fit(gather_support(support, embeddings), cfg, options);
}

}  // namespace fsprobe
