#include "fsprobe/probes/linear_probe.hpp"

#include "monitor.hpp"

namespace fsprobe {

LinearProbeParams LinearProbeParams::initial(const SupportView& support, double tau) {
  const auto means = class_means(support);
  LinearProbeParams params;
  for (std::size_t k = 0; k < 2; ++k) params.w[k] = normalize_embedding(means[k]);
  params.tau = tau;
  return params;
}

Prediction linear_probe_predict(const LinearProbeParams& params, const Eigen::Ref<const Vector>& z) {
  return Prediction::from_logits(params.tau * params.w[0].dot(z) + params.b[0],
                                 params.tau * params.w[1].dot(z) + params.b[1]);
}

LinearProbeGradient linear_probe_gradient(const LinearProbeParams& params,
                                          const SupportView& support) {
  const Eigen::Index d = support.points.rows();
  const double inv_n = 1.0 / static_cast<double>(support.size());
  LinearProbeGradient grad;
  grad.w = {Vector::Zero(d), Vector::Zero(d)};
  for (Eigen::Index i = 0; i < support.points.cols(); ++i) {
    const auto z = support.points.col(i);
    const int y = support.labels[static_cast<std::size_t>(i)];
    const double l0 = params.tau * params.w[0].dot(z) + params.b[0];
    const double l1 = params.tau * params.w[1].dot(z) + params.b[1];
    const Prediction p = Prediction::from_logits(l0, l1);
    grad.ce += cross_entropy_from_logits(l0, l1, y);
    const double g[2] = {p.p0 - (y == 0 ? 1.0 : 0.0), p.p1 - (y == 1 ? 1.0 : 0.0)};
    for (std::size_t k = 0; k < 2; ++k) {
      grad.w[k] += (g[k] * params.tau * inv_n) * z;
      grad.b[k] += g[k] * inv_n;
    }
  }
  grad.ce *= inv_n;
  return grad;
}

double linear_probe_loss(const LinearProbeParams& params, const SupportView& support) {
  double ce = 0.0;
  for (Eigen::Index i = 0; i < support.points.cols(); ++i) {
    const auto z = support.points.col(i);
    ce += cross_entropy_from_logits(params.tau * params.w[0].dot(z) + params.b[0],
                                    params.tau * params.w[1].dot(z) + params.b[1],
                                    support.labels[static_cast<std::size_t>(i)]);
  }
  return ce / static_cast<double>(support.size());
}

namespace {
TraceRecord record(const LinearProbeParams& params, const SupportView& support,
                   const FitOptions& options, int epoch) {
  TraceRecord r;
  r.epoch = epoch;
  r.ce = linear_probe_loss(params, support);
  r.query_delta_aucpr = detail::monitor_delta_aucpr(
      options, [&](const auto& z) { return linear_probe_predict(params, z); });
  return r;
}
}  // namespace

std::pair<LinearProbeParams, TrainTrace> linear_probe_fit(const SupportView& support,
                                                          const TrainConfig& cfg,
                                                          const FitOptions& options) {
  cfg.validate();
  LinearProbeParams params = LinearProbeParams::initial(support, cfg.temperature);
  TrainTrace trace;
  trace.initial = record(params, support, options, 0);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const LinearProbeGradient grad = linear_probe_gradient(params, support);
    for (std::size_t k = 0; k < 2; ++k) {
      params.w[k] = normalize_embedding(params.w[k] - cfg.learning_rate * grad.w[k]);
      params.b[k] -= cfg.learning_rate * grad.b[k];
    }
    trace.epochs.push_back(record(params, support, options, epoch));
  }
  return {std::move(params), std::move(trace)};
}

std::pair<LinearProbeParams, TrainTrace> linear_probe_fit(
    const std::vector<LabelledSample>& support, const EmbeddingSet& embeddings,
    const TrainConfig& cfg, const FitOptions& options) {
  return linear_probe_fit(gather_support(support, embeddings), cfg, options);
}

}  // namespace fsprobe
