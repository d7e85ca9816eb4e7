#include "fsprobe/probes/common.hpp"

#include <cmath>

namespace fsprobe {

Prediction Prediction::from_logits(double logit0, double logit1) {
  const double diff = logit1 - logit0;
  Prediction p;
  p.p1 = 1.0 / (1.0 + std::exp(-diff));
  p.p0 = 1.0 / (1.0 + std::exp(diff));
  p.log_odds = diff;
  return p;
}

namespace {
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

bool same_double(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

bool same_record(const TraceRecord& a, const TraceRecord& b) {
  if (a.epoch != b.epoch) return false;
  if (!same_double(a.ce, b.ce) || !same_double(a.f1, b.f1) || !same_double(a.f2, b.f2) ||
      !same_double(a.f2_tilde, b.f2_tilde)) {
    return false;
  }
  for (int k = 0; k < 2; ++k) {
    if (!same_double(a.fro_norm[k], b.fro_norm[k]) || !same_double(a.max_eig[k], b.max_eig[k])) {
      return false;
    }
  }
  if (a.query_delta_aucpr.has_value() != b.query_delta_aucpr.has_value()) return false;
  return !a.query_delta_aucpr || same_double(*a.query_delta_aucpr, *b.query_delta_aucpr);
}
}  // namespace

bool operator==(const TrainTrace& a, const TrainTrace& b) {
  if (!same_record(a.initial, b.initial) || a.epochs.size() != b.epochs.size()) return false;
  for (std::size_t i = 0; i < a.epochs.size(); ++i) {
    if (!same_record(a.epochs[i], b.epochs[i])) return false;
  }
  return true;
}

double cross_entropy_from_logits(double logit0, double logit1, int label) {
  return label == 1 ? softplus(logit0 - logit1) : softplus(logit1 - logit0);
}

std::array<Vector, 2> class_means(const SupportView& support) {
  std::array<Vector, 2> means;
  for (int k = 0; k < 2; ++k) {
    const Matrix pts = support.class_points(k);
    if (pts.cols() == 0) throw Error(ErrorCode::DegenerateLabels, "support class is empty");
    means[static_cast<std::size_t>(k)] = pts.rowwise().mean();
  }
  return means;
}

}  // namespace fsprobe
