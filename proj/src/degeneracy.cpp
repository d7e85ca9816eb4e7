#include "fsprobe/degeneracy.hpp"

#include "fsprobe/probes/free_opt.hpp"
#include "fsprobe/rng.hpp"
#include "fsprobe/symlinalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace fsprobe {

namespace {

// Midpoint offset for direction v, or nullopt when v does not separate.
std::optional<SeparatingHyperplane> midpoint_separator(const SupportView& support, const Vector& v) {
  double min_pos = std::numeric_limits<double>::infinity();
  double max_neg = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < support.points.cols(); ++i) {
    const double proj = v.dot(support.points.col(i));
    if (support.labels[static_cast<std::size_t>(i)] == 1) {
      min_pos = std::min(min_pos, proj);
    } else {
      max_neg = std::max(max_neg, proj);
    }
  }
  if (!(min_pos > max_neg)) return std::nullopt;
  SeparatingHyperplane h;
  h.v = v;
  h.b = 0.5 * (min_pos + max_neg);
  h.margin = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < support.points.cols(); ++i) {
    const double s = v.dot(support.points.col(i)) - h.b;
    const int sign = support.labels[static_cast<std::size_t>(i)] == 1 ? 1 : -1;
    if (!(sign * s > 0.0)) return std::nullopt;
    h.margin = std::min(h.margin, std::abs(s));
  }
  return h;
}

}  // namespace

SeparatingHyperplane find_separator(const SupportView& support, std::size_t perceptron_cap) {
  if (support.size() == 0) throw Error(ErrorCode::EmptySet, "empty support");
  if (support.count(0) == 0 || support.count(1) == 0) {
    throw Error(ErrorCode::DegenerateLabels, "separator needs both classes");
  }
  const Eigen::Index d = support.points.rows();

  Vector sums = Vector::Zero(d);
  for (Eigen::Index i = 0; i < support.points.cols(); ++i) {
    sums += (support.labels[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0) * support.points.col(i);
  }
  if (sums.norm() > kZeroNorm) {
    if (auto h = midpoint_separator(support, sums / sums.norm())) {
      h->from_class_sums = true;
      return *h;
    }
  }

  // Margin-less perceptron on (z, 1).
  Vector weights = Vector::Zero(d + 1);
  std::size_t updates = 0;
  while (updates < perceptron_cap) {
    bool clean_pass = true;
    for (Eigen::Index i = 0; i < support.points.cols() && updates < perceptron_cap; ++i) {
      const double sign = support.labels[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
      const double activation = weights.head(d).dot(support.points.col(i)) + weights(d);
      if (sign * activation <= 0.0) {
        weights.head(d) += sign * support.points.col(i);
        weights(d) += sign;
        ++updates;
        clean_pass = false;
      }
    }
    if (clean_pass) break;
  }
  const Vector normal = weights.head(d);
  if (normal.norm() > kZeroNorm) {
    if (auto h = midpoint_separator(support, normal / normal.norm())) {
      h->perceptron_updates = updates;
      return *h;
    }
  }
  throw NotSeparable(updates);
}

SeparatingHyperplane find_separator(const std::vector<LabelledSample>& support,
                                    const EmbeddingSet& embeddings) {
  return find_separator(gather_support(support, embeddings));
}

DegenerateFamily::DegenerateFamily(SeparatingHyperplane hyperplane, Matrix base)
    : hyperplane_(std::move(hyperplane)), base_(std::move(base)) {
  const Eigen::Index d = hyperplane_.v.size();
  if (base_.size() == 0) base_ = Matrix::Identity(d, d);
  if (base_.rows() != d || base_.cols() != d) {
    throw Error(ErrorCode::DimMismatch, "base precision does not match the normal's dimension");
  }
  if ((base_ - base_.transpose()).norm() > 1e-12 * std::max(1.0, base_.norm())) {
    throw Error(ErrorCode::InvalidInput, "base precision must be symmetric");
  }
  if ((base_ * hyperplane_.v - hyperplane_.v).norm() > 1e-9) {
    throw Error(ErrorCode::InvalidInput, "base precision must have v as eigenvector of eigenvalue 1");
  }
}

Vector DegenerateFamily::prototype(int k) const {
  return (hyperplane_.b + (k == 1 ? 1.0 : -1.0)) * hyperplane_.v;
}

QuadraticProbeParams build_theta(const DegenerateFamily& family, double lambda) {
  if (!(lambda >= 1.0)) throw Error(ErrorCode::InvalidInput, "Theta(lambda) needs lambda >= 1");
  const Vector& v = family.hyperplane().v;
  Matrix m = family.base_precision();
  m.noalias() += (lambda - 1.0) * (v * v.transpose());
  m = symmetrize_lower(m);
  return QuadraticProbeParams({family.prototype(0), family.prototype(1)}, {m, m});
}

bool wrong_prototype_farther_along_normal(const DegenerateFamily& family,
                                          const SupportView& support) {
  const Vector& v = family.hyperplane().v;
  const double along[2] = {v.dot(family.prototype(0)), v.dot(family.prototype(1))};
  for (Eigen::Index i = 0; i < support.points.cols(); ++i) {
    const int y = support.labels[static_cast<std::size_t>(i)];
    const double proj = v.dot(support.points.col(i));
    const double wrong = proj - along[1 - y];
    const double right = proj - along[y];
    if (!(wrong * wrong > right * right)) return false;
  }
  return true;
}

double theta_ce_bound(const SeparatingHyperplane& hyperplane, double lambda) {
  const double m = 8.0 * hyperplane.margin;
  const double x = -lambda * m / 2.0;
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

std::vector<double> default_lambda_grid() { return {1.0, 10.0, 1e2, 1e3, 1e4}; }

std::vector<SweepRow> divergence_sweep(const SupportView& support,
                                       const std::vector<double>& lambdas) {
  for (std::size_t i = 1; i < lambdas.size(); ++i) {
    if (!(lambdas[i] > lambdas[i - 1])) {
      throw Error(ErrorCode::InvalidInput, "lambda grid must be strictly ascending");
    }
  }
  const DegenerateFamily family(find_separator(support));
  std::vector<SweepRow> rows;
  rows.reserve(lambdas.size());
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    const QuadraticProbeParams theta = build_theta(family, lambdas[i]);
    const LossTerms terms = loss_decomposition(theta, support);
    SweepRow row;
    row.lambda = lambdas[i];
    row.ce = terms.ce;
    row.f1 = terms.f1;
    row.f2 = terms.f2;
    row.f2_tilde = terms.f2_tilde;
    for (int k = 0; k < 2; ++k) {
      row.fro_norm[static_cast<std::size_t>(k)] = frobenius_norm(theta.m(k));
      row.max_eig[static_cast<std::size_t>(k)] =
          max_eigenvalue(theta.m(k), 1e-12, hash_combine(i, static_cast<std::uint64_t>(k)));
    }
    row.ce_bound = theta_ce_bound(family.hyperplane(), lambdas[i]);
    rows.push_back(row);
  }
  return rows;
}

SweepCheck check_sweep(const std::vector<SweepRow>& rows, double ce_tolerance) {
  SweepCheck check;
  if (rows.empty()) return check;
  check.ce_strictly_decreasing = true;
  check.fro_strictly_increasing = true;
  check.ce_within_bound = true;
  const double log2 = std::numbers::ln2;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    // Relative slack for the last-bit rounding of the softplus evaluation.
    if (rows[i].ce > rows[i].ce_bound * (1.0 + 1e-12) + 1e-300) check.ce_within_bound = false;
    if (i == 0) continue;
    if (rows[i - 1].ce < log2 && !(rows[i].ce < rows[i - 1].ce)) check.ce_strictly_decreasing = false;
    for (int k = 0; k < 2; ++k) {
      if (!(rows[i].fro_norm[static_cast<std::size_t>(k)] >
            rows[i - 1].fro_norm[static_cast<std::size_t>(k)])) {
        check.fro_strictly_increasing = false;
      }
    }
  }
  check.final_ce_below_tolerance = rows.back().ce < ce_tolerance;
  return check;
}

TrajectoryComparison eigenvalue_trajectory_compare(const SupportView& support,
                                                   const TrainConfig& cfg) {
  find_separator(support);
  FitOptions options;
  options.track_spectrum = true;
  TrajectoryComparison out;
  out.free_opt = free_opt_fit(support, cfg, /*regularized=*/false, options).second;
  out.quadratic = quadratic_probe_fit(support, cfg, options).second;
  return out;
}

double peak_max_eigenvalue(const TrainTrace& trace) {
  double peak = std::max(trace.initial.max_eig[0], trace.initial.max_eig[1]);
  for (const auto& r : trace.epochs) peak = std::max({peak, r.max_eig[0], r.max_eig[1]});
  return peak;
}

}  // namespace fsprobe
