#pragma once

// Constructive degenerate solutions of the Mahalanobis head on separable
// supports, and the tools that track them.
//
// Given a unit normal v and offset b that strictly separate the support,
// the family Theta(lambda) sets w_0 = (b - 1) v, w_1 = (b + 1) v and
// M_0 = M_1 = base + (lambda - 1) v v^T. With base v = v the distance gap
// between the wrong and the right prototype is exactly 4 lambda |v.z - b|,
// so the cross-entropy of every sample is softplus(-4 lambda |v.z - b|) and
// vanishes as lambda grows while ||M||_F diverges.

#include "fsprobe/core.hpp"
#include "fsprobe/probes/common.hpp"
#include "fsprobe/probes/quadratic_probe.hpp"

#include <vector>

namespace fsprobe {

inline constexpr std::size_t kPerceptronCap = 100000;

struct SeparatingHyperplane {
  Vector v;
  double b = 0.0;
  /// min_i |<v, z_i> - b| over the support, strictly positive.
  double margin = 0.0;
  /// True when the difference-of-class-sums direction already separated.
  bool from_class_sums = false;
  std::size_t perceptron_updates = 0;
};

/// Tries v = sum(positives) - sum(negatives) first, then the perceptron.
/// b is the midpoint between the extreme projections of the two classes.
/// Throws NotSeparable when the perceptron exhausts its update budget.
SeparatingHyperplane find_separator(const SupportView& support,
                                    std::size_t perceptron_cap = kPerceptronCap);

SeparatingHyperplane find_separator(const std::vector<LabelledSample>& support,
                                    const EmbeddingSet& embeddings);

class DegenerateFamily {
 public:
  /// base defaults to I. Throws InvalidInput unless base is symmetric with
  /// base * v = v.
  explicit DegenerateFamily(SeparatingHyperplane hyperplane, Matrix base = {});

  const SeparatingHyperplane& hyperplane() const noexcept { return hyperplane_; }
  const Matrix& base_precision() const noexcept { return base_; }

  /// w_k of the construction, independent of lambda.
  Vector prototype(int k) const;

 private:
  SeparatingHyperplane hyperplane_;
  Matrix base_;
};

/// Theta(lambda) for lambda >= 1.
QuadraticProbeParams build_theta(const DegenerateFamily& family, double lambda);

/// (v.(z_i - w_{1-y_i}))^2 > (v.(z_i - w_{y_i}))^2 for every support sample.
bool wrong_prototype_farther_along_normal(const DegenerateFamily& family,
                                          const SupportView& support);

/// Upper bound on the mean support cross-entropy under Theta(lambda):
/// log(1 + exp(-lambda * m / 2 + c)) with m = 8 * margin and c = 0.
double theta_ce_bound(const SeparatingHyperplane& hyperplane, double lambda);

struct SweepRow {
  double lambda = 0.0;
  double ce = 0.0;
  double f1 = 0.0;
  double f2 = 0.0;
  double f2_tilde = 0.0;
  std::array<double, 2> fro_norm{};
  std::array<double, 2> max_eig{};
  double ce_bound = 0.0;
};

std::vector<double> default_lambda_grid();

/// Evaluates Theta(lambda) on the support for each lambda of an ascending
/// grid. Propagates NotSeparable from the separator search.
std::vector<SweepRow> divergence_sweep(const SupportView& support,
                                       const std::vector<double>& lambdas = default_lambda_grid());

struct SweepCheck {
  bool ce_strictly_decreasing = false;
  bool fro_strictly_increasing = false;
  bool final_ce_below_tolerance = false;
  bool ce_within_bound = false;

  bool ok() const {
    return ce_strictly_decreasing && fro_strictly_increasing && final_ce_below_tolerance &&
           ce_within_bound;
  }
};

/// Monotonicity is required from the first row whose ce is below log 2.
SweepCheck check_sweep(const std::vector<SweepRow>& rows, double ce_tolerance = 1e-3);

struct TrajectoryComparison {
  TrainTrace free_opt;
  TrainTrace quadratic;
};

/// Runs unregularized Free-Opt and the quadratic probe with the same
/// configuration, both with spectrum tracking.
TrajectoryComparison eigenvalue_trajectory_compare(const SupportView& support,
                                                   const TrainConfig& cfg);

/// Largest max-eigenvalue over all records of a trace (initial included).
double peak_max_eigenvalue(const TrainTrace& trace);

}  // namespace fsprobe
