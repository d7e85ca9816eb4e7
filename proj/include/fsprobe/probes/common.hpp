#pragma once

#include "fsprobe/core.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace fsprobe {

/// Class probabilities of a binary head. `log_odds` = logit_1 - logit_0 is
/// kept alongside so ranking never suffers from saturated probabilities.
struct Prediction {
  double p0 = 0.5;
  double p1 = 0.5;
  double log_odds = 0.0;

  static Prediction from_logits(double logit0, double logit1);
};

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// One row of a training trace. Terms a head does not define stay NaN.
struct TraceRecord {
  int epoch = 0;
  double ce = kNaN;
  double f1 = kNaN;
  double f2 = kNaN;
  double f2_tilde = kNaN;
  std::array<double, 2> fro_norm{kNaN, kNaN};
  std::array<double, 2> max_eig{kNaN, kNaN};
  std::optional<double> query_delta_aucpr;
};

/// `initial` is the state before epoch 1; `epochs` holds one record per
/// completed epoch, evaluated on the parameters at the end of that epoch.
struct TrainTrace {
  TraceRecord initial;
  std::vector<TraceRecord> epochs;

  friend bool operator==(const TrainTrace& a, const TrainTrace& b);
};

struct FitOptions {
  /// Frobenius norms and largest eigenvalues per epoch.
  bool track_spectrum = true;
  /// When set, ΔAUCPR on these samples is recorded per epoch.
  const SupportView* monitor_query = nullptr;
};

/// Mean class vectors of the support, columns 0 and 1.
std::array<Vector, 2> class_means(const SupportView& support);

/// -log p_y from a logit pair, overflow safe.
double cross_entropy_from_logits(double logit0, double logit1, int label);

}  // namespace fsprobe
