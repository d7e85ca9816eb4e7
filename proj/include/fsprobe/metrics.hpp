#pragma once

#include "fsprobe/core.hpp"

#include <optional>
#include <string>
#include <vector>

namespace fsprobe {

/// Parallel scores and binary labels, at least one of each class.
struct ScoredQuery {
  std::vector<double> scores;
  std::vector<int> labels;

  /// Throws LengthMismatch, InvalidInput, or DegenerateLabels.
  void validate() const;
  std::size_t positives() const;
  double prevalence() const;
};

/// Step-wise average precision, sum_n (R_n - R_{n-1}) P_n over the ranking
/// by descending score. Within a group of tied scores negatives are ranked
/// before positives, so the value never depends on input order.
double average_precision(const ScoredQuery& q);

/// average_precision - prevalence.
double delta_aucpr(const ScoredQuery& q);

/// Precision among the top max(1, floor(k% * n)) samples, same tie rule.
double hitrate_at_percent(const ScoredQuery& q, double k_percent);

/// One evaluated (model, task, support size, hit fraction, repeat) cell.
struct EpisodeRow {
  std::string model;
  std::string task_id;
  int support_size = 0;
  /// Unset for balanced episodes.
  std::optional<double> hit_fraction;
  int repeat = 0;
  int support_positives = 0;
  int query_size = 0;
  int query_positives = 0;
  /// Metric name -> value, in a fixed column order shared by all rows.
  std::vector<std::pair<std::string, double>> metrics;
};

struct SummaryRow {
  std::string model;
  int support_size = 0;
  std::optional<double> hit_fraction;
  std::string metric;
  double mean = 0.0;
  /// 1.96 * sample sd / sqrt(n); 0 for a single row.
  double half_width = 0.0;
  std::size_t n = 0;
  /// Average over (task, repeat) cells of the model's rank among the models
  /// present in the cell (1 = highest value, ties share the mean position).
  double mean_rank = 0.0;
};

struct EvalReport {
  std::vector<EpisodeRow> rows;
  std::vector<SummaryRow> summary;
};

/// Orders rows canonically and computes the summary. The result does not
/// depend on the input order.
EvalReport aggregate(std::vector<EpisodeRow> rows);

/// Ranks with ties sharing the mean of their positions; rank 1 is the
/// largest value.
std::vector<double> descending_ranks(const std::vector<double>& values);

}  // namespace fsprobe
