#include "fsprobe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <tuple>

namespace fsprobe {

void ScoredQuery::validate() const {
  if (scores.size() != labels.size()) {
    throw Error(ErrorCode::LengthMismatch, "scores and labels differ in length");
  }
  for (double s : scores) {
    if (std::isnan(s)) throw Error(ErrorCode::InvalidInput, "NaN score");
  }
  std::size_t pos = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw Error(ErrorCode::InvalidInput, "labels must be 0 or 1");
    pos += static_cast<std::size_t>(y);
  }
  if (pos == 0 || pos == labels.size()) {
    throw Error(ErrorCode::DegenerateLabels, "query needs at least one positive and one negative");
  }
}

std::size_t ScoredQuery::positives() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

double ScoredQuery::prevalence() const {
  return static_cast<double>(positives()) / static_cast<double>(labels.size());
}

namespace {

// Descending score; negatives first inside a tie.
std::vector<std::size_t> pessimistic_order(const ScoredQuery& q) {
  std::vector<std::size_t> order(q.scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (q.scores[a] != q.scores[b]) return q.scores[a] > q.scores[b];
    return q.labels[a] < q.labels[b];
  });
  return order;
}

}  // namespace

double average_precision(const ScoredQuery& q) {
  q.validate();
  const auto order = pessimistic_order(q);
  const double total_pos = static_cast<double>(q.positives());
  double ap = 0.0;
  std::size_t tp = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (q.labels[order[rank]] == 1) {
      ++tp;
      ap += static_cast<double>(tp) / static_cast<double>(rank + 1);
    }
  }
  return ap / total_pos;
}

double delta_aucpr(const ScoredQuery& q) { return average_precision(q) - q.prevalence(); }

double hitrate_at_percent(const ScoredQuery& q, double k_percent) {
  q.validate();
  if (!(k_percent > 0.0 && k_percent <= 100.0)) {
    throw Error(ErrorCode::InvalidInput, "k_percent must lie in (0, 100]");
  }
  const std::size_t n = q.scores.size();
  // The epsilon keeps e.g. 1% of 1000 at 10 despite 0.01 being inexact.
  auto m = static_cast<std::size_t>(std::floor(k_percent * static_cast<double>(n) / 100.0 + 1e-9));
  m = std::clamp<std::size_t>(m, 1, n);
  const auto order = pessimistic_order(q);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < m; ++i) hits += static_cast<std::size_t>(q.labels[order[i]]);
  return static_cast<double>(hits) / static_cast<double>(m);
}

std::vector<double> descending_ranks(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double shared = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = shared;
    i = j + 1;
  }
  return ranks;
}

namespace {

auto row_key(const EpisodeRow& r) {
  return std::tie(r.support_size, r.hit_fraction, r.task_id, r.repeat, r.model);
}

using ConfigKey = std::tuple<std::string, int, std::optional<double>, std::string>;

struct Accumulator {
  std::vector<double> values;
  double rank_sum = 0.0;
  std::size_t rank_count = 0;
};

}  // namespace

EvalReport aggregate(std::vector<EpisodeRow> rows) {
  std::sort(rows.begin(), rows.end(),
            [](const EpisodeRow& a, const EpisodeRow& b) { return row_key(a) < row_key(b); });

  // (model, size, hit fraction, metric) in canonical order.
  std::map<ConfigKey, Accumulator> acc;
  for (const auto& row : rows) {
    for (const auto& [metric, value] : row.metrics) {
      acc[{row.model, row.support_size, row.hit_fraction, metric}].values.push_back(value);
    }
  }

  // Cells: rows sharing (size, hit fraction, task, repeat) are contiguous.
  std::size_t begin = 0;
  while (begin < rows.size()) {
    std::size_t end = begin + 1;
    auto same_cell = [&](const EpisodeRow& a, const EpisodeRow& b) {
      return a.support_size == b.support_size && a.hit_fraction == b.hit_fraction &&
             a.task_id == b.task_id && a.repeat == b.repeat;
    };
    while (end < rows.size() && same_cell(rows[begin], rows[end])) ++end;

    std::map<std::string, std::vector<std::pair<std::size_t, double>>> by_metric;
    for (std::size_t r = begin; r < end; ++r) {
      for (const auto& [metric, value] : rows[r].metrics) by_metric[metric].emplace_back(r, value);
    }
    for (const auto& [metric, entries] : by_metric) {
      std::vector<double> values;
      values.reserve(entries.size());
      for (const auto& e : entries) values.push_back(e.second);
      const auto ranks = descending_ranks(values);
      for (std::size_t t = 0; t < entries.size(); ++t) {
        const auto& row = rows[entries[t].first];
        auto& a = acc[{row.model, row.support_size, row.hit_fraction, metric}];
        a.rank_sum += ranks[t];
        ++a.rank_count;
      }
    }
    begin = end;
  }

  EvalReport report;
  for (const auto& [key, a] : acc) {
    SummaryRow s;
    std::tie(s.model, s.support_size, s.hit_fraction, s.metric) = key;
    s.n = a.values.size();
    double sum = 0.0;
    for (double v : a.values) sum += v;
    s.mean = sum / static_cast<double>(s.n);
    if (s.n > 1) {
      double ss = 0.0;
      for (double v : a.values) ss += (v - s.mean) * (v - s.mean);
      const double sd = std::sqrt(ss / static_cast<double>(s.n - 1));
      s.half_width = 1.96 * sd / std::sqrt(static_cast<double>(s.n));
    }
    s.mean_rank = a.rank_count ? a.rank_sum / static_cast<double>(a.rank_count) : 0.0;
    report.summary.push_back(std::move(s));
  }
  report.rows = std::move(rows);
  return report;
}

}  // namespace fsprobe
