#include "fsprobe/metrics.hpp"
#include "support/test_util.hpp"

#include <doctest.h>

#include <map>

using namespace fsprobe;
using namespace fsprobe::testing;

TEST_CASE("average_precision examples") {
  CHECK(average_precision({{0.9, 0.8, 0.1}, {1, 1, 0}}) == 1.0);
  CHECK(average_precision({{0.9, 0.8, 0.7}, {1, 0, 1}}) == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
  for (int n = 2; n < 30; ++n) {
    for (int p = 1; p < n; ++p) {
      ScoredQuery q;
      q.scores.assign(static_cast<std::size_t>(n), 0.5);
      for (int i = 0; i < n; ++i) q.labels.push_back(i < p ? 1 : 0);
      CHECK(average_precision(q) <= static_cast<double>(p) / n + 1e-9);
    }
  }
  CHECK_THROWS_AS(average_precision({{0.1, 0.2}, {1, 1}}), Error);
  CHECK_THROWS_AS(average_precision({{0.1, 0.2}, {1}}), Error);
  CHECK_THROWS_AS(average_precision({{0.1, 0.2}, {1, 2}}), Error);
}

TEST_CASE("delta_aucpr examples") {
  CHECK(delta_aucpr({{2, 1}, {1, 0}}) == 0.5);
  ScoredQuery q;
  for (int i = 0; i < 10; ++i) {
    q.scores.push_back(10 - i);
    q.labels.push_back(i < 3 ? 1 : 0);
  }
  CHECK(delta_aucpr(q) == doctest::Approx(0.7).epsilon(1e-15));
}

TEST_CASE("hitrate_at_percent examples") {
  Rng rng(9);
  const ScoredQuery r = random_scored_query(rng, 200);
  CHECK(hitrate_at_percent(r, 100.0) == doctest::Approx(r.prevalence()).epsilon(1e-15));

  auto perfect = [](int pos, int n) {
    ScoredQuery q;
    for (int i = 0; i < n; ++i) {
      q.scores.push_back(n - i);
      q.labels.push_back(i < pos ? 1 : 0);
    }
    return q;
  };
  CHECK(hitrate_at_percent(perfect(50, 1000), 1.0) == 1.0);
  CHECK(hitrate_at_percent(perfect(5, 1000), 1.0) == 0.5);
  CHECK(hitrate_at_percent(perfect(1, 10), 1.0) == 1.0);  // m clamps to 1
  CHECK_THROWS_AS(hitrate_at_percent(perfect(1, 10), 0.0), Error);
  CHECK_THROWS_AS(hitrate_at_percent(perfect(1, 10), 101.0), Error);
}

TEST_CASE("metrics match the brute-force oracles") {
  Rng rng(10);
  for (int t = 0; t < 3000; ++t) {
    const std::size_t n = 2 + rng.below(120);
    const int levels = t % 3 == 0 ? 0 : 1 + static_cast<int>(rng.below(6));
    const ScoredQuery q = random_scored_query(rng, n, levels);
    CHECK(std::abs(average_precision(q) - oracle_average_precision(q)) <= 1e-12);
    const double k = rng.uniform(0.5, 100.0);
    CHECK(std::abs(hitrate_at_percent(q, k) - oracle_hitrate(q, k)) <= 1e-12);
  }
}

TEST_CASE("metric invariants") {
  Rng rng(11);
  for (int t = 0; t < 500; ++t) {
    const std::size_t n = 2 + rng.below(80);
    ScoredQuery q = random_scored_query(rng, n, t % 2 ? 4 : 0);
    const double ap = average_precision(q);
    const double prev = q.prevalence();

    // strictly monotone transform
    ScoredQuery m = q;
    for (auto& s : m.scores) s = std::exp(0.5 * s) + 3.0;
    CHECK(average_precision(m) == ap);

    // permutation of the input
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    rng.shuffle(std::span<std::size_t>(idx));
    ScoredQuery p;
    for (auto i : idx) {
      p.scores.push_back(q.scores[i]);
      p.labels.push_back(q.labels[i]);
    }
    CHECK(average_precision(p) == ap);
    CHECK(hitrate_at_percent(p, 10.0) == hitrate_at_percent(q, 10.0));

    const double delta = delta_aucpr(q);
    CHECK(delta > -prev);
    CHECK(delta <= 1.0 - prev + 1e-15);

    // perfect ranking reaches the upper bound
    ScoredQuery best = q;
    for (std::size_t i = 0; i < n; ++i) best.scores[i] = best.labels[i] + 0.01 * rng.uniform();
    CHECK(delta_aucpr(best) == doctest::Approx(1.0 - prev).epsilon(1e-14));
  }
}

TEST_CASE("perfect-ranker hitrate is non-increasing once all positives are in") {
  ScoredQuery q;
  const int n = 500, pos = 20;
  for (int i = 0; i < n; ++i) {
    q.scores.push_back(n - i);
    q.labels.push_back(i < pos ? 1 : 0);
  }
  double prev = 2.0;
  for (double k = 4.0; k <= 100.0; k += 0.5) {
    const double h = hitrate_at_percent(q, k);
    CHECK(h <= prev);
    prev = h;
  }
}

TEST_CASE("random scores give zero delta_aucpr on average") {
  double sum = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed + 1000);
    ScoredQuery q;
    for (int i = 0; i < 10000; ++i) {
      q.scores.push_back(rng.uniform());
      q.labels.push_back(rng.uniform() < 0.3 ? 1 : 0);
    }
    sum += delta_aucpr(q);
  }
  CHECK(std::abs(sum / 100.0) <= 0.02);
}

namespace {

EpisodeRow make_row(const std::string& model, const std::string& task, int size, int repeat, double aucpr) {
  EpisodeRow r;
  r.model = model;
  r.task_id = task;
  r.support_size = size;
  r.repeat = repeat;
  r.query_size = 10;
  r.query_positives = 3;
  r.support_positives = size / 2;
  r.metrics = {{"aucpr", aucpr}, {"delta_aucpr", aucpr - 0.3}};
  return r;
}

const SummaryRow& find(const EvalReport& rep, const std::string& model, const std::string& metric) {
  for (const auto& s : rep.summary) {
    if (s.model == model && s.metric == metric) return s;
  }
  throw std::runtime_error("missing summary row");
}

}  // namespace

TEST_CASE("aggregate examples") {
  {
    const auto rep = aggregate({make_row("a", "t", 16, 0, 0.7)});
    const auto& s = find(rep, "a", "aucpr");
    CHECK(s.mean == 0.7);
    CHECK(s.half_width == 0.0);
    CHECK(s.n == 1);
    CHECK(s.mean_rank == 1.0);
  }
  {
    std::vector<EpisodeRow> rows;
    for (int r = 0; r < 4; ++r) {
      rows.push_back(make_row("a", "t", 16, r, 0.1 * r));
      rows.push_back(make_row("b", "t", 16, r, 0.1 * r));
    }
    const auto rep = aggregate(rows);
    CHECK(find(rep, "a", "aucpr").mean_rank == 1.5);
    CHECK(find(rep, "b", "aucpr").mean_rank == 1.5);
  }
  {
    const std::vector<EpisodeRow> rows = {
        make_row("A", "t1", 16, 0, 0.9), make_row("B", "t1", 16, 0, 0.5), make_row("C", "t1", 16, 0, 0.1),
        make_row("A", "t2", 16, 0, 0.8), make_row("B", "t2", 16, 0, 0.2), make_row("C", "t2", 16, 0, 0.3),
        make_row("A", "t3", 16, 0, 0.4), make_row("B", "t3", 16, 0, 0.6), make_row("C", "t3", 16, 0, 0.1),
    };
    const auto rep = aggregate(rows);
    CHECK(find(rep, "A", "aucpr").mean_rank == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
  }
}

TEST_CASE("descending_ranks shares ties") {
  const auto r = descending_ranks({0.5, 0.9, 0.5, 0.1});
  CHECK(r == std::vector<double>{2.5, 1.0, 2.5, 4.0});
}

TEST_CASE("aggregate matches brute-force recomputation and ignores row order") {
  Rng rng(12);
  std::vector<EpisodeRow> rows;
  const std::vector<std::string> models = {"m0", "m1", "m2"};
  for (int size : {16, 32}) {
    for (int t = 0; t < 5; ++t) {
      for (int r = 0; r < 3; ++r) {
        for (const auto& m : models) {
          rows.push_back(make_row(m, "task" + std::to_string(t), size, r, rng.uniform()));
        }
      }
    }
  }
  const EvalReport rep = aggregate(rows);

  // Oracle: direct grouping.
  std::map<std::pair<std::string, int>, std::vector<double>> values;
  for (const auto& r : rows) values[{r.model, r.support_size}].push_back(r.metrics[0].second);
  for (const auto& s : rep.summary) {
    if (s.metric != "aucpr") continue;
    const auto& v = values.at({s.model, s.support_size});
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size() - 1);
    CHECK(std::abs(s.mean - mean) <= 1e-12);
    CHECK(std::abs(s.half_width - 1.96 * std::sqrt(var / static_cast<double>(v.size()))) <= 1e-12);
    CHECK(s.n == v.size());
  }

  std::vector<EpisodeRow> shuffled = rows;
  rng.shuffle(std::span<EpisodeRow>(shuffled));
  const EvalReport rep2 = aggregate(shuffled);
  REQUIRE(rep2.summary.size() == rep.summary.size());
  for (std::size_t i = 0; i < rep.summary.size(); ++i) {
    CHECK(rep.summary[i].model == rep2.summary[i].model);
    CHECK(rep.summary[i].mean == rep2.summary[i].mean);
    CHECK(rep.summary[i].mean_rank == rep2.summary[i].mean_rank);
  }
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    CHECK(rep.rows[i].model == rep2.rows[i].model);
    CHECK(rep.rows[i].metrics == rep2.rows[i].metrics);
  }
}
