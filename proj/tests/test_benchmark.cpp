#include "fsprobe/app/benchmark.hpp"
#include "fsprobe/app/prepare.hpp"
#include "fsprobe/app/synth.hpp"
#include "support/test_util.hpp"

#include <doctest.h>

#include <map>
#include <set>
#include <sstream>

using namespace fsprobe;
using namespace fsprobe::app;
using namespace fsprobe::testing;

namespace {

SyntheticDataset small_dataset(std::uint64_t seed, int tasks = 4) {
  SyntheticSpec spec;
  spec.dim = 8;
  spec.n_tasks = tasks;
  spec.n_per_class = 40;
  spec.separation = 2.0;
  spec.covariance = CovarianceKind::RotatedAnisotropic;
  spec.fingerprint_bits = 64;
  spec.seed = seed;
  return generate_synthetic(spec);
}

BenchmarkConfig small_config() {
  BenchmarkConfig cfg;
  cfg.support_sizes = {8, 16};
  cfg.repeats = 3;
  cfg.seed = 17;
  cfg.train.epochs = 20;
  cfg.k_percents = {5.0};
  return cfg;
}

double metric(const EpisodeRow& r, const std::string& name) {
  for (const auto& [k, v] : r.metrics) {
    if (k == name) return v;
  }
  throw std::runtime_error("missing metric " + name);
}

double mean_metric(const BenchmarkResult& res, const std::string& model, int size, const std::string& name) {
  double sum = 0.0;
  int n = 0;
  for (const auto& r : res.rows) {
    if (r.model == model && r.support_size == size) {
      sum += metric(r, name);
      ++n;
    }
  }
  REQUIRE(n > 0);
  return sum / n;
}

std::string results_text(const BenchmarkResult& res) {
  std::ostringstream out;
  write_results_csv(out, res.rows);
  return out.str();
}

}  // namespace

TEST_CASE("models are paired on shared episodes") {
  const auto data = small_dataset(1);
  BenchmarkConfig cfg = small_config();
  cfg.models = {"l-probe", "q-probe", "prototype"};
  const auto res = run_benchmark(data.embeddings, data.tasks, nullptr, cfg);
  CHECK(res.failures.empty());
  CHECK(res.n_tasks == 4);
  CHECK(res.episodes.size() == 4 * 2 * 3);
  CHECK(res.rows.size() == 3 * res.episodes.size());

  std::map<std::tuple<std::string, int, int>, std::vector<const EpisodeRow*>> cells;
  for (const auto& r : res.rows) cells[{r.task_id, r.support_size, r.repeat}].push_back(&r);
  CHECK(cells.size() == res.episodes.size());
  for (const auto& [key, rows] : cells) {
    REQUIRE(rows.size() == 3);
    std::set<std::string> models;
    for (const auto* r : rows) {
      models.insert(r->model);
      CHECK(r->query_size == rows[0]->query_size);
      CHECK(r->query_positives == rows[0]->query_positives);
      CHECK(r->support_positives == rows[0]->support_positives);
      CHECK(metric(*r, "delta_aucpr") == doctest::Approx(metric(*r, "aucpr") -
                                                         static_cast<double>(r->query_positives) /
                                                             r->query_size).epsilon(1e-12));
    }
    CHECK(models.size() == 3);
  }
  for (const auto& e : res.episodes) {
    CHECK_NOTHROW(e.episode.validate());
    CHECK(e.episode.support.size() == static_cast<std::size_t>(e.support_size));
  }
}

TEST_CASE("benchmark output does not depend on the thread count") {
  const auto data = small_dataset(2, 6);
  BenchmarkConfig cfg = small_config();
  cfg.models = {"l-probe", "q-probe", "knn", "knn-fp", "simsearch"};
  const auto one = run_benchmark(data.embeddings, data.tasks, &data.fingerprints, cfg);
  cfg.threads = 8;
  const auto eight = run_benchmark(data.embeddings, data.tasks, &data.fingerprints, cfg);
  CHECK(results_text(one) == results_text(eight));
  REQUIRE(one.episodes.size() == eight.episodes.size());
  for (std::size_t i = 0; i < one.episodes.size(); ++i) CHECK(one.episodes[i] == eight.episodes[i]);
}

TEST_CASE("q-probe at lambda 1 with frozen prototypes is the prototype head") {
  const auto data = small_dataset(3);
  BenchmarkConfig cfg = small_config();
  cfg.models = {"q-probe", "prototype"};
  cfg.train.shrinkage_lambda = 1.0;
  cfg.train.freeze_prototypes = true;
  const auto res = run_benchmark(data.embeddings, data.tasks, nullptr, cfg);
  std::map<std::tuple<std::string, int, int>, std::map<std::string, double>> by_cell;
  for (const auto& r : res.rows) by_cell[{r.task_id, r.support_size, r.repeat}][r.model] = metric(r, "delta_aucpr");
  for (const auto& [key, m] : by_cell) CHECK(std::abs(m.at("q-probe") - m.at("prototype")) <= 1e-9);
}

TEST_CASE("tasks with a failing cell are excluded wholesale") {
  auto data = small_dataset(4, 3);
  // too few positives for a 16-sample support at the task ratio
  TaskRecord thin{"thin", {}};
  int i = 0;
  for (const auto& [id, v] : data.embeddings.entries()) {
    thin.samples.push_back({id, std::nullopt, i < 2 ? 1 : 0});
    if (++i == 40) break;
  }
  data.tasks.push_back(thin);
  BenchmarkConfig cfg = small_config();
  cfg.hit_fractions = {0.1};
  const auto res = run_benchmark(data.embeddings, data.tasks, nullptr, cfg);
  CHECK(res.n_tasks == 4);
  REQUIRE(res.failures.size() == 1);
  CHECK(res.failures[0].task_id == "thin");
  CHECK(res.failures[0].message.find("InsufficientSamples") != std::string::npos);
  CHECK(res.failed_fraction() == doctest::Approx(0.25));
  for (const auto& r : res.rows) CHECK(r.task_id != "thin");
  for (const auto& e : res.episodes) CHECK(e.episode.task_id != "thin");
  for (const auto& r : res.rows) CHECK(r.hit_fraction == 0.1);
}

TEST_CASE("benchmark configuration is validated") {
  const auto data = small_dataset(5, 1);
  BenchmarkConfig cfg = small_config();
  cfg.models = {"svm"};
  CHECK_THROWS_AS(run_benchmark(data.embeddings, data.tasks, nullptr, cfg), Error);
  cfg = small_config();
  cfg.models = {"simsearch"};
  CHECK_THROWS_AS(run_benchmark(data.embeddings, data.tasks, nullptr, cfg), Error);
  cfg = small_config();
  cfg.repeats = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = small_config();
  cfg.threads = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = small_config();
  cfg.epochs_per_size = {{16, 7}};
  CHECK(cfg.train_for(16).epochs == 7);
  CHECK(cfg.train_for(8).epochs == 20);
  CHECK(metric_name_hitrate(5.0) == "hitrate_at_5");
  CHECK(metric_name_hitrate(0.5) == "hitrate_at_0.5");
}

TEST_CASE("synthetic generator is deterministic") {
  const auto a = small_dataset(6);
  const auto b = small_dataset(6);
  const auto c = small_dataset(7);
  CHECK(a.embeddings.entries() == b.embeddings.entries());
  CHECK(a.fingerprints == b.fingerprints);
  REQUIRE(a.tasks.size() == b.tasks.size());
  for (std::size_t i = 0; i < a.tasks.size(); ++i) CHECK(a.tasks[i].samples == b.tasks[i].samples);
  CHECK(a.embeddings.entries() != c.embeddings.entries());
  for (const auto& [id, v] : a.embeddings.entries()) CHECK(std::abs(v.norm() - 1.0) <= 1e-12);
}

TEST_CASE("synthetic signal levels") {
  SyntheticSpec spec;
  spec.dim = 16;
  spec.n_tasks = 10;
  spec.n_per_class = 100;
  spec.seed = 8;
  BenchmarkConfig cfg;
  cfg.support_sizes = {16};
  cfg.repeats = 3;
  cfg.models = {"l-probe", "q-probe", "prototype"};

  spec.identical_classes = true;
  const auto noise = generate_synthetic(spec);
  const auto flat = run_benchmark(noise.embeddings, noise.tasks, nullptr, cfg);
  for (const auto& m : cfg.models) CHECK(std::abs(mean_metric(flat, m, 16, "delta_aucpr")) <= 0.05);

  spec.identical_classes = false;
  spec.separation = 4.0;
  const auto clear = generate_synthetic(spec);
  const auto sharp = run_benchmark(clear.embeddings, clear.tasks, nullptr, cfg);
  CHECK(mean_metric(sharp, "l-probe", 16, "delta_aucpr") > 0.4);
}

TEST_CASE("score_query covers every model") {
  const auto data = small_dataset(9, 1);
  EpisodeSpec spec;
  spec.support_size = 16;
  const Episode ep = sample_episode(data.tasks[0], spec, 0);
  TrainConfig train;
  train.epochs = 5;
  for (const auto& model : kKnownModels) {
    const auto scores = score_query(model, ep, data.embeddings, &data.fingerprints, train, 5);
    CHECK(scores.size() == ep.query.size());
    for (double s : scores) CHECK(std::isfinite(s));
  }
  CHECK_THROWS_AS(score_query("knn-fp", ep, data.embeddings, nullptr, train, 5), Error);
  CHECK(model_needs_fingerprints("simsearch"));
  CHECK_FALSE(model_needs_fingerprints("knn"));
}

TEST_CASE("prepare pipeline counts") {
  // t1: duplicate "d", median threshold sample removed
  // t2: every activity identical -> empty after binarization
  // t3: fine but too small for the default filter
  std::vector<TaskRecord> tasks;
  TaskRecord t1{"t1", {}};
  for (int i = 0; i < 81; ++i) t1.samples.push_back({sample_name(i), 5.0 + 4.0 * i / 80.0, std::nullopt});
  t1.samples.push_back({"d", 6.0, std::nullopt});
  t1.samples.push_back({"d", 8.0, std::nullopt});
  tasks.push_back(t1);
  tasks.push_back({"t2", {{"a", 6.0, {}}, {"b", 6.0, {}}}});
  TaskRecord t3{"t3", {}};
  for (int i = 0; i < 10; ++i) t3.samples.push_back({sample_name(i), 5.0 + i, std::nullopt});
  tasks.push_back(t3);

  PrepareReport report;
  const auto out = prepare_tasks(tasks, {}, report);
  REQUIRE(out.size() == 1);
  CHECK(out[0].task_id == "t1");
  CHECK(out[0].samples.size() == 80);
  CHECK(out[0].positives() == 40);
  CHECK(report.input_tasks == 3);
  CHECK(report.input_samples == 83 + 2 + 10);
  CHECK(report.duplicate_samples_dropped == 2);
  // t1 one, t2 both, t3 six values clipped onto its median 9
  CHECK(report.threshold_samples_dropped == 1 + 2 + 6);
  CHECK(report.empty_tasks_dropped == 1);
  CHECK(report.filtered_tasks_dropped == 1);
  CHECK(report.output_tasks == 1);
  CHECK(report.output_samples == 80);
  CHECK_FALSE(report.to_text().empty());

  PrepareConfig screening;
  screening.filter.min_size = 1;
  screening.screening_max_size = 50;
  PrepareReport r2;
  const auto sub = prepare_tasks({t1}, screening, r2);
  REQUIRE(sub.size() == 1);
  CHECK(sub[0].samples.size() == 50);
  CHECK(r2.subsampled_samples_dropped == 30);
}
