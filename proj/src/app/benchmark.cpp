#include "fsprobe/app/benchmark.hpp"

#include "fsprobe/probes/baselines.hpp"
#include "fsprobe/probes/free_opt.hpp"
#include "fsprobe/probes/linear_probe.hpp"
#include "fsprobe/probes/quadratic_probe.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <set>
#include <thread>

namespace fsprobe::app {

bool model_needs_fingerprints(const std::string& model) {
  return model == "knn-fp" || model == "simsearch";
}

void BenchmarkConfig::validate() const {
  train.validate();
  if (support_sizes.empty()) throw Error(ErrorCode::InvalidInput, "no support sizes");
  if (repeats < 1) throw Error(ErrorCode::InvalidInput, "repeats must be >= 1");
  if (models.empty()) throw Error(ErrorCode::InvalidInput, "no models");
  for (const auto& m : models) {
    if (std::find(kKnownModels.begin(), kKnownModels.end(), m) == kKnownModels.end()) {
      throw Error(ErrorCode::InvalidInput, "unknown model '" + m + "'");
    }
  }
  if (std::set<std::string>(models.begin(), models.end()).size() != models.size()) {
    throw Error(ErrorCode::InvalidInput, "duplicate model names");
  }
  for (double k : k_percents) {
    if (!(k > 0.0 && k <= 100.0)) throw Error(ErrorCode::InvalidInput, "k% must lie in (0, 100]");
  }
  for (double f : hit_fractions) {
    if (!(f > 0.0 && f < 1.0)) throw Error(ErrorCode::InvalidInput, "hit fraction must lie in (0, 1)");
  }
  if (knn_k == 0) throw Error(ErrorCode::InvalidInput, "knn k must be positive");
  if (threads < 1) throw Error(ErrorCode::InvalidInput, "threads must be >= 1");
}

TrainConfig BenchmarkConfig::train_for(int support_size) const {
  TrainConfig cfg = train;
  if (auto it = epochs_per_size.find(support_size); it != epochs_per_size.end()) cfg.epochs = it->second;
  return cfg;
}

double BenchmarkResult::failed_fraction() const {
  return n_tasks == 0 ? 0.0 : static_cast<double>(failures.size()) / static_cast<double>(n_tasks);
}

std::string metric_name_hitrate(double k_percent) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "hitrate_at_%g", k_percent);
  return buf;
}

namespace {

const BinaryFingerprint& fingerprint_of(const FingerprintSet* fps, const std::string& id) {
  if (fps == nullptr) throw Error(ErrorCode::InvalidInput, "model needs a fingerprints file");
  auto it = fps->find(id);
  if (it == fps->end()) throw Error(ErrorCode::UnknownId, "no fingerprint for '" + id + "'");
  return it->second;
}

template <class Predict>
std::vector<double> log_odds_scores(const Episode& ep, const EmbeddingSet& embeddings, Predict&& predict) {
  std::vector<double> scores;
  scores.reserve(ep.query.size());
  for (const auto& q : ep.query) scores.push_back(predict(embeddings.at(q.id)).log_odds);
  return scores;
}

}  // namespace

std::vector<double> score_query(const std::string& model, const Episode& ep,
                                const EmbeddingSet& embeddings, const FingerprintSet* fingerprints,
                                const TrainConfig& train, std::size_t knn_k) {
  FitOptions options;
  options.track_spectrum = false;
  if (model == "l-probe") {
    const auto params = linear_probe_fit(ep.support, embeddings, train, options).first;
    return log_odds_scores(ep, embeddings, [&](const Vector& z) { return linear_probe_predict(params, z); });
  }
  if (model == "q-probe") {
    const auto params = quadratic_probe_fit(ep.support, embeddings, train, options).first;
    return log_odds_scores(ep, embeddings, [&](const Vector& z) { return quadratic_probe_predict(params, z); });
  }
  if (model == "free-opt" || model == "free-opt-reg") {
    const auto params = free_opt_fit(ep.support, embeddings, train, model == "free-opt-reg", options).first;
    return log_odds_scores(ep, embeddings, [&](const Vector& z) { return free_opt_predict(params, z); });
  }
  if (model == "prototype") {
    const SupportView view = gather_support(ep.support, embeddings);
    return log_odds_scores(ep, embeddings, [&](const Vector& z) { return prototype_predict(view, z); });
  }
  const std::size_t k = std::min(knn_k, ep.support.size());
  std::vector<double> scores;
  scores.reserve(ep.query.size());
  if (model == "knn") {
    for (const auto& q : ep.query) scores.push_back(knn_score(ep.support, embeddings, embeddings.at(q.id), k));
    return scores;
  }
  if (model == "knn-fp") {
    if (fingerprints == nullptr) throw Error(ErrorCode::InvalidInput, "knn-fp needs a fingerprints file");
    for (const auto& q : ep.query) {
      scores.push_back(knn_score(ep.support, *fingerprints, fingerprint_of(fingerprints, q.id), k));
    }
    return scores;
  }
  if (model == "simsearch") {
    if (fingerprints == nullptr) throw Error(ErrorCode::InvalidInput, "simsearch needs a fingerprints file");
    for (const auto& q : ep.query) {
      scores.push_back(simsearch_score(ep.support, *fingerprints, fingerprint_of(fingerprints, q.id)));
    }
    return scores;
  }
  throw Error(ErrorCode::InvalidInput, "unknown model '" + model + "'");
}

namespace {

struct Cell {
  std::size_t task = 0;
  std::optional<double> hit_fraction;
  int support_size = 0;
  int repeat = 0;
};

struct CellResult {
  std::optional<EpisodeManifestEntry> episode;
  std::vector<EpisodeRow> rows;
  std::optional<std::string> error;
};

CellResult run_cell(const Cell& cell, const EmbeddingSet& embeddings, const std::vector<TaskRecord>& tasks,
                    const FingerprintSet* fingerprints, const BenchmarkConfig& config) {
  CellResult out;
  const TaskRecord& task = tasks[cell.task];
  try {
    EpisodeSpec spec;
    spec.support_size = cell.support_size;
    spec.support_positive_fraction = cell.hit_fraction;
    spec.n_repeats = config.repeats;
    spec.seed = config.seed;
    spec.force_balanced = config.force_balanced;
    Episode ep = sample_episode(task, spec, cell.repeat);
    ep.validate();

    ScoredQuery scored;
    scored.labels.reserve(ep.query.size());
    for (const auto& q : ep.query) scored.labels.push_back(q.label);
    int support_pos = 0;
    for (const auto& s : ep.support) support_pos += s.label;

    const TrainConfig train = config.train_for(cell.support_size);
    for (const auto& model : config.models) {
      scored.scores = score_query(model, ep, embeddings, fingerprints, train, config.knn_k);
      EpisodeRow row;
      row.model = model;
      row.task_id = task.task_id;
      row.support_size = cell.support_size;
      row.hit_fraction = cell.hit_fraction;
      row.repeat = cell.repeat;
      row.support_positives = support_pos;
      row.query_size = static_cast<int>(ep.query.size());
      row.query_positives = static_cast<int>(scored.positives());
      const double ap = average_precision(scored);
      row.metrics.emplace_back("aucpr", ap);
      row.metrics.emplace_back("delta_aucpr", ap - scored.prevalence());
      for (double k : config.k_percents) {
        row.metrics.emplace_back(metric_name_hitrate(k), hitrate_at_percent(scored, k));
      }
      out.rows.push_back(std::move(row));
    }
    out.episode = EpisodeManifestEntry{cell.repeat, cell.support_size, cell.hit_fraction, std::move(ep)};
  } catch (const std::exception& e) {
    out.rows.clear();
    out.error = e.what();
  }
  return out;
}

}  // namespace

BenchmarkResult run_benchmark(const EmbeddingSet& embeddings, const std::vector<TaskRecord>& tasks,
                              const FingerprintSet* fingerprints, const BenchmarkConfig& config) {
  config.validate();
  for (const auto& m : config.models) {
    if (model_needs_fingerprints(m) && fingerprints == nullptr) {
      throw Error(ErrorCode::InvalidInput, "model '" + m + "' needs a fingerprints file");
    }
  }

  std::vector<std::optional<double>> fractions;
  if (config.hit_fractions.empty()) {
    fractions.push_back(std::nullopt);
  } else {
    for (double f : config.hit_fractions) fractions.emplace_back(f);
  }
  std::vector<Cell> cells;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    for (const auto& f : fractions) {
      for (int size : config.support_sizes) {
        for (int r = 0; r < config.repeats; ++r) cells.push_back({t, f, size, r});
      }
    }
  }

  std::vector<CellResult> results(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < cells.size(); i = next.fetch_add(1)) {
      results[i] = run_cell(cells[i], embeddings, tasks, fingerprints, config);
    }
  };
  {
    std::vector<std::jthread> pool;
    const int extra = std::min<int>(config.threads, static_cast<int>(std::max<std::size_t>(cells.size(), 1))) - 1;
    for (int i = 0; i < extra; ++i) pool.emplace_back(worker);
    worker();
  }

  BenchmarkResult out;
  out.n_tasks = tasks.size();
  std::vector<std::optional<std::string>> task_error(tasks.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (results[i].error && !task_error[cells[i].task]) task_error[cells[i].task] = results[i].error;
  }
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    if (task_error[t]) out.failures.push_back({tasks[t].task_id, *task_error[t]});
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (task_error[cells[i].task]) continue;
    for (auto& row : results[i].rows) out.rows.push_back(std::move(row));
    out.episodes.push_back(std::move(*results[i].episode));
  }
  out.rows = aggregate(std::move(out.rows)).rows;
  std::sort(out.episodes.begin(), out.episodes.end(), [](const auto& a, const auto& b) {
    return std::tie(a.support_size, a.hit_fraction, a.episode.task_id, a.repeat) <
           std::tie(b.support_size, b.hit_fraction, b.episode.task_id, b.repeat);
  });
  return out;
}

}  // namespace fsprobe::app
