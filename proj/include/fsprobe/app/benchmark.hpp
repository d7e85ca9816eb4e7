#pragma once

#include "fsprobe/app/formats.hpp"
#include "fsprobe/core.hpp"
#include "fsprobe/episodes.hpp"
#include "fsprobe/metrics.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fsprobe::app {

/// Model names accepted by the benchmark.
inline const std::vector<std::string> kKnownModels = {
    "l-probe", "q-probe", "free-opt", "free-opt-reg", "prototype", "knn", "knn-fp", "simsearch"};

bool model_needs_fingerprints(const std::string& model);

struct BenchmarkConfig {
  TrainConfig train;
  std::vector<int> support_sizes = kDefaultSupportSizes;
  int repeats = kDefaultBalancedRepeats;
  std::uint64_t seed = 0;
  std::vector<std::string> models = {"l-probe", "q-probe"};
  /// Empty: balanced episodes. Otherwise one screening run per fraction.
  std::vector<double> hit_fractions;
  std::vector<double> k_percents;
  /// Overrides train.epochs for the given support sizes.
  std::map<int, int> epochs_per_size;
  std::size_t knn_k = 5;
  bool force_balanced = false;
  int threads = 1;
  /// Exit-code threshold on the fraction of failed tasks.
  double max_failed_task_fraction = 0.1;

  void validate() const;
  TrainConfig train_for(int support_size) const;
};

struct TaskFailure {
  std::string task_id;
  std::string message;
};

struct BenchmarkResult {
  /// Canonically ordered; only tasks without failures.
  std::vector<EpisodeRow> rows;
  std::vector<EpisodeManifestEntry> episodes;
  std::vector<TaskFailure> failures;
  std::size_t n_tasks = 0;

  double failed_fraction() const;
};

/// Every model sees the same sampled episode for a (task, size, hit
/// fraction, repeat) cell. Cells run on `threads` workers; output order is
/// independent of the thread count.
BenchmarkResult run_benchmark(const EmbeddingSet& embeddings, const std::vector<TaskRecord>& tasks,
                              const FingerprintSet* fingerprints, const BenchmarkConfig& config);

/// Fits `model` on the episode support and returns the query ranking scores.
std::vector<double> score_query(const std::string& model, const Episode& episode,
                                const EmbeddingSet& embeddings, const FingerprintSet* fingerprints,
                                const TrainConfig& train, std::size_t knn_k);

std::string metric_name_hitrate(double k_percent);

}  // namespace fsprobe::app
