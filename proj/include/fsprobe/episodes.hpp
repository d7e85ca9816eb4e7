#pragma once

// Task preparation rules and deterministic episode sampling on abstract
// (sample id, activity | label) records.

#include "fsprobe/core.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fsprobe {

struct TaskSample {
  std::string sample_id;
  std::optional<double> activity;
  std::optional<int> label;

  friend bool operator==(const TaskSample&, const TaskSample&) = default;
};

struct TaskRecord {
  std::string task_id;
  std::vector<TaskSample> samples;

  std::size_t positives() const;
  std::size_t negatives() const;
  double positive_fraction() const;
  /// Throws InvalidInput if a sample has no label.
  void require_labels() const;
};

struct EpisodeSpec {
  int support_size = 16;
  /// Set for screening-style episodes.
  std::optional<double> support_positive_fraction;
  int n_repeats = 10;
  std::uint64_t seed = 0;
  /// Balanced mode only: half positives instead of the task ratio.
  bool force_balanced = false;
};

inline const std::vector<int> kDefaultSupportSizes = {16, 32, 64, 128};
inline constexpr int kDefaultBalancedRepeats = 10;
inline constexpr int kDefaultScreeningRepeats = 20;

/// floor(x + 0.5).
long round_half_up(double x);

/// Drops every sample id that occurs more than once.
TaskRecord deduplicate_measurements(const TaskRecord& task);

/// Clips activities to [clip_low, clip_high], thresholds at their median
/// (mean of the middle pair for even counts), labels 1 above the threshold
/// and removes samples equal to it. Throws EmptyTask if nothing remains.
TaskRecord binarize_by_clipped_median(const TaskRecord& task, double clip_low = 5.0,
                                      double clip_high = 9.0);

struct TaskFilter {
  std::size_t min_size = 60;
  std::size_t max_size = 5000;
  double min_positive_fraction = 0.1;
  double max_positive_fraction = 0.6;

  /// Closed intervals on both criteria.
  bool keep(const TaskRecord& task) const;
};

std::vector<TaskRecord> filter_tasks(const std::vector<TaskRecord>& tasks,
                                     const TaskFilter& filter = {});

/// Screening-library subsampling: keep every positive if that stays below
/// max_pos_frac of max_size, else subsample positives to the task's own
/// rate; fill the rest with uniformly drawn negatives. Output is sorted by
/// sample id.
TaskRecord subsample_screening_task(const TaskRecord& task, std::size_t max_size = 30000,
                                    double max_pos_frac = 0.07, std::uint64_t seed = 0);

/// Seed of the stream behind (seed, task_id, repeat).
std::uint64_t episode_stream_seed(std::uint64_t seed, const std::string& task_id, int repeat_index);

/// Splits a labelled task into support and query. Support and query are
/// sorted by sample id. Throws InsufficientSamples naming the class.
Episode sample_episode(const TaskRecord& task, const EpisodeSpec& spec, int repeat_index);

}  // namespace fsprobe
