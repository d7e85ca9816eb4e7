#pragma once

#include "fsprobe/episodes.hpp"

#include <optional>
#include <string>
#include <vector>

namespace fsprobe::app {

struct PrepareConfig {
  double clip_low = 5.0;
  double clip_high = 9.0;
  TaskFilter filter;
  /// Screening subsampling after filtering, when set.
  std::optional<std::size_t> screening_max_size;
  double screening_max_pos_frac = 0.07;
  std::uint64_t seed = 0;
};

struct PrepareReport {
  std::size_t input_tasks = 0;
  std::size_t input_samples = 0;
  std::size_t duplicate_samples_dropped = 0;
  std::size_t threshold_samples_dropped = 0;
  std::size_t empty_tasks_dropped = 0;
  std::size_t filtered_tasks_dropped = 0;
  std::size_t subsampled_samples_dropped = 0;
  std::size_t output_tasks = 0;
  std::size_t output_samples = 0;

  std::string to_text() const;
};

/// deduplicate -> binarize -> filter (-> subsample). Tasks must carry activities.
std::vector<TaskRecord> prepare_tasks(const std::vector<TaskRecord>& tasks, const PrepareConfig& config,
                                      PrepareReport& report);

}  // namespace fsprobe::app
