#include "fsprobe/app/prepare.hpp"

#include <sstream>

namespace fsprobe::app {

std::string PrepareReport::to_text() const {
  std::ostringstream out;
  out << "input: " << input_tasks << " tasks, " << input_samples << " samples\n"
      << "dedup: dropped " << duplicate_samples_dropped << " samples\n"
      << "binarize: dropped " << threshold_samples_dropped << " samples at threshold, "
      << empty_tasks_dropped << " empty tasks\n"
      << "filter: dropped " << filtered_tasks_dropped << " tasks\n";
  if (subsampled_samples_dropped > 0) out << "subsample: dropped " << subsampled_samples_dropped << " samples\n";
  out << "output: " << output_tasks << " tasks, " << output_samples << " samples\n";
  return out.str();
}

std::vector<TaskRecord> prepare_tasks(const std::vector<TaskRecord>& tasks, const PrepareConfig& config,
                                      PrepareReport& report) {
  report = {};
  report.input_tasks = tasks.size();
  std::vector<TaskRecord> binarized;
  for (const auto& task : tasks) {
    report.input_samples += task.samples.size();
    const TaskRecord dedup = deduplicate_measurements(task);
    report.duplicate_samples_dropped += task.samples.size() - dedup.samples.size();
    try {
      TaskRecord labelled = binarize_by_clipped_median(dedup, config.clip_low, config.clip_high);
      report.threshold_samples_dropped += dedup.samples.size() - labelled.samples.size();
      binarized.push_back(std::move(labelled));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptyTask) throw;
      report.threshold_samples_dropped += dedup.samples.size();
      ++report.empty_tasks_dropped;
    }
  }
  std::vector<TaskRecord> kept = filter_tasks(binarized, config.filter);
  report.filtered_tasks_dropped = binarized.size() - kept.size();
  if (config.screening_max_size) {
    for (auto& task : kept) {
      const std::size_t before = task.samples.size();
      task = subsample_screening_task(task, *config.screening_max_size, config.screening_max_pos_frac,
                                      config.seed);
      report.subsampled_samples_dropped += before - task.samples.size();
    }
  }
  report.output_tasks = kept.size();
  for (const auto& t : kept) report.output_samples += t.samples.size();
  return kept;
}

}  // namespace fsprobe::app
