#include "fsprobe/episodes.hpp"

#include "fsprobe/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <span>

namespace fsprobe {

std::size_t TaskRecord::positives() const {
  return static_cast<std::size_t>(std::count_if(samples.begin(), samples.end(), [](const auto& s) {
    return s.label && *s.label == 1;
  }));
}

std::size_t TaskRecord::negatives() const {
  return static_cast<std::size_t>(std::count_if(samples.begin(), samples.end(), [](const auto& s) {
    return s.label && *s.label == 0;
  }));
}

double TaskRecord::positive_fraction() const {
  return samples.empty() ? 0.0
                         : static_cast<double>(positives()) / static_cast<double>(samples.size());
}

void TaskRecord::require_labels() const {
  for (const auto& s : samples) {
    if (!s.label || (*s.label != 0 && *s.label != 1)) {
      throw Error(ErrorCode::InvalidInput,
                  "task '" + task_id + "': sample '" + s.sample_id + "' has no binary label");
    }
  }
}

long round_half_up(double x) { return static_cast<long>(std::floor(x + 0.5)); }

TaskRecord deduplicate_measurements(const TaskRecord& task) {
  std::map<std::string, int> occurrences;
  for (const auto& s : task.samples) ++occurrences[s.sample_id];
  TaskRecord out{task.task_id, {}};
  for (const auto& s : task.samples) {
    if (occurrences[s.sample_id] == 1) out.samples.push_back(s);
  }
  return out;
}

TaskRecord binarize_by_clipped_median(const TaskRecord& task, double clip_low, double clip_high) {
  if (!(clip_low <= clip_high)) throw Error(ErrorCode::InvalidInput, "clip_low exceeds clip_high");
  std::vector<double> clipped;
  clipped.reserve(task.samples.size());
  for (const auto& s : task.samples) {
    if (!s.activity) {
      throw Error(ErrorCode::InvalidInput,
                  "task '" + task.task_id + "': sample '" + s.sample_id + "' has no activity");
    }
    clipped.push_back(std::clamp(*s.activity, clip_low, clip_high));
  }
  if (clipped.empty()) throw Error(ErrorCode::EmptyTask, "task '" + task.task_id + "' is empty");

  std::vector<double> sorted = clipped;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double threshold =
      n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);

  TaskRecord out{task.task_id, {}};
  for (std::size_t i = 0; i < task.samples.size(); ++i) {
    if (clipped[i] == threshold) continue;
    TaskSample s = task.samples[i];
    s.label = clipped[i] > threshold ? 1 : 0;
    out.samples.push_back(std::move(s));
  }
  if (out.samples.empty()) {
    throw Error(ErrorCode::EmptyTask,
                "task '" + task.task_id + "': every sample equals the median threshold");
  }
  return out;
}

bool TaskFilter::keep(const TaskRecord& task) const {
  const std::size_t n = task.samples.size();
  if (n < min_size || n > max_size) return false;
  const double frac = task.positive_fraction();
  return frac >= min_positive_fraction && frac <= max_positive_fraction;
}

std::vector<TaskRecord> filter_tasks(const std::vector<TaskRecord>& tasks, const TaskFilter& filter) {
  std::vector<TaskRecord> out;
  for (const auto& t : tasks) {
    if (filter.keep(t)) out.push_back(t);
  }
  return out;
}

namespace {

std::vector<TaskSample> sorted_class(const TaskRecord& task, int label) {
  std::vector<TaskSample> out;
  for (const auto& s : task.samples) {
    if (s.label && *s.label == label) out.push_back(s);
  }
  std::sort(out.begin(), out.end(),
            [](const TaskSample& a, const TaskSample& b) { return a.sample_id < b.sample_id; });
  return out;
}

void sort_by_id(std::vector<TaskSample>& samples) {
  std::sort(samples.begin(), samples.end(),
            [](const TaskSample& a, const TaskSample& b) { return a.sample_id < b.sample_id; });
}

void sort_by_id(std::vector<LabelledSample>& samples) {
  std::sort(samples.begin(), samples.end(),
            [](const LabelledSample& a, const LabelledSample& b) { return a.id < b.id; });
}

}  // namespace

TaskRecord subsample_screening_task(const TaskRecord& task, std::size_t max_size,
                                    double max_pos_frac, std::uint64_t seed) {
  task.require_labels();
  TaskRecord out{task.task_id, task.samples};
  if (task.samples.size() <= max_size) {
    sort_by_id(out.samples);
    return out;
  }
  auto pos = sorted_class(task, 1);
  auto neg = sorted_class(task, 0);
  Rng rng(hash_combine(seed, hash_string(task.task_id)));

  std::size_t n_pos = pos.size();
  if (!(static_cast<double>(pos.size()) / static_cast<double>(max_size) < max_pos_frac)) {
    const double rate = static_cast<double>(pos.size()) / static_cast<double>(task.samples.size());
    n_pos = static_cast<std::size_t>(round_half_up(rate * static_cast<double>(max_size)));
    n_pos = std::min(n_pos, pos.size());
  }
  const std::size_t n_neg = std::min(max_size - n_pos, neg.size());

  rng.shuffle(std::span(pos));
  rng.shuffle(std::span(neg));
  out.samples.assign(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(n_pos));
  out.samples.insert(out.samples.end(), neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(n_neg));
  sort_by_id(out.samples);
  return out;
}

std::uint64_t episode_stream_seed(std::uint64_t seed, const std::string& task_id, int repeat_index) {
  return hash_combine(hash_combine(seed, hash_string(task_id)),
                      static_cast<std::uint64_t>(repeat_index));
}

Episode sample_episode(const TaskRecord& task, const EpisodeSpec& spec, int repeat_index) {
  task.require_labels();
  const std::size_t size = static_cast<std::size_t>(std::max(spec.support_size, 0));
  if (size < 2) throw Error(ErrorCode::InvalidInput, "support size must be at least 2");
  if (size >= task.samples.size()) {
    throw Error(ErrorCode::InsufficientSamples,
                "task '" + task.task_id + "' has " + std::to_string(task.samples.size()) +
                    " samples, support needs fewer than that (" + std::to_string(size) + ")");
  }
  auto pos = sorted_class(task, 1);
  auto neg = sorted_class(task, 0);

  long n_pos;
  if (spec.support_positive_fraction) {
    const double frac = *spec.support_positive_fraction;
    if (!(frac > 0.0 && frac < 1.0)) {
      throw Error(ErrorCode::InvalidInput, "support positive fraction must lie in (0, 1)");
    }
    n_pos = std::max(1L, round_half_up(frac * static_cast<double>(size)));
  } else if (spec.force_balanced) {
    n_pos = round_half_up(static_cast<double>(size) / 2.0);
  } else {
    n_pos = round_half_up(static_cast<double>(size) * static_cast<double>(pos.size()) /
                          static_cast<double>(task.samples.size()));
  }
  n_pos = std::clamp(n_pos, 1L, static_cast<long>(size) - 1);
  const auto need_pos = static_cast<std::size_t>(n_pos);
  const std::size_t need_neg = size - need_pos;
  const std::string where = "task '" + task.task_id + "'";
  // Each class also needs one sample left for the query.
  if (pos.size() < need_pos + 1) throw InsufficientSamples(1, need_pos + 1, pos.size(), where);
  if (neg.size() < need_neg + 1) throw InsufficientSamples(0, need_neg + 1, neg.size(), where);

  Rng rng(episode_stream_seed(spec.seed, task.task_id, repeat_index));
  rng.shuffle(std::span(pos));
  rng.shuffle(std::span(neg));

  Episode ep;
  ep.task_id = task.task_id;
  for (std::size_t i = 0; i < pos.size(); ++i) {
    (i < need_pos ? ep.support : ep.query).push_back({pos[i].sample_id, 1});
  }
  for (std::size_t i = 0; i < neg.size(); ++i) {
    (i < need_neg ? ep.support : ep.query).push_back({neg[i].sample_id, 0});
  }
  sort_by_id(ep.support);
  sort_by_id(ep.query);
  return ep;
}

}  // namespace fsprobe
