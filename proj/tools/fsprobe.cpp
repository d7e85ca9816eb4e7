// fsprobe command-line driver.

#include "fsprobe/app/benchmark.hpp"
#include "fsprobe/app/demo.hpp"
#include "fsprobe/app/digest.hpp"
#include "fsprobe/app/formats.hpp"
#include "fsprobe/app/prepare.hpp"
#include "fsprobe/app/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace fsprobe;
using namespace fsprobe::app;
using Json = nlohmann::ordered_json;

namespace {

constexpr const char* kToolVersion = "0.1.0";

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kPartial = 3 };

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string slurp_to_string(const std::function<void(std::ostream&)>& fn) {
  std::ostringstream out;
  fn(out);
  return out.str();
}

std::map<int, int> parse_epochs_per_size(const std::string& text) {
  std::map<int, int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--epochs-per-size", "expected size=epochs, got '" + item + "'");
    try {
      out[std::stoi(item.substr(0, eq))] = std::stoi(item.substr(eq + 1));
    } catch (const std::exception&) {
      throw CLI::ValidationError("--epochs-per-size", "bad entry '" + item + "'");
    }
  }
  return out;
}

Json train_json(const TrainConfig& c) {
  Json j;
  j["epochs"] = c.epochs;
  j["learning_rate"] = c.learning_rate;
  j["shrinkage_lambda"] = c.shrinkage_lambda;
  j["temperature"] = c.temperature;
  j["seed"] = c.seed;
  j["free_opt_reg_weight"] = c.free_opt_reg_weight;
  j["freeze_prototypes"] = c.freeze_prototypes;
  return j;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  SyntheticSpec spec;
  std::string covariance = "isotropic";
  std::string embeddings_out;
  std::string tasks_out;
  std::string fingerprints_out;
  std::string manifest_out;
  bool binary = false;
};

int run_synth(const SynthArgs& a) {
  SyntheticSpec spec = a.spec;
  spec.covariance = parse_covariance_kind(a.covariance);
  const SyntheticDataset data = generate_synthetic(spec);
  write_file(a.embeddings_out, slurp_to_string([&](std::ostream& o) {
               if (a.binary) write_embeddings_binary(o, data.embeddings);
               else write_embeddings_csv(o, data.embeddings);
             }));
  write_file(a.tasks_out, slurp_to_string([&](std::ostream& o) { write_tasks(o, data.tasks); }));
  if (!a.fingerprints_out.empty()) {
    if (spec.fingerprint_bits == 0) throw Error(ErrorCode::InvalidInput, "--fingerprints-out needs --fingerprint-bits");
    write_file(a.fingerprints_out, slurp_to_string([&](std::ostream& o) { write_fingerprints(o, data.fingerprints); }));
  }
  if (!a.manifest_out.empty()) {
    Json m;
    m["tool_version"] = kToolVersion;
    m["synthetic"] = describe(spec, data.truth);
    write_file(a.manifest_out, m.dump(2) + "\n");
  }
  std::cerr << "synth: " << data.tasks.size() << " tasks, " << data.embeddings.size() << " embeddings of dim "
            << data.embeddings.dim() << "\n";
  return kOk;
}

// ---------------------------------------------------------------- prepare

struct PrepareArgs {
  PrepareConfig config;
  std::size_t screening_max_size = 0;
  std::string input;
  std::string output;
};

int run_prepare(const PrepareArgs& a) {
  ParseIssues issues;
  const auto tasks = read_tasks(fs::path(a.input), &issues);
  for (const auto& msg : issues.messages) std::cerr << "error: " << msg << "\n";
  if (tasks.empty()) std::cerr << "warning: no tasks in input\n";
  PrepareConfig config = a.config;
  if (a.screening_max_size > 0) config.screening_max_size = a.screening_max_size;
  PrepareReport report;
  const auto prepared = prepare_tasks(tasks, config, report);
  write_file(a.output, slurp_to_string([&](std::ostream& o) { write_tasks(o, prepared); }));
  std::cout << report.to_text();
  return issues.empty() ? kOk : kData;
}

// ---------------------------------------------------------------- episodes

struct EpisodesArgs {
  std::string tasks;
  std::string output;
  std::vector<int> sizes = kDefaultSupportSizes;
  int repeats = kDefaultBalancedRepeats;
  std::uint64_t seed = 0;
  std::vector<double> hit_fractions;
  bool force_balanced = false;
};

int run_episodes(const EpisodesArgs& a) {
  ParseIssues issues;
  const auto tasks = read_tasks(fs::path(a.tasks), &issues);
  for (const auto& msg : issues.messages) std::cerr << "error: " << msg << "\n";
  std::vector<std::optional<double>> fractions;
  if (a.hit_fractions.empty()) fractions.emplace_back();
  for (double f : a.hit_fractions) fractions.emplace_back(f);

  std::vector<EpisodeManifestEntry> entries;
  std::size_t failed = 0;
  for (const auto& task : tasks) {
    try {
      std::vector<EpisodeManifestEntry> mine;
      for (int size : a.sizes) {
        for (const auto& f : fractions) {
          EpisodeSpec spec{size, f, a.repeats, a.seed, a.force_balanced};
          for (int r = 0; r < a.repeats; ++r) mine.push_back({r, size, f, sample_episode(task, spec, r)});
        }
      }
      entries.insert(entries.end(), mine.begin(), mine.end());
    } catch (const Error& e) {
      ++failed;
      std::cerr << "task " << task.task_id << ": " << e.what() << "\n";
    }
  }
  write_file(a.output, slurp_to_string([&](std::ostream& o) { write_episode_manifest(o, entries); }));
  if (!issues.empty()) return kData;
  return !tasks.empty() && static_cast<double>(failed) > 0.1 * static_cast<double>(tasks.size()) ? kPartial : kOk;
}

// ---------------------------------------------------------------- benchmark

struct BenchmarkArgs {
  BenchmarkConfig config;
  std::string embeddings;
  std::string tasks;
  std::string fingerprints;
  std::string out_dir = "results";
  std::string episodes_out;
  std::string epochs_per_size;
};

int run_benchmark_cmd(BenchmarkArgs a) {
  const auto t_start = Clock::now();
  Json timings;

  auto t0 = Clock::now();
  const EmbeddingSet embeddings = read_embeddings(a.embeddings);
  ParseIssues issues;
  const auto tasks = read_tasks(fs::path(a.tasks), &issues);
  for (const auto& msg : issues.messages) std::cerr << "error: " << msg << "\n";
  std::optional<FingerprintSet> fps;
  if (!a.fingerprints.empty()) fps = read_fingerprints(fs::path(a.fingerprints));
  timings["load"] = seconds_since(t0);
  if (embeddings.renormalized_count() > 0) {
    std::cerr << "warning: " << embeddings.renormalized_count() << " embeddings were not unit norm and were normalized\n";
  }

  a.config.epochs_per_size = parse_epochs_per_size(a.epochs_per_size);
  t0 = Clock::now();
  BenchmarkResult result = run_benchmark(embeddings, tasks, fps ? &*fps : nullptr, a.config);
  timings["evaluate"] = seconds_since(t0);
  for (const auto& f : result.failures) std::cerr << "task " << f.task_id << " failed: " << f.message << "\n";

  t0 = Clock::now();
  const EvalReport report = aggregate(result.rows);
  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  write_file(dir / "results.csv", slurp_to_string([&](std::ostream& o) { write_results_csv(o, report.rows); }));
  write_file(dir / "summary.csv", slurp_to_string([&](std::ostream& o) { write_summary_csv(o, report.summary); }));
  write_file(dir / "report.json", slurp_to_string([&](std::ostream& o) { write_report_json(o, report); }));
  if (!a.episodes_out.empty()) {
    write_file(a.episodes_out, slurp_to_string([&](std::ostream& o) { write_episode_manifest(o, result.episodes); }));
  }
  timings["write"] = seconds_since(t0);

  const BenchmarkConfig& c = a.config;
  Json m;
  m["tool_version"] = kToolVersion;
  m["results_schema_version"] = kResultsSchemaVersion;
  m["seed"] = c.seed;
  Json cfg;
  cfg["train"] = train_json(c.train);
  cfg["support_sizes"] = c.support_sizes;
  cfg["repeats"] = c.repeats;
  cfg["models"] = c.models;
  cfg["hit_fractions"] = c.hit_fractions;
  cfg["k_percents"] = c.k_percents;
  Json eps = Json::object();
  for (const auto& [size, epochs] : c.epochs_per_size) eps[std::to_string(size)] = epochs;
  cfg["epochs_per_size"] = eps;
  cfg["knn_k"] = c.knn_k;
  cfg["force_balanced"] = c.force_balanced;
  cfg["threads"] = c.threads;
  m["config"] = cfg;
  Json inputs;
  inputs["embeddings"] = {{"path", a.embeddings}, {"sha256", sha256_file(a.embeddings)}};
  inputs["tasks"] = {{"path", a.tasks}, {"sha256", sha256_file(a.tasks)}};
  if (!a.fingerprints.empty()) inputs["fingerprints"] = {{"path", a.fingerprints}, {"sha256", sha256_file(a.fingerprints)}};
  m["inputs"] = inputs;
  m["tasks_total"] = result.n_tasks;
  m["tasks_failed"] = result.failures.size();
  m["timings_s"] = timings;
  m["wall_clock_s"] = seconds_since(t_start);
  write_file(dir / "manifest.json", m.dump(2) + "\n");

  std::cerr << "benchmark: " << report.rows.size() << " rows, " << result.failures.size() << "/" << result.n_tasks
            << " tasks failed\n";
  if (result.failed_fraction() > c.max_failed_task_fraction) return kPartial;
  return issues.empty() ? kOk : kData;
}

// ---------------------------------------------------------------- demo

struct DemoArgs {
  DemoConfig config;
  std::string embeddings;
  std::string tasks;
  std::string task_id;
  int dim = 128;
  int per_class = 8;
  std::uint64_t seed = 0;
  std::string out_dir = "demo";
};

int run_demo(const DemoArgs& a) {
  SupportView support;
  if (!a.embeddings.empty() || !a.tasks.empty()) {
    if (a.embeddings.empty() || a.tasks.empty()) throw CLI::ValidationError("--embeddings and --tasks go together");
    const EmbeddingSet embeddings = read_embeddings(a.embeddings);
    const auto tasks = read_tasks(fs::path(a.tasks));
    const TaskRecord* chosen = nullptr;
    for (const auto& t : tasks) {
      if (a.task_id.empty() || t.task_id == a.task_id) {
        chosen = &t;
        break;
      }
    }
    if (chosen == nullptr) throw Error(ErrorCode::InvalidInput, "no matching task");
    chosen->require_labels();
    std::vector<LabelledSample> samples;
    for (const auto& s : chosen->samples) samples.push_back({s.sample_id, *s.label});
    support = gather_support(samples, embeddings);
  } else {
    const SyntheticDataset data = separable_instance(a.dim, a.per_class, a.seed);
    std::vector<LabelledSample> samples;
    for (const auto& s : data.tasks.front().samples) samples.push_back({s.sample_id, *s.label});
    support = gather_support(samples, data.embeddings);
  }

  const DemoResult result = run_degeneracy_demo(support, a.config);
  write_demo_tables(a.out_dir, result);
  const auto& h = result.hyperplane;
  std::cout << "separator: margin " << format_double(h.margin) << (h.from_class_sums ? " (class sums)" : " (perceptron, ")
            << (h.from_class_sums ? "" : std::to_string(h.perceptron_updates) + " updates)") << "\n";
  std::cout << "ce strictly decreasing: " << (result.check.ce_strictly_decreasing ? "yes" : "no") << "\n"
            << "fro norm strictly increasing: " << (result.check.fro_strictly_increasing ? "yes" : "no") << "\n"
            << "final ce below tolerance: " << (result.check.final_ce_below_tolerance ? "yes" : "no") << "\n"
            << "ce within bound: " << (result.check.ce_within_bound ? "yes" : "no") << "\n"
            << "wrong prototype farther along normal: " << (result.mahalanobis_inequality ? "yes" : "no") << "\n"
            << "peak max eigenvalue: free-opt " << format_double(peak_max_eigenvalue(result.free_opt)) << ", q-probe "
            << format_double(peak_max_eigenvalue(result.quadratic)) << ", free-opt-reg "
            << format_double(peak_max_eigenvalue(result.free_opt_reg)) << "\n";
  return kOk;
}

void add_train_flags(CLI::App* cmd, TrainConfig& t) {
  cmd->add_option("--epochs", t.epochs, "Training epochs")->capture_default_str();
  cmd->add_option("--lr", t.learning_rate, "Learning rate")->capture_default_str();
  cmd->add_option("--lambda", t.shrinkage_lambda, "Covariance shrinkage")->capture_default_str();
  cmd->add_option("--tau", t.temperature, "Linear probe temperature")->capture_default_str();
  cmd->add_option("--reg-weight", t.free_opt_reg_weight, "Free-Opt-reg penalty weight")->capture_default_str();
  cmd->add_flag("--freeze-prototypes", t.freeze_prototypes, "Skip the q-probe prototype step");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot probes over fixed embeddings"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate Gaussian synthetic tasks");
  c_synth->add_option("--dim", synth.spec.dim)->capture_default_str();
  c_synth->add_option("--tasks", synth.spec.n_tasks, "Number of tasks")->capture_default_str();
  c_synth->add_option("--per-class", synth.spec.n_per_class)->capture_default_str();
  c_synth->add_option("--separation", synth.spec.separation, "Mean distance in units of --scale")->capture_default_str();
  c_synth->add_option("--scale", synth.spec.scale)->capture_default_str();
  c_synth->add_option("--center-norm", synth.spec.center_norm)->capture_default_str();
  c_synth->add_option("--covariance", synth.covariance)
      ->check(CLI::IsMember({"isotropic", "diagonal", "rotated"}))
      ->capture_default_str();
  c_synth->add_option("--condition", synth.spec.condition_number)->capture_default_str();
  c_synth->add_flag("--identical", synth.spec.identical_classes, "Both classes share one distribution");
  c_synth->add_option("--fingerprint-bits", synth.spec.fingerprint_bits)->capture_default_str();
  c_synth->add_option("--seed", synth.spec.seed)->capture_default_str();
  c_synth->add_option("--embeddings-out", synth.embeddings_out)->required();
  c_synth->add_option("--tasks-out", synth.tasks_out)->required();
  c_synth->add_option("--fingerprints-out", synth.fingerprints_out);
  c_synth->add_option("--manifest-out", synth.manifest_out);
  c_synth->add_flag("--binary", synth.binary, "Write EMB1 binary embeddings");

  PrepareArgs prep;
  auto* c_prep = app.add_subcommand("prepare", "Binarize and filter activity tasks");
  c_prep->add_option("--input", prep.input, "JSONL with activities")->required();
  c_prep->add_option("--output", prep.output, "JSONL with labels")->required();
  c_prep->add_option("--clip-low", prep.config.clip_low)->capture_default_str();
  c_prep->add_option("--clip-high", prep.config.clip_high)->capture_default_str();
  c_prep->add_option("--min-size", prep.config.filter.min_size)->capture_default_str();
  c_prep->add_option("--max-size", prep.config.filter.max_size)->capture_default_str();
  c_prep->add_option("--min-positive-fraction", prep.config.filter.min_positive_fraction)->capture_default_str();
  c_prep->add_option("--max-positive-fraction", prep.config.filter.max_positive_fraction)->capture_default_str();
  c_prep->add_option("--screening-max-size", prep.screening_max_size, "Subsample tasks to this size (0: off)");
  c_prep->add_option("--screening-max-pos-frac", prep.config.screening_max_pos_frac)->capture_default_str();
  c_prep->add_option("--seed", prep.config.seed)->capture_default_str();

  EpisodesArgs eps;
  auto* c_eps = app.add_subcommand("episodes", "Write an episode manifest");
  c_eps->add_option("--tasks", eps.tasks)->required();
  c_eps->add_option("--output", eps.output)->required();
  c_eps->add_option("--support-sizes", eps.sizes)->delimiter(',')->capture_default_str();
  c_eps->add_option("--repeats", eps.repeats)->capture_default_str();
  c_eps->add_option("--seed", eps.seed)->capture_default_str();
  c_eps->add_option("--hit-fraction", eps.hit_fractions)->delimiter(',');
  c_eps->add_flag("--force-balanced", eps.force_balanced);

  BenchmarkArgs bench;
  auto* c_bench = app.add_subcommand("benchmark", "Evaluate models on sampled episodes");
  c_bench->add_option("--embeddings", bench.embeddings)->required()->check(CLI::ExistingFile);
  c_bench->add_option("--tasks", bench.tasks)->required()->check(CLI::ExistingFile);
  c_bench->add_option("--fingerprints", bench.fingerprints)->check(CLI::ExistingFile);
  c_bench->add_option("--out-dir", bench.out_dir)->capture_default_str();
  c_bench->add_option("--episodes-out", bench.episodes_out);
  c_bench->add_option("--support-sizes", bench.config.support_sizes)->delimiter(',')->capture_default_str();
  c_bench->add_option("--repeats", bench.config.repeats)->capture_default_str();
  c_bench->add_option("--seed", bench.config.seed)->capture_default_str();
  c_bench->add_option("--models", bench.config.models)->delimiter(',')->capture_default_str();
  c_bench->add_option("--hit-fraction", bench.config.hit_fractions, "Screening support positive fractions")
      ->delimiter(',');
  c_bench->add_option("--k-percents", bench.config.k_percents, "Top-k% hitrates to report")->delimiter(',');
  c_bench->add_option("--epochs-per-size", bench.epochs_per_size, "size=epochs,...");
  c_bench->add_option("--knn-k", bench.config.knn_k)->capture_default_str();
  c_bench->add_flag("--force-balanced", bench.config.force_balanced);
  c_bench->add_option("--threads", bench.config.threads)->capture_default_str();
  add_train_flags(c_bench, bench.config.train);

  DemoArgs demo;
  auto* c_demo = app.add_subcommand("demo-degenerate", "Degenerate Mahalanobis solutions on a separable support");
  c_demo->add_option("--embeddings", demo.embeddings);
  c_demo->add_option("--tasks", demo.tasks);
  c_demo->add_option("--task", demo.task_id, "Task id (default: first)");
  c_demo->add_option("--dim", demo.dim)->capture_default_str();
  c_demo->add_option("--per-class", demo.per_class)->capture_default_str();
  c_demo->add_option("--seed", demo.seed)->capture_default_str();
  c_demo->add_option("--out-dir", demo.out_dir)->capture_default_str();
  c_demo->add_option("--lambdas", demo.config.lambdas)->delimiter(',')->capture_default_str();
  add_train_flags(c_demo, demo.config.train);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*c_synth) return run_synth(synth);
    if (*c_prep) return run_prepare(prep);
    if (*c_eps) return run_episodes(eps);
    if (*c_bench) return run_benchmark_cmd(bench);
    if (*c_demo) return run_demo(demo);
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NotSeparable& e) {
    std::cerr << "error: " << e.what() << " (perceptron updates: " << e.perceptron_updates() << ")\n";
    return kData;
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return e.code() == ErrorCode::InvalidInput ? kUsage : kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
