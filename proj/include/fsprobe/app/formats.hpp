#pragma once

// On-disk formats.
//
//   embeddings  CSV, header `id,e0,...,e{d-1}`, 17 significant digits, LF;
//               or binary: "EMB1", u32 count, u32 dim (little endian), then
//               per row a u32 id length, the id bytes and dim float32 values.
//   tasks       JSONL, one sample per line:
//               {"task_id":..,"sample_id":..,"label":0|1} or "activity":x
//   fingerprints CSV preceded by `# bits=N`, header `id,fingerprint`, hex
//               digits as in BinaryFingerprint::to_hex
//   episodes    JSONL, one episode per line (see EpisodeManifestEntry)

#include "fsprobe/core.hpp"
#include "fsprobe/episodes.hpp"
#include "fsprobe/metrics.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace fsprobe::app {

/// printf("%.17g"); "nan" / "inf" / "-inf" for non-finite values.
std::string format_double(double x);

/// Line-numbered parse problems collected while reading a lenient format.
struct ParseIssues {
  std::vector<std::string> messages;
  bool empty() const { return messages.empty(); }
};

EmbeddingSet read_embeddings_csv(std::istream& in);
void write_embeddings_csv(std::ostream& out, const EmbeddingSet& set);
EmbeddingSet read_embeddings_binary(std::istream& in);
void write_embeddings_binary(std::ostream& out, const EmbeddingSet& set);
/// Dispatches on the "EMB1" magic.
EmbeddingSet read_embeddings(const std::filesystem::path& path);

/// Groups lines into tasks in order of first appearance. Malformed lines
/// are skipped and reported in `issues` when given, else they throw.
std::vector<TaskRecord> read_tasks(std::istream& in, ParseIssues* issues = nullptr);
std::vector<TaskRecord> read_tasks(const std::filesystem::path& path, ParseIssues* issues = nullptr);
void write_tasks(std::ostream& out, const std::vector<TaskRecord>& tasks);

FingerprintSet read_fingerprints(std::istream& in);
FingerprintSet read_fingerprints(const std::filesystem::path& path);
void write_fingerprints(std::ostream& out, const FingerprintSet& fps);

struct EpisodeManifestEntry {
  int repeat = 0;
  int support_size = 0;
  std::optional<double> hit_fraction;
  Episode episode;

  friend bool operator==(const EpisodeManifestEntry& a, const EpisodeManifestEntry& b);
};

std::vector<EpisodeManifestEntry> read_episode_manifest(std::istream& in);
void write_episode_manifest(std::ostream& out, const std::vector<EpisodeManifestEntry>& entries);

/// Version of the results CSV column layout, recorded in run manifests.
inline constexpr int kResultsSchemaVersion = 1;

/// One row per episode row; metric columns follow the first row's order.
void write_results_csv(std::ostream& out, const std::vector<EpisodeRow>& rows);
/// One row per model x support size x hit fraction x metric.
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& summary);
void write_report_json(std::ostream& out, const EvalReport& report);

/// Writes via a temporary file in the same directory, then renames.
void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace fsprobe::app
