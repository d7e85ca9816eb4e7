#include "fsprobe/app/formats.hpp"

#include <json.hpp>

#include <array>
#include <bit>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace fsprobe::app {

using ordered_json = nlohmann::ordered_json;

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

double parse_double(std::string_view text, const std::string& where) {
  std::string buf(text);
  char* end = nullptr;
  errno = 0;
  const double value = std::strtod(buf.c_str(), &end);
  if (buf.empty() || end != buf.c_str() + buf.size() || errno == ERANGE) {
    throw Error(ErrorCode::InvalidInput, where + ": cannot parse number '" + buf + "'");
  }
  return value;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

void check_id(const std::string& id) {
  if (id.empty() || id.find_first_of(",\n\r") != std::string::npos) {
    throw Error(ErrorCode::InvalidInput, "sample id '" + id + "' is empty or contains , or newline");
  }
}

std::uint32_t read_u32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  in.read(reinterpret_cast<char*>(b.data()), 4);
  if (!in) throw Error(ErrorCode::InvalidInput, "truncated binary embeddings file");
  return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
         static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

void write_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::ifstream open_input(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
  return in;
}

}  // namespace

EmbeddingSet read_embeddings_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::InvalidInput, "embeddings file is empty");
  strip_cr(line);
  const auto header = split(line, ',');
  if (header.size() < 2 || header[0] != "id") {
    throw Error(ErrorCode::InvalidInput, "embeddings header must be id,e0,...");
  }
  const std::size_t dim = header.size() - 1;
  EmbeddingSet set(dim);
  Vector v(static_cast<Eigen::Index>(dim));
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    const std::string where = "embeddings line " + std::to_string(line_no);
    if (fields.size() != dim + 1) {
      throw Error(ErrorCode::DimMismatch, where + ": expected " + std::to_string(dim + 1) + " fields");
    }
    for (std::size_t j = 0; j < dim; ++j) v(static_cast<Eigen::Index>(j)) = parse_double(fields[j + 1], where);
    const std::string id(fields[0]);
    if (set.contains(id)) throw Error(ErrorCode::InvalidInput, where + ": duplicate id '" + id + "'");
    set.insert(id, v);
  }
  return set;
}

void write_embeddings_csv(std::ostream& out, const EmbeddingSet& set) {
  out << "id";
  for (std::size_t j = 0; j < set.dim(); ++j) out << ",e" << j;
  out << '\n';
  for (const auto& [id, v] : set.entries()) {
    check_id(id);
    out << id;
    for (Eigen::Index j = 0; j < v.size(); ++j) out << ',' << format_double(v(j));
    out << '\n';
  }
}

EmbeddingSet read_embeddings_binary(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "EMB1", 4) != 0) {
    throw Error(ErrorCode::InvalidInput, "missing EMB1 magic");
  }
  const std::uint32_t count = read_u32(in);
  const std::uint32_t dim = read_u32(in);
  EmbeddingSet set(dim);
  Vector v(static_cast<Eigen::Index>(dim));
  std::vector<float> row(dim);
  for (std::uint32_t r = 0; r < count; ++r) {
    const std::uint32_t len = read_u32(in);
    std::string id(len, '\0');
    in.read(id.data(), len);
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(dim * sizeof(float)));
    if (!in) throw Error(ErrorCode::InvalidInput, "truncated binary embeddings file");
    static_assert(std::endian::native == std::endian::little, "binary embeddings assume little endian");
    for (std::uint32_t j = 0; j < dim; ++j) v(j) = row[j];
    set.insert(id, v);
  }
  return set;
}

void write_embeddings_binary(std::ostream& out, const EmbeddingSet& set) {
  out.write("EMB1", 4);
  write_u32(out, static_cast<std::uint32_t>(set.size()));
  write_u32(out, static_cast<std::uint32_t>(set.dim()));
  std::vector<float> row(set.dim());
  for (const auto& [id, v] : set.entries()) {
    write_u32(out, static_cast<std::uint32_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
    for (std::size_t j = 0; j < set.dim(); ++j) row[j] = static_cast<float>(v(static_cast<Eigen::Index>(j)));
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
}

EmbeddingSet read_embeddings(const std::filesystem::path& path) {
  auto in = open_input(path, std::ios::in | std::ios::binary);
  char magic[4] = {};
  in.read(magic, 4);
  const bool binary = in.gcount() == 4 && std::memcmp(magic, "EMB1", 4) == 0;
  in.clear();
  in.seekg(0);
  return binary ? read_embeddings_binary(in) : read_embeddings_csv(in);
}

std::vector<TaskRecord> read_tasks(std::istream& in, ParseIssues* issues) {
  std::vector<TaskRecord> tasks;
  std::map<std::string, std::size_t> index;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (!j.is_object()) throw Error(ErrorCode::InvalidInput, "not a JSON object");
      TaskSample sample;
      const std::string task_id = j.at("task_id").get<std::string>();
      sample.sample_id = j.at("sample_id").get<std::string>();
      if (j.contains("label")) {
        const int label = j.at("label").get<int>();
        if (label != 0 && label != 1) throw Error(ErrorCode::InvalidInput, "label must be 0 or 1");
        sample.label = label;
      }
      if (j.contains("activity")) sample.activity = j.at("activity").get<double>();
      if (!sample.label && !sample.activity) {
        throw Error(ErrorCode::InvalidInput, "record needs a label or an activity");
      }
      auto [it, inserted] = index.try_emplace(task_id, tasks.size());
      if (inserted) tasks.push_back({task_id, {}});
      tasks[it->second].samples.push_back(std::move(sample));
    } catch (const std::exception& e) {
      const std::string message = "tasks line " + std::to_string(line_no) + ": " + e.what();
      if (issues == nullptr) throw Error(ErrorCode::InvalidInput, message);
      issues->messages.push_back(message);
    }
  }
  return tasks;
}

std::vector<TaskRecord> read_tasks(const std::filesystem::path& path, ParseIssues* issues) {
  auto in = open_input(path);
  return read_tasks(in, issues);
}

void write_tasks(std::ostream& out, const std::vector<TaskRecord>& tasks) {
  for (const auto& task : tasks) {
    for (const auto& s : task.samples) {
      ordered_json j;
      j["task_id"] = task.task_id;
      j["sample_id"] = s.sample_id;
      if (s.label) j["label"] = *s.label;
      if (s.activity) j["activity"] = *s.activity;
      out << j.dump() << '\n';
    }
  }
}

FingerprintSet read_fingerprints(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::InvalidInput, "fingerprint file is empty");
  strip_cr(line);
  constexpr std::string_view kPrefix = "# bits=";
  if (line.rfind(kPrefix, 0) != 0) {
    throw Error(ErrorCode::InvalidInput, "fingerprint file must start with '# bits=N'");
  }
  const auto nbits = static_cast<std::size_t>(parse_double(line.substr(kPrefix.size()), "fingerprint header"));
  if (!std::getline(in, line)) throw Error(ErrorCode::InvalidInput, "fingerprint header row missing");
  strip_cr(line);
  if (line != "id,fingerprint") throw Error(ErrorCode::InvalidInput, "fingerprint header must be id,fingerprint");
  FingerprintSet fps;
  std::size_t line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != 2) {
      throw Error(ErrorCode::InvalidInput, "fingerprints line " + std::to_string(line_no) + ": expected 2 fields");
    }
    fps.insert_or_assign(std::string(fields[0]), BinaryFingerprint::from_hex(fields[1], nbits));
  }
  return fps;
}

FingerprintSet read_fingerprints(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_fingerprints(in);
}

void write_fingerprints(std::ostream& out, const FingerprintSet& fps) {
  const std::size_t nbits = fps.empty() ? 0 : fps.begin()->second.size();
  out << "# bits=" << nbits << "\nid,fingerprint\n";
  for (const auto& [id, fp] : fps) {
    check_id(id);
    if (fp.size() != nbits) throw Error(ErrorCode::LengthMismatch, "fingerprint lengths differ");
    out << id << ',' << fp.to_hex() << '\n';
  }
}

bool operator==(const EpisodeManifestEntry& a, const EpisodeManifestEntry& b) {
  return a.repeat == b.repeat && a.support_size == b.support_size &&
         a.hit_fraction == b.hit_fraction && a.episode.task_id == b.episode.task_id &&
         a.episode.support == b.episode.support && a.episode.query == b.episode.query;
}

namespace {
void split_samples(const std::vector<LabelledSample>& samples, ordered_json& ids, ordered_json& labels) {
  ids = ordered_json::array();
  labels = ordered_json::array();
  for (const auto& s : samples) {
    ids.push_back(s.id);
    labels.push_back(s.label);
  }
}

std::vector<LabelledSample> join_samples(const nlohmann::json& ids, const nlohmann::json& labels) {
  if (ids.size() != labels.size()) throw Error(ErrorCode::LengthMismatch, "ids and labels differ in length");
  std::vector<LabelledSample> out;
  for (std::size_t i = 0; i < ids.size(); ++i) out.push_back({ids[i].get<std::string>(), labels[i].get<int>()});
  return out;
}
}  // namespace

void write_episode_manifest(std::ostream& out, const std::vector<EpisodeManifestEntry>& entries) {
  for (const auto& e : entries) {
    ordered_json j;
    j["task_id"] = e.episode.task_id;
    j["repeat"] = e.repeat;
    j["support_size"] = e.support_size;
    j["hit_fraction"] = e.hit_fraction ? ordered_json(*e.hit_fraction) : ordered_json(nullptr);
    split_samples(e.episode.support, j["support_ids"], j["support_labels"]);
    split_samples(e.episode.query, j["query_ids"], j["query_labels"]);
    out << j.dump() << '\n';
  }
}

std::vector<EpisodeManifestEntry> read_episode_manifest(std::istream& in) {
  std::vector<EpisodeManifestEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      EpisodeManifestEntry e;
      e.episode.task_id = j.at("task_id").get<std::string>();
      e.repeat = j.at("repeat").get<int>();
      e.support_size = j.value("support_size", 0);
      if (j.contains("hit_fraction") && !j.at("hit_fraction").is_null()) {
        e.hit_fraction = j.at("hit_fraction").get<double>();
      }
      e.episode.support = join_samples(j.at("support_ids"), j.at("support_labels"));
      e.episode.query = join_samples(j.at("query_ids"), j.at("query_labels"));
      out.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::InvalidInput, "episodes line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return out;
}

void write_results_csv(std::ostream& out, const std::vector<EpisodeRow>& rows) {
  out << "model,task_id,support_size,hit_fraction,repeat,support_positives,query_size,query_positives";
  if (!rows.empty()) {
    for (const auto& [name, value] : rows.front().metrics) out << ',' << name;
  }
  out << '\n';
  for (const auto& r : rows) {
    out << r.model << ',' << r.task_id << ',' << r.support_size << ','
        << (r.hit_fraction ? format_double(*r.hit_fraction) : std::string()) << ',' << r.repeat << ','
        << r.support_positives << ',' << r.query_size << ',' << r.query_positives;
    for (const auto& [name, value] : r.metrics) out << ',' << format_double(value);
    out << '\n';
  }
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& summary) {
  out << "model,support_size,hit_fraction,metric,mean,half_width,n,mean_rank\n";
  for (const auto& s : summary) {
    out << s.model << ',' << s.support_size << ','
        << (s.hit_fraction ? format_double(*s.hit_fraction) : std::string()) << ',' << s.metric << ','
        << format_double(s.mean) << ',' << format_double(s.half_width) << ',' << s.n << ','
        << format_double(s.mean_rank) << '\n';
  }
}

void write_report_json(std::ostream& out, const EvalReport& report) {
  ordered_json j;
  j["schema_version"] = kResultsSchemaVersion;
  j["summary"] = ordered_json::array();
  for (const auto& s : report.summary) {
    ordered_json e;
    e["model"] = s.model;
    e["support_size"] = s.support_size;
    e["hit_fraction"] = s.hit_fraction ? ordered_json(*s.hit_fraction) : ordered_json(nullptr);
    e["metric"] = s.metric;
    e["mean"] = s.mean;
    e["half_width"] = s.half_width;
    e["n"] = s.n;
    e["mean_rank"] = s.mean_rank;
    j["summary"].push_back(std::move(e));
  }
  j["rows"] = ordered_json::array();
  for (const auto& r : report.rows) {
    ordered_json e;
    e["model"] = r.model;
    e["task_id"] = r.task_id;
    e["support_size"] = r.support_size;
    e["hit_fraction"] = r.hit_fraction ? ordered_json(*r.hit_fraction) : ordered_json(nullptr);
    e["repeat"] = r.repeat;
    e["support_positives"] = r.support_positives;
    e["query_size"] = r.query_size;
    e["query_positives"] = r.query_positives;
    for (const auto& [name, value] : r.metrics) e[name] = value;
    j["rows"].push_back(std::move(e));
  }
  out << j.dump(2) << '\n';
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::out | std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write '" + tmp.string() + "'");
    out << contents;
    if (!out) throw Error(ErrorCode::Io, "write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace fsprobe::app
