#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fsprobe {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class ErrorCode {
  ZeroVector,
  EmptySet,
  DimMismatch,
  NotPositiveDefinite,
  NoConvergence,
  LengthMismatch,
  KTooLarge,
  NotSeparable,
  EmptyTask,
  InsufficientSamples,
  DegenerateLabels,
  InvalidInput,
  UnknownId,
  Io,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class NotPositiveDefinite : public Error {
 public:
  NotPositiveDefinite(std::size_t pivot, double value, const std::string& hint = {});
  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

class NotSeparable : public Error {
 public:
  explicit NotSeparable(std::size_t perceptron_updates);
  std::size_t perceptron_updates() const noexcept { return updates_; }

 private:
  std::size_t updates_;
};

class InsufficientSamples : public Error {
 public:
  InsufficientSamples(int label, std::size_t needed, std::size_t available,
                      const std::string& where);
  int deficient_class() const noexcept { return label_; }

 private:
  int label_;
};

/// Embeddings with |norm - 1| below this are stored untouched, which keeps
/// write -> read -> write byte-identical.
inline constexpr double kUnitNormSlack = 1e-12;
inline constexpr double kZeroNorm = 1e-12;

/// Returns v / ||v||. Throws ErrorCode::ZeroVector when ||v|| <= 1e-12.
Vector normalize_embedding(const Eigen::Ref<const Vector>& v);

/// Id-indexed unit-norm vectors of one fixed dimension. Non-unit inputs are
/// normalized on insertion and counted.
class EmbeddingSet {
 public:
  explicit EmbeddingSet(std::size_t dim);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t renormalized_count() const noexcept { return renormalized_; }

  /// Inserts or replaces. Throws DimMismatch / ZeroVector.
  void insert(const std::string& id, const Eigen::Ref<const Vector>& v);

  bool contains(const std::string& id) const { return entries_.count(id) != 0; }
  /// Throws ErrorCode::UnknownId.
  const Vector& at(const std::string& id) const;

  const std::map<std::string, Vector>& entries() const noexcept { return entries_; }

 private:
  std::size_t dim_;
  std::size_t renormalized_ = 0;
  std::map<std::string, Vector> entries_;
};

struct LabelledSample {
  std::string id;
  int label = 0;

  friend bool operator==(const LabelledSample&, const LabelledSample&) = default;
};

struct Episode {
  std::string task_id;
  std::vector<LabelledSample> support;
  std::vector<LabelledSample> query;

  /// Disjointness, both classes in support, both classes in query.
  void validate() const;
};

struct TrainConfig {
  int epochs = 100;
  double learning_rate = 0.05;
  double shrinkage_lambda = 0.2;
  double temperature = 10.0;
  std::uint64_t seed = 0;
  double free_opt_reg_weight = 0.01;
  /// Skips the prototype gradient step of the quadratic probe.
  bool freeze_prototypes = false;

  void validate() const;
};

/// Fixed-length bit vector, packed little-endian into 64-bit words.
class BinaryFingerprint {
 public:
  BinaryFingerprint() = default;
  explicit BinaryFingerprint(std::size_t nbits);

  /// Parses a string of '0'/'1' characters, bit 0 first.
  static BinaryFingerprint from_bits(std::string_view bits);
  /// Hex digits, most significant nibble bit first: bit i lives in digit i/4
  /// at mask 8 >> (i % 4).
  static BinaryFingerprint from_hex(std::string_view hex, std::size_t nbits);
  std::string to_hex() const;

  std::size_t size() const noexcept { return nbits_; }
  bool test(std::size_t i) const;
  void set(std::size_t i, bool value = true);
  std::size_t count() const;

  const std::vector<std::uint64_t>& words() const noexcept { return words_; }

  friend bool operator==(const BinaryFingerprint&, const BinaryFingerprint&) = default;

 private:
  std::size_t nbits_ = 0;
  std::vector<std::uint64_t> words_;
};

using FingerprintSet = std::map<std::string, BinaryFingerprint>;

/// Support embeddings gathered into a d x n matrix with aligned labels.
struct SupportView {
  Matrix points;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t count(int label) const;
  /// Columns of the given class as a d x n_k matrix.
  Matrix class_points(int label) const;
};

/// Throws UnknownId for unresolved ids, DegenerateLabels if a class is absent.
SupportView gather_support(const std::vector<LabelledSample>& support,
                           const EmbeddingSet& embeddings);

}  // namespace fsprobe
