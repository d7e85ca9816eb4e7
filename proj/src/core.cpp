#include "fsprobe/core.hpp"

#include <bit>
#include <cmath>
#include <set>

namespace fsprobe {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::NotSeparable: return "NotSeparable";
    case ErrorCode::EmptyTask: return "EmptyTask";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::UnknownId: return "UnknownId";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

NotPositiveDefinite::NotPositiveDefinite(std::size_t pivot, double value, const std::string& hint)
    : Error(ErrorCode::NotPositiveDefinite,
            "Cholesky pivot " + std::to_string(pivot) + " = " + std::to_string(value) +
                (hint.empty() ? std::string() : " (" + hint + ")")),
      pivot_(pivot) {}

NotSeparable::NotSeparable(std::size_t perceptron_updates)
    : Error(ErrorCode::NotSeparable,
            "support is not linearly separable; perceptron gave up after " +
                std::to_string(perceptron_updates) + " updates"),
      updates_(perceptron_updates) {}

InsufficientSamples::InsufficientSamples(int label, std::size_t needed, std::size_t available,
                                         const std::string& where)
    : Error(ErrorCode::InsufficientSamples,
            where + ": class " + std::to_string(label) + " needs " + std::to_string(needed) +
                " samples, has " + std::to_string(available)),
      label_(label) {}

Vector normalize_embedding(const Eigen::Ref<const Vector>& v) {
  const double norm = v.norm();
  if (!(norm > kZeroNorm)) {
    throw Error(ErrorCode::ZeroVector, "cannot normalize a vector of norm " + std::to_string(norm));
  }
  return v / norm;
}

EmbeddingSet::EmbeddingSet(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw Error(ErrorCode::InvalidInput, "embedding dimension must be positive");
}

void EmbeddingSet::insert(const std::string& id, const Eigen::Ref<const Vector>& v) {
  if (static_cast<std::size_t>(v.size()) != dim_) {
    throw Error(ErrorCode::DimMismatch, "embedding '" + id + "' has length " +
                                            std::to_string(v.size()) + ", expected " +
                                            std::to_string(dim_));
  }
  const double norm = v.norm();
  if (std::abs(norm - 1.0) <= kUnitNormSlack) {
    entries_.insert_or_assign(id, Vector(v));
    return;
  }
  Vector unit = normalize_embedding(v);
  ++renormalized_;
  entries_.insert_or_assign(id, std::move(unit));
}

const Vector& EmbeddingSet::at(const std::string& id) const {
  auto it = entries_.find(id);
  if (it == entries_.end()) throw Error(ErrorCode::UnknownId, "no embedding for '" + id + "'");
  return it->second;
}

void Episode::validate() const {
  std::set<std::string> support_ids;
  std::size_t support_counts[2] = {0, 0};
  for (const auto& s : support) {
    if (s.label != 0 && s.label != 1) throw Error(ErrorCode::InvalidInput, "label must be 0 or 1");
    support_ids.insert(s.id);
    ++support_counts[s.label];
  }
  std::size_t query_counts[2] = {0, 0};
  for (const auto& q : query) {
    if (q.label != 0 && q.label != 1) throw Error(ErrorCode::InvalidInput, "label must be 0 or 1");
    if (support_ids.count(q.id)) {
      throw Error(ErrorCode::InvalidInput, "sample '" + q.id + "' is in both support and query");
    }
    ++query_counts[q.label];
  }
  for (int k = 0; k < 2; ++k) {
    if (support_counts[k] == 0) throw InsufficientSamples(k, 1, 0, task_id + " support");
    if (query_counts[k] == 0) throw InsufficientSamples(k, 1, 0, task_id + " query");
  }
}

void TrainConfig::validate() const {
  if (epochs < 0) throw Error(ErrorCode::InvalidInput, "epochs must be >= 0");
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidInput, "learning_rate must be > 0");
  if (!(shrinkage_lambda >= 0.0 && shrinkage_lambda <= 1.0)) {
    throw Error(ErrorCode::InvalidInput, "shrinkage_lambda must lie in [0, 1]");
  }
  if (!(temperature > 0.0)) throw Error(ErrorCode::InvalidInput, "temperature must be > 0");
  if (!(free_opt_reg_weight >= 0.0)) {
    throw Error(ErrorCode::InvalidInput, "free_opt_reg_weight must be >= 0");
  }
}

BinaryFingerprint::BinaryFingerprint(std::size_t nbits) : nbits_(nbits), words_((nbits + 63) / 64, 0) {}

BinaryFingerprint BinaryFingerprint::from_bits(std::string_view bits) {
  BinaryFingerprint fp(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] == '1') {
      fp.set(i);
    } else if (bits[i] != '0') {
      throw Error(ErrorCode::InvalidInput, "fingerprint bit string must contain only 0/1");
    }
  }
  return fp;
}

namespace {
int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}
}  // namespace

BinaryFingerprint BinaryFingerprint::from_hex(std::string_view hex, std::size_t nbits) {
  if (hex.size() != (nbits + 3) / 4) {
    throw Error(ErrorCode::LengthMismatch, "hex fingerprint has " + std::to_string(hex.size()) +
                                               " digits, expected " +
                                               std::to_string((nbits + 3) / 4));
  }
  BinaryFingerprint fp(nbits);
  for (std::size_t d = 0; d < hex.size(); ++d) {
    const int value = hex_value(hex[d]);
    if (value < 0) throw Error(ErrorCode::InvalidInput, "invalid hex digit in fingerprint");
    for (int b = 0; b < 4; ++b) {
      if (value & (8 >> b)) {
        const std::size_t i = d * 4 + static_cast<std::size_t>(b);
        if (i >= nbits) throw Error(ErrorCode::InvalidInput, "fingerprint padding bits must be 0");
        fp.set(i);
      }
    }
  }
  return fp;
}

std::string BinaryFingerprint::to_hex() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out((nbits_ + 3) / 4, '0');
  for (std::size_t d = 0; d < out.size(); ++d) {
    int value = 0;
    for (int b = 0; b < 4; ++b) {
      const std::size_t i = d * 4 + static_cast<std::size_t>(b);
      if (i < nbits_ && test(i)) value |= 8 >> b;
    }
    out[d] = kDigits[value];
  }
  return out;
}

bool BinaryFingerprint::test(std::size_t i) const {
  return (words_[i / 64] >> (i % 64)) & 1u;
}

void BinaryFingerprint::set(std::size_t i, bool value) {
  if (i >= nbits_) throw Error(ErrorCode::InvalidInput, "fingerprint bit index out of range");
  const std::uint64_t mask = std::uint64_t{1} << (i % 64);
  if (value) {
    words_[i / 64] |= mask;
  } else {
    words_[i / 64] &= ~mask;
  }
}

std::size_t BinaryFingerprint::count() const {
  std::size_t total = 0;
  for (auto w : words_) total += static_cast<std::size_t>(std::popcount(w));
  return total;
}

std::size_t SupportView::count(int label) const {
  std::size_t n = 0;
  for (int y : labels) n += (y == label);
  return n;
}

Matrix SupportView::class_points(int label) const {
  Matrix out(points.rows(), static_cast<Eigen::Index>(count(label)));
  Eigen::Index col = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) out.col(col++) = points.col(static_cast<Eigen::Index>(i));
  }
  return out;
}

SupportView gather_support(const std::vector<LabelledSample>& support,
                           const EmbeddingSet& embeddings) {
  SupportView view;
  view.points.resize(static_cast<Eigen::Index>(embeddings.dim()),
                     static_cast<Eigen::Index>(support.size()));
  view.labels.reserve(support.size());
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (support[i].label != 0 && support[i].label != 1) {
      throw Error(ErrorCode::InvalidInput, "label must be 0 or 1");
    }
    view.points.col(static_cast<Eigen::Index>(i)) = embeddings.at(support[i].id);
    view.labels.push_back(support[i].label);
  }
  if (view.count(0) == 0 || view.count(1) == 0) {
    throw Error(ErrorCode::DegenerateLabels, "support must contain both classes");
  }
  return view;
}

}  // namespace fsprobe
