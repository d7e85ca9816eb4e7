#include "fsprobe/probes/baselines.hpp"

#include <algorithm>
#include <bit>
#include <tuple>

namespace fsprobe {

Prediction prototype_predict(const SupportView& support, const Eigen::Ref<const Vector>& z) {
  const auto means = class_means(support);
  return Prediction::from_logits(-(z - means[0]).squaredNorm(), -(z - means[1]).squaredNorm());
}

Prediction prototype_predict(const std::vector<LabelledSample>& support,
                             const EmbeddingSet& embeddings, const Eigen::Ref<const Vector>& z) {
  return prototype_predict(gather_support(support, embeddings), z);
}

double tanimoto(const BinaryFingerprint& a, const BinaryFingerprint& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::LengthMismatch, "fingerprints of " + std::to_string(a.size()) +
                                               " and " + std::to_string(b.size()) + " bits");
  }
  std::size_t both = 0, either = 0;
  for (std::size_t i = 0; i < a.words().size(); ++i) {
    both += static_cast<std::size_t>(std::popcount(a.words()[i] & b.words()[i]));
    either += static_cast<std::size_t>(std::popcount(a.words()[i] | b.words()[i]));
  }
  return either == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(either);
}

namespace {
const BinaryFingerprint& lookup(const FingerprintSet& fps, const std::string& id) {
  auto it = fps.find(id);
  if (it == fps.end()) throw Error(ErrorCode::UnknownId, "no fingerprint for '" + id + "'");
  return it->second;
}

// Fraction of positives among the k smallest (distance, id) pairs.
double knn_vote(std::vector<std::tuple<double, std::string, int>> scored, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::InvalidInput, "k must be positive");
  if (k > scored.size()) {
    throw Error(ErrorCode::KTooLarge,
                "k = " + std::to_string(k) + " exceeds support size " + std::to_string(scored.size()));
  }
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end());
  std::size_t positives = 0;
  for (std::size_t i = 0; i < k; ++i) positives += static_cast<std::size_t>(std::get<2>(scored[i]));
  return static_cast<double>(positives) / static_cast<double>(k);
}
}  // namespace

double simsearch_score(const std::vector<LabelledSample>& support,
                       const FingerprintSet& fingerprints, const BinaryFingerprint& query_fp) {
  double best = -1.0;
  for (const auto& s : support) {
    if (s.label == 1) best = std::max(best, tanimoto(query_fp, lookup(fingerprints, s.id)));
  }
  if (best < 0.0) throw Error(ErrorCode::DegenerateLabels, "similarity search needs a positive");
  return best;
}

double knn_score(const std::vector<LabelledSample>& support, const EmbeddingSet& embeddings,
                 const Eigen::Ref<const Vector>& query, std::size_t k) {
  std::vector<std::tuple<double, std::string, int>> scored;
  scored.reserve(support.size());
  for (const auto& s : support) {
    scored.emplace_back((embeddings.at(s.id) - query).squaredNorm(), s.id, s.label);
  }
  return knn_vote(std::move(scored), k);
}

double knn_score(const std::vector<LabelledSample>& support, const FingerprintSet& fingerprints,
                 const BinaryFingerprint& query_fp, std::size_t k) {
  std::vector<std::tuple<double, std::string, int>> scored;
  scored.reserve(support.size());
  for (const auto& s : support) {
    scored.emplace_back(1.0 - tanimoto(query_fp, lookup(fingerprints, s.id)), s.id, s.label);
  }
  return knn_vote(std::move(scored), k);
}

}  // namespace fsprobe
