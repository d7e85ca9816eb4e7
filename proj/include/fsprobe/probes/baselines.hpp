#pragma once

// Inference-only baselines: nearest prototype, kNN and Tanimoto similarity
// search.

#include "fsprobe/core.hpp"
#include "fsprobe/probes/common.hpp"

#include <string>
#include <vector>

namespace fsprobe {

/// Softmax over negative squared Euclidean distances to the support class
/// means.
Prediction prototype_predict(const SupportView& support, const Eigen::Ref<const Vector>& z);

Prediction prototype_predict(const std::vector<LabelledSample>& support,
                             const EmbeddingSet& embeddings, const Eigen::Ref<const Vector>& z);

/// |a & b| / |a | b|; 0 when both are empty. Throws LengthMismatch.
double tanimoto(const BinaryFingerprint& a, const BinaryFingerprint& b);

/// Max Tanimoto similarity between the query and the positive support samples.
double simsearch_score(const std::vector<LabelledSample>& support,
                       const FingerprintSet& fingerprints, const BinaryFingerprint& query_fp);

/// Fraction of positives among the k nearest support samples; distance ties
/// are broken by ascending sample id. Throws KTooLarge when k > |support|.
double knn_score(const std::vector<LabelledSample>& support, const EmbeddingSet& embeddings,
                 const Eigen::Ref<const Vector>& query, std::size_t k);

/// Same with Tanimoto distance 1 - similarity on fingerprints.
double knn_score(const std::vector<LabelledSample>& support, const FingerprintSet& fingerprints,
                 const BinaryFingerprint& query_fp, std::size_t k);

}  // namespace fsprobe
