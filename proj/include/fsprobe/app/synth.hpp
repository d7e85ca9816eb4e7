#pragma once

// Gaussian class generator standing in for backbone embeddings. Samples are
// drawn in R^d and projected onto the unit sphere.

#include "fsprobe/core.hpp"
#include "fsprobe/episodes.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace fsprobe::app {

enum class CovarianceKind { Isotropic, Diagonal, RotatedAnisotropic };

CovarianceKind parse_covariance_kind(const std::string& name);
std::string to_string(CovarianceKind kind);

struct SyntheticSpec {
  int dim = 16;
  int n_tasks = 1;
  int n_per_class = 100;
  /// Distance between the two class means, in units of `scale`.
  double separation = 4.0;
  /// Per-axis standard deviation of the widest covariance direction.
  double scale = 1.0;
  /// Norm of the point both class means are placed around.
  double center_norm = 0.0;
  CovarianceKind covariance = CovarianceKind::Isotropic;
  /// Largest over smallest covariance eigenvalue (Diagonal, RotatedAnisotropic).
  double condition_number = 100.0;
  /// Both classes share one distribution (no signal).
  bool identical_classes = false;
  /// Sign-random-projection fingerprints of this many bits; 0 for none.
  int fingerprint_bits = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// True generating parameters of one task, in the raw (pre-normalization) space.
struct SyntheticTaskTruth {
  std::string task_id;
  std::array<Vector, 2> mean;
  std::array<Matrix, 2> covariance;
};

struct SyntheticDataset {
  EmbeddingSet embeddings{1};
  std::vector<TaskRecord> tasks;
  FingerprintSet fingerprints;
  std::vector<SyntheticTaskTruth> truth;
};

SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

/// Generator settings and true parameters as JSON, for run manifests.
nlohmann::ordered_json describe(const SyntheticSpec& spec, const std::vector<SyntheticTaskTruth>& truth);

/// Random unit vectors (near-orthogonal when dim >> n) labelled n_per_class
/// each, as one task. Used by the degeneracy demonstration.
SyntheticDataset separable_instance(int dim, int n_per_class, std::uint64_t seed);

}  // namespace fsprobe::app
