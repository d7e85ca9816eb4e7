#include "fsprobe/app/synth.hpp"

#include "fsprobe/rng.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <cmath>
#include <cstdio>

namespace fsprobe::app {

CovarianceKind parse_covariance_kind(const std::string& name) {
  if (name == "isotropic") return CovarianceKind::Isotropic;
  if (name == "diagonal") return CovarianceKind::Diagonal;
  if (name == "rotated") return CovarianceKind::RotatedAnisotropic;
  throw Error(ErrorCode::InvalidInput, "unknown covariance kind '" + name + "'");
}

std::string to_string(CovarianceKind kind) {
  switch (kind) {
    case CovarianceKind::Isotropic: return "isotropic";
    case CovarianceKind::Diagonal: return "diagonal";
    case CovarianceKind::RotatedAnisotropic: return "rotated";
  }
  return "unknown";
}

void SyntheticSpec::validate() const {
  if (dim < 1 || n_tasks < 1 || n_per_class < 1) {
    throw Error(ErrorCode::InvalidInput, "dim, n_tasks and n_per_class must be positive");
  }
  if (!(scale > 0.0) || !(condition_number >= 1.0) || !(separation >= 0.0) || !(center_norm >= 0.0)) {
    throw Error(ErrorCode::InvalidInput, "invalid synthetic scale / condition / separation");
  }
  if (fingerprint_bits < 0) throw Error(ErrorCode::InvalidInput, "fingerprint_bits must be >= 0");
}

namespace {

Vector gaussian_vector(Rng& rng, Eigen::Index d) {
  Vector v(d);
  for (Eigen::Index i = 0; i < d; ++i) v(i) = rng.normal();
  return v;
}

Vector random_unit(Rng& rng, Eigen::Index d) {
  Vector v = gaussian_vector(rng, d);
  return v / v.norm();
}

// Haar-distributed orthogonal matrix.
Matrix random_rotation(Rng& rng, Eigen::Index d) {
  Matrix g(d, d);
  for (Eigen::Index j = 0; j < d; ++j) g.col(j) = gaussian_vector(rng, d);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < d; ++j) {
    if (r(j, j) < 0) q.col(j) *= -1.0;
  }
  return q;
}

Vector spectrum(const SyntheticSpec& spec) {
  const Eigen::Index d = spec.dim;
  Vector s = Vector::Ones(d);
  if (spec.covariance != CovarianceKind::Isotropic && d > 1) {
    for (Eigen::Index j = 0; j < d; ++j) {
      s(j) = std::pow(spec.condition_number, -static_cast<double>(j) / static_cast<double>(d - 1));
    }
  }
  return s * (spec.scale * spec.scale);
}

std::string sample_id(int task, int index) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "t%04d_%06d", task, index);
  return buf;
}

std::string task_name(int task) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "task%04d", task);
  return buf;
}

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const Eigen::Index d = spec.dim;
  SyntheticDataset data;
  data.embeddings = EmbeddingSet(static_cast<std::size_t>(d));

  Matrix projections;
  if (spec.fingerprint_bits > 0) {
    Rng fp_rng(hash_combine(spec.seed, hash_string("fingerprints")));
    projections.resize(spec.fingerprint_bits, d);
    for (Eigen::Index r = 0; r < projections.rows(); ++r) projections.row(r) = gaussian_vector(fp_rng, d).transpose();
  }

  const Vector eig = spectrum(spec);
  for (int t = 0; t < spec.n_tasks; ++t) {
    Rng rng(hash_combine(spec.seed, static_cast<std::uint64_t>(t)));
    SyntheticTaskTruth truth;
    truth.task_id = task_name(t);

    const Vector center = spec.center_norm * random_unit(rng, d);
    Vector direction = random_unit(rng, d);
    if (spec.center_norm > 0.0 && d > 1) {
      const Vector c_hat = center / center.norm();
      direction -= direction.dot(c_hat) * c_hat;
      direction /= direction.norm();
    }
    const double half = 0.5 * spec.separation * spec.scale;
    truth.mean = {Vector(center - half * direction), Vector(center + half * direction)};

    std::array<Matrix, 2> rotation;
    for (std::size_t k = 0; k < 2; ++k) {
      rotation[k] = spec.covariance == CovarianceKind::RotatedAnisotropic ? random_rotation(rng, d)
                                                                           : Matrix::Identity(d, d);
    }
    if (spec.identical_classes) {
      truth.mean[1] = truth.mean[0];
      rotation[1] = rotation[0];
    }
    std::array<Matrix, 2> root;
    for (std::size_t k = 0; k < 2; ++k) {
      root[k] = rotation[k] * eig.cwiseSqrt().asDiagonal();
      truth.covariance[k] = rotation[k] * eig.asDiagonal() * rotation[k].transpose();
    }

    TaskRecord task{truth.task_id, {}};
    for (int i = 0; i < 2 * spec.n_per_class; ++i) {
      const int label = i % 2;
      const Vector raw = truth.mean[static_cast<std::size_t>(label)] +
                         root[static_cast<std::size_t>(label)] * gaussian_vector(rng, d);
      const Vector z = normalize_embedding(raw);
      const std::string id = sample_id(t, i);
      data.embeddings.insert(id, z);
      task.samples.push_back({id, std::nullopt, label});
      if (spec.fingerprint_bits > 0) {
        BinaryFingerprint fp(static_cast<std::size_t>(spec.fingerprint_bits));
        const Vector proj = projections * z;
        for (Eigen::Index b = 0; b < proj.size(); ++b) {
          if (proj(b) > 0.0) fp.set(static_cast<std::size_t>(b));
        }
        data.fingerprints.emplace(id, std::move(fp));
      }
    }
    data.tasks.push_back(std::move(task));
    data.truth.push_back(std::move(truth));
  }
  return data;
}

nlohmann::ordered_json describe(const SyntheticSpec& spec, const std::vector<SyntheticTaskTruth>& truth) {
  nlohmann::ordered_json j;
  j["dim"] = spec.dim;
  j["n_tasks"] = spec.n_tasks;
  j["n_per_class"] = spec.n_per_class;
  j["separation"] = spec.separation;
  j["scale"] = spec.scale;
  j["center_norm"] = spec.center_norm;
  j["covariance"] = to_string(spec.covariance);
  j["condition_number"] = spec.condition_number;
  j["identical_classes"] = spec.identical_classes;
  j["fingerprint_bits"] = spec.fingerprint_bits;
  j["seed"] = spec.seed;
  j["tasks"] = nlohmann::ordered_json::array();
  for (const auto& t : truth) {
    nlohmann::ordered_json e;
    e["task_id"] = t.task_id;
    for (std::size_t k = 0; k < 2; ++k) {
      e["mean"].push_back(std::vector<double>(t.mean[k].data(), t.mean[k].data() + t.mean[k].size()));
      nlohmann::ordered_json rows = nlohmann::ordered_json::array();
      for (Eigen::Index r = 0; r < t.covariance[k].rows(); ++r) {
        const Vector row = t.covariance[k].row(r).transpose();
        rows.push_back(std::vector<double>(row.data(), row.data() + row.size()));
      }
      e["covariance"].push_back(std::move(rows));
    }
    j["tasks"].push_back(std::move(e));
  }
  return j;
}

SyntheticDataset separable_instance(int dim, int n_per_class, std::uint64_t seed) {
  if (dim < 1 || n_per_class < 1) throw Error(ErrorCode::InvalidInput, "dim and n_per_class must be positive");
  SyntheticDataset data;
  data.embeddings = EmbeddingSet(static_cast<std::size_t>(dim));
  Rng rng(hash_combine(seed, hash_string("separable")));
  TaskRecord task{"separable", {}};
  for (int i = 0; i < 2 * n_per_class; ++i) {
    const std::string id = sample_id(0, i);
    data.embeddings.insert(id, random_unit(rng, dim));
    task.samples.push_back({id, std::nullopt, i % 2});
  }
  data.tasks.push_back(std::move(task));
  return data;
}

}  // namespace fsprobe::app
