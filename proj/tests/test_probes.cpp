#include "fsprobe/probes/baselines.hpp"
#include "fsprobe/probes/free_opt.hpp"
#include "fsprobe/probes/linear_probe.hpp"
#include "fsprobe/probes/quadratic_probe.hpp"
#include "fsprobe/symlinalg.hpp"
#include "support/test_util.hpp"

#include <doctest.h>

using namespace fsprobe;
using namespace fsprobe::testing;

namespace {

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

// Nearest-centroid softmax written out directly.
double euclid_p1(const Vector& z, const Vector& w0, const Vector& w1) {
  const double d0 = (z - w0).squaredNorm(), d1 = (z - w1).squaredNorm();
  return 1.0 / (1.0 + std::exp(d1 - d0));
}

// L2-regularized logistic regression with intercept by Newton's method.
Vector newton_logistic(const Matrix& x, const std::vector<int>& y, double l2 = 1e-2) {
  const Eigen::Index d = x.rows() + 1;
  Matrix xa(d, x.cols());
  xa.topRows(x.rows()) = x;
  xa.row(d - 1).setOnes();
  Vector beta = Vector::Zero(d);
  for (int it = 0; it < 100; ++it) {
    Vector grad = l2 * beta;
    Matrix hess = l2 * Matrix::Identity(d, d);
    for (Eigen::Index i = 0; i < x.cols(); ++i) {
      const double p = 1.0 / (1.0 + std::exp(-beta.dot(xa.col(i))));
      grad += (p - y[static_cast<std::size_t>(i)]) * xa.col(i);
      hess += p * (1 - p) * xa.col(i) * xa.col(i).transpose();
    }
    const Vector step = hess.ldlt().solve(grad);
    beta -= step;
    if (step.norm() < 1e-12) break;
  }
  return beta;
}

}  // namespace

// ---------------------------------------------------------------- linear

TEST_CASE("linear_probe_predict examples") {
  LinearProbeParams p;
  p.w = {vec2(1, 0), vec2(1, 0)};
  p.tau = 3.0;
  const auto same = linear_probe_predict(p, vec2(0.6, 0.8));
  CHECK(same.p0 == 0.5);
  CHECK(same.p1 == 0.5);

  p.w = {vec2(1, 0), vec2(0, 1)};
  p.tau = 1.0;
  CHECK(linear_probe_predict(p, vec2(0, 1)).p1 == doctest::Approx(std::exp(1.0) / (1 + std::exp(1.0))).epsilon(1e-14));

  double prev = 0.0;
  for (double tau : {0.5, 1.0, 2.0, 5.0, 20.0, 100.0, 1000.0}) {
    p.tau = tau;
    const auto pr = linear_probe_predict(p, vec2(0.6, 0.8));
    CHECK(pr.p1 >= prev);
    CHECK(std::abs(pr.p0 + pr.p1 - 1.0) <= 1e-9);
    prev = pr.p1;
  }
  CHECK(prev == doctest::Approx(1.0));
}

TEST_CASE("linear_probe_fit descends and keeps unit prototypes") {
  // 1-D toy on the unit circle, uneven within each class so the class-mean
  // start is not already stationary.
  SupportView s;
  s.points.resize(2, 4);
  const double angles[] = {std::numbers::pi + 0.1, std::numbers::pi - 0.9, 0.2, 1.1};
  for (int i = 0; i < 4; ++i) s.points.col(i) = vec2(std::cos(angles[i]), std::sin(angles[i]));
  s.labels = {0, 0, 1, 1};
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.temperature = 1.0;
  const auto [params, trace] = linear_probe_fit(s, cfg);
  CHECK(trace.epochs.size() == 20);
  CHECK(trace.epochs.back().ce < trace.initial.ce);
  for (int k = 0; k < 2; ++k) CHECK(std::abs(params.w[k].norm() - 1.0) <= 1e-6);

  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    const SupportView r = random_support(rng, 8, 5);
    const auto fit = linear_probe_fit(r, cfg);
    for (int k = 0; k < 2; ++k) CHECK(std::abs(fit.first.w[k].norm() - 1.0) <= 1e-6);
  }
}

TEST_CASE("linear probe cannot separate identical embeddings") {
  SupportView s;
  const Vector z = vec2(0.6, 0.8);
  s.points.resize(2, 8);
  for (int i = 0; i < 8; ++i) s.points.col(i) = z;
  s.labels = {0, 1, 0, 1, 0, 1, 0, 1};
  TrainConfig cfg;
  cfg.epochs = 200;
  const auto [params, trace] = linear_probe_fit(s, cfg);
  for (const auto& r : trace.epochs) CHECK(r.ce >= std::log(2.0) - 1e-6);

  // unbalanced: the floor is the label entropy
  s.labels = {0, 1, 0, 0, 0, 1, 0, 1};
  const double pi1 = 3.0 / 8.0;
  const double entropy = -pi1 * std::log(pi1) - (1 - pi1) * std::log(1 - pi1);
  const auto unbalanced = linear_probe_fit(s, cfg).second;
  for (const auto& r : unbalanced.epochs) CHECK(r.ce >= entropy - 1e-6);
  CHECK(unbalanced.epochs.back().ce < std::log(2.0));
}

TEST_CASE("linear probe accuracy tracks a logistic-regression oracle") {
  Rng rng(2);
  const int d = 16;
  int checked = 0;
  for (int t = 0; t < 10; ++t) {
    const Vector c0 = random_unit(rng, d), c1 = random_unit(rng, d);
    auto draw = [&](int y) {
      const Vector raw = (y ? c1 : c0) + random_vector(rng, d, 0.25);
      return Vector(raw / raw.norm());
    };
    SupportView s;
    s.points.resize(d, 16);
    for (int i = 0; i < 16; ++i) {
      s.labels.push_back(i % 2);
      s.points.col(i) = draw(i % 2);
    }
    TrainConfig cfg;
    const auto params = linear_probe_fit(s, cfg).first;
    const Vector beta = newton_logistic(s.points, s.labels);
    int ok_probe = 0, ok_oracle = 0;
    const int n = 1000;
    for (int i = 0; i < n; ++i) {
      const int y = i % 2;
      const Vector z = draw(y);
      ok_probe += (linear_probe_predict(params, z).p1 > 0.5) == (y == 1);
      ok_oracle += (beta.head(d).dot(z) + beta(d) > 0.0) == (y == 1);
    }
    const double acc = static_cast<double>(ok_probe) / n, acc_oracle = static_cast<double>(ok_oracle) / n;
    CHECK(acc > 0.9);
    CHECK(acc >= acc_oracle - 0.05);
    ++checked;
  }
  CHECK(checked == 10);
}

// ---------------------------------------------------------------- quadratic

TEST_CASE("quadratic_probe_predict examples") {
  const Matrix i2 = Matrix::Identity(2, 2);
  const QuadraticProbeParams eq({vec2(0, 0), vec2(1, 0)}, {i2, i2});
  CHECK(quadratic_probe_predict(eq, vec2(0.5, 0.3)).p0 == doctest::Approx(0.5).epsilon(1e-15));

  Matrix m1 = Matrix::Zero(2, 2);
  m1.diagonal() << 4, 1;
  const QuadraticProbeParams p({vec2(0, 0), vec2(1, 0)}, {i2, m1});
  const auto d = p.distances(vec2(0.5, 0));
  CHECK(d[0] == 0.25);
  CHECK(d[1] == 1.0);
  CHECK(quadratic_probe_predict(p, vec2(0.5, 0)).p0 ==
        doctest::Approx(1.0 / (1.0 + std::exp(-0.75))).epsilon(1e-14));

  CHECK_THROWS_AS(QuadraticProbeParams({vec2(0, 0), vec2(1, 0)}, {i2, -i2}), NotPositiveDefinite);
}

TEST_CASE("identity precision reduces to Euclidean nearest prototype") {
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.below(12));
    const Vector w0 = random_vector(rng, d), w1 = random_vector(rng, d);
    const QuadraticProbeParams p({w0, w1}, {Matrix::Identity(d, d), Matrix::Identity(d, d)});
    const Vector z = random_vector(rng, d);
    CHECK(std::abs(quadratic_probe_predict(p, z).p1 - euclid_p1(z, w0, w1)) <= 1e-12);
  }
}

TEST_CASE("loss decomposition identity and special values") {
  Rng rng(4);
  for (int t = 0; t < 300; ++t) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.below(10));
    const SupportView s = random_support(rng, d, 1 + static_cast<int>(rng.below(6)));
    const QuadraticProbeParams p({random_vector(rng, d), random_vector(rng, d)},
                                 {random_spd(rng, d), random_spd(rng, d)});
    const LossTerms l = loss_decomposition(p, s);
    CHECK(std::abs(l.ce - (l.f1 + l.f2)) <= 1e-8);
    CHECK(modified_loss(p, s) == doctest::Approx(l.f1 + l.f2_tilde).epsilon(1e-14));
  }

  const SupportView s = random_support(rng, 5, 4);
  const auto proto = QuadraticProbeParams::prototypes(s);
  const LossTerms l = loss_decomposition(proto, s);
  CHECK(l.f2_tilde == 0.0);
  // identity precision: modified loss is the mean squared distance to the own prototype
  const auto means = class_means(s);
  double msd = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) msd += (s.points.col(static_cast<Eigen::Index>(i)) - means[s.labels[i]]).squaredNorm();
  CHECK(modified_loss(proto, s) == doctest::Approx(msd / static_cast<double>(s.size())).epsilon(1e-13));

  SupportView one;
  one.points = Matrix::Zero(2, 2);
  one.points.col(0) = vec2(1, 0);
  one.points.col(1) = vec2(0, 1);
  one.labels = {0, 1};
  const QuadraticProbeParams on_point({vec2(1, 0), vec2(0, 1)}, {Matrix::Identity(2, 2), Matrix::Identity(2, 2)});
  CHECK(loss_decomposition(on_point, one).f1 == 0.0);
}

TEST_CASE("closed-form precision is a stationary point of the modified loss") {
  Rng rng(5);
  for (int d : {2, 4, 8}) {
    const SupportView s = random_support(rng, d, 4 * d, 1.0);
    const auto means = class_means(s);
    const std::array<Matrix, 2> m{closed_form_precision(s.class_points(0), means[0], 0.0),
                                  closed_form_precision(s.class_points(1), means[1], 0.0)};
    const QuadraticProbeParams base(means, m);
    for (int t = 0; t < 100; ++t) {
      const int k = t % 2;
      Matrix dir = random_symmetric(rng, d);
      dir /= dir.norm();
      const double h = 1e-3 / std::max(1.0, m[k].norm());
      auto at = [&](double eps) {
        std::array<Matrix, 2> mm = m;
        mm[k] += eps * dir;
        return modified_loss(QuadraticProbeParams(means, mm), s);
      };
      const double deriv = (at(h) - at(-h)) / (2 * h);
      CHECK(std::abs(deriv) <= 1e-6);
      // and no small symmetric perturbation decreases it by more than 1e-6
      CHECK(at(1e-3 / std::max(1.0, m[k].norm())) >= modified_loss(base, s) - 1e-6);
    }
  }
}

TEST_CASE("modified loss differences equal twice the Gaussian NLL differences") {
  Rng rng(6);
  for (int t = 0; t < 100; ++t) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.below(6));
    const SupportView s = random_support(rng, d, 2 + static_cast<int>(rng.below(5)));
    auto nll = [&](const QuadraticProbeParams& p) {
      double sum = 0.0;
      for (std::size_t i = 0; i < s.size(); ++i) {
        const int y = s.labels[i];
        const Matrix cov = spd_inverse(p.factor(y));
        sum -= gaussian_log_pdf(s.points.col(static_cast<Eigen::Index>(i)), p.w(y), cov);
      }
      return sum / static_cast<double>(s.size());
    };
    const QuadraticProbeParams a({random_vector(rng, d), random_vector(rng, d)}, {random_spd(rng, d), random_spd(rng, d)});
    const QuadraticProbeParams b({random_vector(rng, d), random_vector(rng, d)}, {random_spd(rng, d), random_spd(rng, d)});
    const double lhs = modified_loss(a, s) - modified_loss(b, s);
    const double rhs = 2.0 * (nll(a) - nll(b));
    CHECK(std::abs(lhs - rhs) <= 1e-8 * std::max(1.0, std::abs(lhs)));
  }
}

TEST_CASE("quadratic probe with lambda 1 keeps identity precision") {
  Rng rng(7);
  const SupportView s = random_support(rng, 6, 5);
  TrainConfig cfg;
  cfg.shrinkage_lambda = 1.0;
  cfg.epochs = 15;
  const auto [p, trace] = quadratic_probe_fit(s, cfg);
  for (int k = 0; k < 2; ++k) CHECK(p.m(k) == Matrix::Identity(6, 6));
  for (int i = 0; i < 20; ++i) {
    const Vector z = random_unit(rng, 6);
    CHECK(std::abs(quadratic_probe_predict(p, z).p1 - euclid_p1(z, p.w(0), p.w(1))) <= 1e-12);
  }

  cfg.freeze_prototypes = true;
  const auto frozen = quadratic_probe_fit(s, cfg).first;
  for (int i = 0; i < 20; ++i) {
    const Vector z = random_unit(rng, 6);
    CHECK(std::abs(quadratic_probe_predict(frozen, z).p1 - prototype_predict(s, z).p1) <= 1e-12);
  }
}

TEST_CASE("quadratic probe support CE decreases over the first epochs") {
  Rng rng(8);
  for (int t = 0; t < 10; ++t) {
    const SupportView s = random_support(rng, 8, 16, 0.3);
    TrainConfig cfg;
    cfg.epochs = 10;
    const auto trace = quadratic_probe_fit(s, cfg).second;
    for (std::size_t e = 1; e < trace.epochs.size(); ++e) {
      CHECK(trace.epochs[e].ce <= trace.epochs[e - 1].ce + 1e-6);
    }
  }
}

TEST_CASE("quadratic probe spectrum stays below the shrinkage cap") {
  Rng rng(9);
  for (double lambda : {0.1, 0.2, 0.5}) {
    const SupportView s = random_support(rng, 12, 6);
    TrainConfig cfg;
    cfg.shrinkage_lambda = lambda;
    cfg.epochs = 30;
    const auto trace = quadratic_probe_fit(s, cfg).second;
    for (const auto& r : trace.epochs) {
      for (int k = 0; k < 2; ++k) CHECK(r.max_eig[k] <= 1.0 / lambda + 1e-6);
    }
  }
}

TEST_CASE("lambda 0 on rank-deficient support reports the pivot") {
  Rng rng(10);
  const SupportView s = random_support(rng, 10, 3);
  TrainConfig cfg;
  cfg.shrinkage_lambda = 0.0;
  try {
    quadratic_probe_fit(s, cfg);
    FAIL("expected NotPositiveDefinite");
  } catch (const NotPositiveDefinite& e) {
    CHECK(std::string(e.what()).find("lambda") != std::string::npos);
  }
}

TEST_CASE("traces: length, epoch numbering, determinism") {
  Rng rng(11);
  const SupportView s = random_support(rng, 6, 4);
  const SupportView q = random_support(rng, 6, 10);
  TrainConfig cfg;
  cfg.epochs = 7;
  cfg.seed = 99;
  FitOptions opt;
  opt.monitor_query = &q;
  auto check = [&](const TrainTrace& a, const TrainTrace& b) {
    CHECK(a == b);
    CHECK(a.initial.epoch == 0);
    REQUIRE(a.epochs.size() == 7);
    for (std::size_t e = 0; e < a.epochs.size(); ++e) {
      CHECK(a.epochs[e].epoch == static_cast<int>(e) + 1);
      CHECK(a.epochs[e].query_delta_aucpr.has_value());
    }
  };
  check(linear_probe_fit(s, cfg, opt).second, linear_probe_fit(s, cfg, opt).second);
  check(quadratic_probe_fit(s, cfg, opt).second, quadratic_probe_fit(s, cfg, opt).second);
  check(free_opt_fit(s, cfg, false, opt).second, free_opt_fit(s, cfg, false, opt).second);
  check(free_opt_fit(s, cfg, true, opt).second, free_opt_fit(s, cfg, true, opt).second);

  cfg.epochs = 0;
  CHECK(quadratic_probe_fit(s, cfg).second.epochs.empty());
}

TEST_CASE("label swap mirrors every probe") {
  Rng rng(12);
  for (int t = 0; t < 10; ++t) {
    const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng.below(10));
    const SupportView s = random_support(rng, d, 3 + static_cast<int>(rng.below(4)));
    const SupportView w = swap_labels(s);
    TrainConfig cfg;
    cfg.epochs = 25;
    const auto lp = linear_probe_fit(s, cfg).first, lw = linear_probe_fit(w, cfg).first;
    const auto qp = quadratic_probe_fit(s, cfg).first, qw = quadratic_probe_fit(w, cfg).first;
    const auto fp = free_opt_fit(s, cfg, false).first, fw = free_opt_fit(w, cfg, false).first;
    const auto rp = free_opt_fit(s, cfg, true).first, rw = free_opt_fit(w, cfg, true).first;
    const IdSupport ids = to_ids(s), idw = to_ids(w);
    for (int i = 0; i < 10; ++i) {
      const Vector z = random_unit(rng, d);
      CHECK(std::abs(linear_probe_predict(lp, z).p0 - linear_probe_predict(lw, z).p1) <= 1e-12);
      CHECK(std::abs(quadratic_probe_predict(qp, z).p0 - quadratic_probe_predict(qw, z).p1) <= 1e-12);
      CHECK(std::abs(free_opt_predict(fp, z).p0 - free_opt_predict(fw, z).p1) <= 1e-12);
      CHECK(std::abs(free_opt_predict(rp, z).p0 - free_opt_predict(rw, z).p1) <= 1e-12);
      CHECK(std::abs(prototype_predict(s, z).p0 - prototype_predict(w, z).p1) <= 1e-12);
      const std::size_t k = 1 + rng.below(s.size());
      CHECK(std::abs(knn_score(ids.support, ids.embeddings, z, k) -
                     (1.0 - knn_score(idw.support, idw.embeddings, z, k))) <= 1e-12);
    }
  }
}

// ---------------------------------------------------------------- Free-Opt

TEST_CASE("Free-Opt at zero epochs is the prototype head") {
  Rng rng(13);
  const SupportView s = random_support(rng, 5, 4);
  TrainConfig cfg;
  cfg.epochs = 0;
  const auto [p, trace] = free_opt_fit(s, cfg, false);
  CHECK(trace.initial.max_eig[0] == doctest::Approx(1.0).epsilon(1e-12));
  for (int k = 0; k < 2; ++k) CHECK(p.precision(k) == Matrix::Identity(5, 5));
  for (int i = 0; i < 10; ++i) {
    const Vector z = random_unit(rng, 5);
    CHECK(std::abs(free_opt_predict(p, z).p1 - prototype_predict(s, z).p1) <= 1e-12);
  }
}

TEST_CASE("Free-Opt precision grows on separable data; the penalty restrains it") {
  Rng rng(14);
  SupportView s;
  const int d = 32;
  s.points.resize(d, 8);
  for (int i = 0; i < 8; ++i) {
    s.points.col(i) = random_unit(rng, d);
    s.labels.push_back(i % 2);
  }
  TrainConfig cfg;
  cfg.epochs = 600;
  const auto free = free_opt_fit(s, cfg, false).second;
  const auto reg = free_opt_fit(s, cfg, true).second;
  CHECK(free.epochs.back().ce < 1e-2);
  CHECK(free.epochs.back().max_eig[0] > 2.0 * free.epochs[9].max_eig[0]);
  CHECK(reg.epochs.back().max_eig[0] < free.epochs.back().max_eig[0]);
  CHECK(reg.epochs.back().max_eig[0] < 10.0 * reg.epochs[9].max_eig[0]);
}

// ---------------------------------------------------------------- baselines

TEST_CASE("prototype_predict examples") {
  SupportView s;
  s.points.resize(2, 2);
  s.points.col(0) = vec2(1, 0);
  s.points.col(1) = vec2(0, 1);
  s.labels = {0, 1};
  CHECK(prototype_predict(s, vec2(std::sqrt(0.5), std::sqrt(0.5))).p1 == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(prototype_predict(s, vec2(0, 1)).p1 > 0.5);
  Rng rng(15);
  const SupportView r = random_support(rng, 7, 5);
  const auto proto = QuadraticProbeParams::prototypes(r);
  const IdSupport ids = to_ids(r);
  for (int i = 0; i < 20; ++i) {
    const Vector z = random_unit(rng, 7);
    CHECK(std::abs(prototype_predict(r, z).p1 - quadratic_probe_predict(proto, z).p1) <= 1e-12);
    CHECK(std::abs(prototype_predict(ids.support, ids.embeddings, z).p1 - prototype_predict(r, z).p1) <= 1e-15);
  }
}

TEST_CASE("tanimoto and similarity search examples") {
  const auto a = BinaryFingerprint::from_bits("1100");
  const auto b = BinaryFingerprint::from_bits("1010");
  CHECK(tanimoto(a, a) == 1.0);
  CHECK(tanimoto(a, BinaryFingerprint::from_bits("0011")) == 0.0);
  CHECK(tanimoto(a, b) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(tanimoto(BinaryFingerprint(4), BinaryFingerprint(4)) == 0.0);
  CHECK_THROWS_AS(tanimoto(a, BinaryFingerprint(5)), Error);

  FingerprintSet fps{{"p1", BinaryFingerprint::from_bits("1100")},
                     {"p2", BinaryFingerprint::from_bits("0011")},
                     {"n1", BinaryFingerprint::from_bits("1000")}};
  const std::vector<LabelledSample> support{{"p1", 1}, {"p2", 1}, {"n1", 0}};
  CHECK(simsearch_score(support, fps, BinaryFingerprint::from_bits("1000")) == 0.5);
  CHECK(simsearch_score(support, fps, BinaryFingerprint::from_bits("1100")) == 1.0);
  CHECK(simsearch_score({{"p2", 1}, {"n1", 0}}, fps, BinaryFingerprint::from_bits("1000")) == 0.0);
  CHECK_THROWS_AS(simsearch_score({{"n1", 0}}, fps, a), Error);
}

TEST_CASE("knn examples") {
  EmbeddingSet e(2);
  e.insert("a", vec2(0, 1));
  e.insert("b", vec2(1, 0));
  e.insert("c", normalize_embedding(vec2(0.9, 0.1)));
  const std::vector<LabelledSample> support{{"a", 1}, {"b", 0}, {"c", 0}};
  CHECK(knn_score(support, e, vec2(1, 0), 2) == 0.0);
  CHECK(knn_score(support, e, vec2(1, 0), 3) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(knn_score(support, e, vec2(0, 1), 1) == 1.0);
  CHECK_THROWS_AS(knn_score(support, e, vec2(0, 1), 4), Error);

  // equidistant neighbours: ascending id wins
  EmbeddingSet t(2);
  t.insert("x1", vec2(0, 1));
  t.insert("x0", vec2(0, -1));
  const std::vector<LabelledSample> tied{{"x1", 1}, {"x0", 0}};
  CHECK(knn_score(tied, t, vec2(1, 0), 1) == 0.0);

  FingerprintSet fps{{"a", BinaryFingerprint::from_bits("1100")}, {"b", BinaryFingerprint::from_bits("0011")}};
  CHECK(knn_score({{"a", 1}, {"b", 0}}, fps, BinaryFingerprint::from_bits("1000"), 1) == 1.0);
}
