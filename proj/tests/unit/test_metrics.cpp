#include <cmath>

#include "doctest.h"
#include "diagan/datasets.hpp"
#include "diagan/errors.hpp"
#include "diagan/metrics.hpp"
#include "oracles.hpp"

using namespace diagan;

namespace {

Matrix gaussian_set(Eigen::Index n, RngStream& rng, double sx = 1.0, double sy = 1.0, double mx = 0.0, double my = 0.0) {
  Matrix m(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) m(i, 0) = mx + sx * rng.normal(), m(i, 1) = my + sy * rng.normal();
  return m;
}

Matrix points(std::initializer_list<std::pair<double, double>> pts) {
  Matrix m(static_cast<Eigen::Index>(pts.size()), 2);
  Eigen::Index i = 0;
  for (auto [x, y] : pts) m(i, 0) = x, m(i, 1) = y, ++i;
  return m;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("k-NN thresholds by hand") {
    CHECK(knn_thresholds(points({{0, 0}, {1, 0}, {3, 0}}), 1) == std::vector<double>{1.0, 1.0, 2.0});
    const auto dup = knn_thresholds(points({{0.5, 0.5}, {0.5, 0.5}, {4, 4}}), 1);
    CHECK(dup[0] == 0.0);
    CHECK(dup[1] == 0.0);
    CHECK(knn_threshold(points({{0, 0}, {1, 0}, {3, 0}}), 2, 2) == 3.0);
    CHECK_THROWS_AS(knn_thresholds(points({{0, 0}, {1, 0}}), 2), ParameterError);
  }

  TEST_CASE("k-NN thresholds match the pairwise-sort oracle") {
    RngStream r(1, StreamId::test);
    for (int k : {1, 3, 5}) {
      for (Eigen::Index n : {50, 200, 500}) {
        const Matrix set = gaussian_set(n, r);
        const auto fast = knn_thresholds(set, k);
        const auto ref = oracle::knn_thresholds(set, k);
        for (std::size_t i = 0; i < ref.size(); ++i) {
          CHECK(fast[i] == doctest::Approx(ref[i]).epsilon(1e-14));
          CHECK(knn_threshold(set, i, k) == doctest::Approx(ref[i]).epsilon(1e-14));
        }
      }
    }
  }

  TEST_CASE("manifold membership") {
    RngStream r(2, StreamId::test);
    const Matrix set = gaussian_set(100, r);
    const KnnManifold m(set, 3);
    for (Eigen::Index i = 0; i < set.rows(); ++i) CHECK(m.contains(set.row(i)));
    const double diameter = 2.0 * set.cwiseAbs().maxCoeff() * std::sqrt(2.0);
    Eigen::RowVectorXd far(2);
    far << 100.0 * diameter, -100.0 * diameter;
    CHECK_FALSE(m.contains(far));
    CHECK_FALSE(manifold_membership(far, set, 3));
  }

  TEST_CASE("coverage equals the exhaustive double loop") {
    RngStream r(3, StreamId::test);
    for (int trial = 0; trial < 6; ++trial) {
      const Matrix a = gaussian_set(300 + trial * 30, r, 1.0, 0.5);
      const Matrix b = gaussian_set(250 + trial * 40, r, 0.8, 1.2, 0.3, -0.2);
      for (int k : {1, 3}) {
        CHECK(precision(b, a, k) == oracle::coverage(b, a, k));
        CHECK(recall(a, b, k) == oracle::coverage(a, b, k));
        const auto radii = oracle::knn_thresholds(b, k);
        for (Eigen::Index i = 0; i < a.rows(); ++i) CHECK(KnnManifold(b, k).contains(a.row(i)) == oracle::covered(a.row(i), b, radii));
      }
    }
  }

  TEST_CASE("precision and recall identities") {
    RngStream r(4, StreamId::test);
    const Matrix real = gaussian_set(400, r), gen = gaussian_set(300, r, 1.5, 0.7);
    CHECK(precision(real, real) == 1.0);
    CHECK(recall(real, real) == 1.0);
    // Both measure coverage of the first set by the manifold of the second.
    CHECK(precision(gen, real) == recall(gen, real));
    CHECK(precision(real, gen) == recall(real, gen));
    Matrix far = gen;
    far.col(0).array() += 1e4;
    CHECK(recall(real, far) == 0.0);
    CHECK(partial_recall(real, gen) == recall(real, gen));

    // Count-weighted partial recalls over a partition add up to recall.
    std::vector<Eigen::Index> left, right;
    for (Eigen::Index i = 0; i < real.rows(); ++i) (real(i, 0) < 0 ? left : right).push_back(i);
    const Matrix l = real(left, Eigen::all), rt = real(right, Eigen::all);
    const double combined = (partial_recall(l, gen) * static_cast<double>(l.rows()) + partial_recall(rt, gen) * static_cast<double>(rt.rows())) /
                            static_cast<double>(real.rows());
    CHECK(combined == doctest::Approx(recall(real, gen)).epsilon(1e-14));
    CHECK_THROWS_AS(partial_recall(Matrix(0, 2), gen), ParameterError);
  }

  TEST_CASE("high-quality counting") {
    const auto spec = GaussianMixtureSpec::twenty_five();
    Matrix s(2, 2);
    s.row(0) = spec.centers[3].transpose();
    s.row(1) = (spec.centers[3] + Eigen::Vector2d(0.1, 0.0)).transpose();
    const ModeCoverageReport rep = high_quality_counts(s, spec);
    CHECK(rep.counts[3] == 1);
    CHECK(rep.high_quality_total() == 1);
    CHECK(rep.modes_dropped(1) == 24);
    CHECK(rep.modes_covered(1) == 1);

    // 4-sigma disc of a 2-D Gaussian holds 1 - e^{-8} of the mass.
    const LabeledDataset d = gen_25_gaussians(10000, 11);
    const double frac = static_cast<double>(high_quality_counts(d.points, spec).high_quality_total()) / 10000.0;
    CHECK(frac == doctest::Approx(1.0 - std::exp(-8.0)).epsilon(0.001));
    CHECK(frac >= 0.999);
  }

  TEST_CASE("high-quality radius scales with the data") {
    GaussianMixtureSpec s = GaussianMixtureSpec::twenty_five();
    const double base = s.high_quality_radius();
    s.component_std *= 3.0;
    CHECK(s.high_quality_radius() == doctest::Approx(3.0 * base));
  }

  TEST_CASE("per-dimension distance") {
    Eigen::RowVectorXd a(2), b(2);
    a << 0, 0;
    b << 3, 4;
    CHECK(per_dimension_distance(a, b) == 2.5);
  }

  TEST_CASE("reconstruction error separates near from far") {
    RngStream r(5, StreamId::test);
    const Matrix gen = gaussian_set(2000, r, 0.5, 0.5);
    AutoencoderConfig cfg;
    cfg.epochs = 40;
    cfg.seed = 5;
    const ReconstructionModel ae(gen, cfg);
    const Matrix near = gaussian_set(200, r, 0.5, 0.5);
    Matrix far = near;
    far.array() += 10.0 * 4.0;  // ten diameters away
    CHECK(ae.score(far) > ae.score(near));
    CHECK(std::isfinite(ae.final_training_loss()));
    CHECK_THROWS_AS(ReconstructionModel(gaussian_set(10, r), AutoencoderConfig{}), ParameterError);
  }

  TEST_CASE("one-point autoencoder memorizes its data") {
    Matrix one(1, 2);
    one << 0.3, -0.2;
    AutoencoderConfig cfg;
    cfg.min_training_samples = 1;
    cfg.batch_size = 1;
    cfg.epochs = 3000;
    CHECK(re_score(one, one, cfg) < 1e-3);
  }

  TEST_CASE("Frechet distance") {
    RngStream r(6, StreamId::test);
    const Matrix a = gaussian_set(500, r, 1.0, 0.3);
    CHECK(std::abs(frechet_distance(a, a).distance) < 1e-12);
    const Matrix b = gaussian_set(700, r, 0.6, 1.4, 0.5, 1.0);
    CHECK(std::abs(frechet_distance(a, b).distance - frechet_distance(b, a).distance) < 1e-9);
    CHECK(frechet_distance(a, b).distance == doctest::Approx(oracle::frechet(a, b)).epsilon(1e-9));
    CHECK(frechet_distance_eigen(a, b).distance == doctest::Approx(frechet_distance(a, b).distance).epsilon(1e-9));
    CHECK_FALSE(frechet_distance(a, b).regularized);

    const Matrix u0 = gaussian_set(200000, r), u1 = gaussian_set(200000, r, 1.0, 1.0, 1.0, 0.0);
    CHECK(std::abs(frechet_distance(u0, u1).distance - 1.0) < 0.02);
  }

  TEST_CASE("Frechet distance on a degenerate set") {
    Matrix line(50, 2);
    for (Eigen::Index i = 0; i < 50; ++i) line(i, 0) = static_cast<double>(i), line(i, 1) = 2.0 * static_cast<double>(i);
    RngStream r(7, StreamId::test);
    const Matrix g = gaussian_set(100, r);
    const FrechetResult res = frechet_distance(line, g);
    CHECK(res.regularized);
    CHECK(std::isfinite(res.distance));
    CHECK(res.distance == doctest::Approx(frechet_distance_eigen(line, g).distance).epsilon(1e-6));
  }
}
