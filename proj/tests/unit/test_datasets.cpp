#include <cmath>
#include <limits>

#include "doctest.h"
#include "diagan/datasets.hpp"
#include "diagan/errors.hpp"
#include "diagan/rng.hpp"
#include "test_util.hpp"

using namespace diagan;

TEST_SUITE("datasets") {
  TEST_CASE("single gaussian group rule") {
    CHECK(single_gaussian_group(0.0, 0.0) == Group::major);
    CHECK(single_gaussian_group(2.0, 0.0) == Group::major);
    CHECK(single_gaussian_group(5.0, 5.0) == Group::minor);  // |x| = 7.07
    CHECK(single_gaussian_group(7.0, 0.0) == Group::minor);
    CHECK(single_gaussian_group(3.0, 3.0) == Group::neither);
  }

  TEST_CASE("minor fraction follows the chi-square tail") {
    // P(|x| >= 7) for x ~ N(0, 9 I) is exp(-49 / 18).
    const LabeledDataset d = gen_single_gaussian(3.0, 10000, 42);
    const double expected = std::exp(-49.0 / 18.0);
    const double frac = static_cast<double>(d.indices_of(Group::minor).size()) / 10000.0;
    CHECK(std::abs(frac - expected) <= 0.01);
    const double major_expected = 1.0 - std::exp(-4.0 / 18.0);
    CHECK(std::abs(d.indices_of(Group::major).size() / 10000.0 - major_expected) <= 0.015);
  }

  TEST_CASE("minority levels") {
    CHECK(sigma_for_minority_level(1) == 3.0);
    CHECK(sigma_for_minority_level(2) == 2.5);
    CHECK(sigma_for_minority_level(3) == 2.0);
    CHECK_THROWS_AS(sigma_for_minority_level(4), ParameterError);
  }

  TEST_CASE("labels are a function of coordinates and seeds reproduce") {
    const LabeledDataset a = gen_single_gaussian(2.0, 2000, 5), b = gen_single_gaussian(2.0, 2000, 5);
    CHECK(a.points == b.points);
    CHECK(a.group == b.group);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a.group[i] == single_gaussian_group(a.points(static_cast<Eigen::Index>(i), 0), a.points(static_cast<Eigen::Index>(i), 1)));
    }
    CHECK(gen_single_gaussian(2.0, 2000, 6).points != a.points);
  }

  TEST_CASE("25-gaussian grid geometry") {
    const auto spec = GaussianMixtureSpec::twenty_five();
    REQUIRE(spec.centers.size() == 25);
    // d = (0,0) is the centre mode; d = (4,4) lands on (2/1.414, 2/1.414).
    CHECK(spec.centers[12].norm() == 0.0);
    CHECK(spec.centers[24].x() == 4.0 / 2.828);
    CHECK(spec.centers[24].x() == doctest::Approx(2.0 / 1.414).epsilon(1e-12));
    CHECK(spec.centers[24].x() == doctest::Approx(1.41443).epsilon(1e-5));
    CHECK(spec.component_std == doctest::Approx(0.05 / 2.828));
    CHECK(spec.high_quality_radius() == doctest::Approx(0.070721).epsilon(1e-5));
  }

  TEST_CASE("25-gaussian sampling: 400 per mode and per-axis std") {
    const LabeledDataset d = gen_25_gaussians(10000, 7);
    const auto spec = GaussianMixtureSpec::twenty_five();
    std::vector<int> counts(25, 0);
    for (int m : d.mode_index) counts[static_cast<std::size_t>(m)]++;
    for (int c : counts) CHECK(c == 400);
    for (int m = 0; m < 25; ++m) {
      double sx = 0, sy = 0;
      int n = 0;
      for (std::size_t i = 0; i < d.size(); ++i) {
        if (d.mode_index[i] != m) continue;
        const auto r = static_cast<Eigen::Index>(i);
        sx += std::pow(d.points(r, 0) - spec.centers[static_cast<std::size_t>(m)].x(), 2);
        sy += std::pow(d.points(r, 1) - spec.centers[static_cast<std::size_t>(m)].y(), 2);
        ++n;
      }
      CHECK(std::sqrt(sx / n) == doctest::Approx(0.01768).epsilon(0.2));
      CHECK(std::sqrt(sy / n) == doctest::Approx(0.01768).epsilon(0.2));
    }
    CHECK_THROWS_AS(gen_25_gaussians(10001, 1), ParameterError);
  }

  TEST_CASE("assign_mode agrees with an exhaustive scan") {
    const auto spec = GaussianMixtureSpec::twenty_five();
    CHECK(assign_mode(spec.centers[7], spec) == 7);
    // Midpoint between modes 0 and 1 ties; lowest index wins.
    const Eigen::Vector2d mid = 0.5 * (spec.centers[0] + spec.centers[1]);
    CHECK(assign_mode(mid, spec) == 0);
    RngStream r(3, StreamId::test);
    for (int t = 0; t < 1000; ++t) {
      const Eigen::Vector2d p(3.0 * r.uniform() - 1.5, 3.0 * r.uniform() - 1.5);
      int best = -1;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < spec.centers.size(); ++j) {
        const double dd = (p - spec.centers[j]).squaredNorm();
        if (dd < best_d) best_d = dd, best = static_cast<int>(j);
      }
      CHECK(assign_mode(p, spec) == best);
    }
  }

  TEST_CASE("dataset csv round trip") {
    testutil::TempDir tmp("ds");
    const LabeledDataset d = gen_25_gaussians(250, 9);
    write_dataset_csv(d, tmp / "d.csv");
    const LabeledDataset back = read_dataset_csv(tmp / "d.csv");
    CHECK(back.points == d.points);
    CHECK(back.group == d.group);
    CHECK(back.mode_index == d.mode_index);
  }
}
