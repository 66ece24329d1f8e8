#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "qrng/errors.hpp"
#include "qrng/measurement.hpp"

using namespace qrng;

TEST(QuadrantProbabilities, VacuumIsUniform) {
  const ProbTable t = quadrant_probabilities(build_source(0.0), {0.232, 4});
  for (int x = 0; x < 3; ++x)
    for (int y = 0; y < 4; ++y) EXPECT_NEAR(t(x, y), 0.25, 1e-12);
  const ProbTable u = quadrant_probabilities(build_source(0.3), {0.0, 4});
  for (int x = 0; x < 3; ++x)
    for (int y = 0; y < 4; ++y) EXPECT_NEAR(u(x, y), 0.25, 1e-12);
}

TEST(QuadrantProbabilities, OperatingPointMatchesOracles) {
  const ProbTable t = quadrant_probabilities(build_source(0.005), {0.232, 4});
  const auto brute = oracle::husimi_quadrants(0.005, 0.232);
  for (int x = 0; x < 3; ++x) {
    for (int y = 0; y < 4; ++y) {
      EXPECT_NEAR(t(x, y), brute[static_cast<std::size_t>(x * 4 + y)], 1e-9);
      EXPECT_NEAR(t(x, y), oracle::kOperatingTable[x][y], 1e-8);
    }
  }
  EXPECT_NEAR(t(2, 0), t(2, 3), 1e-10);
  EXPECT_NEAR(t(2, 1), t(2, 2), 1e-10);
}

TEST(QuadrantProbabilities, NormalizationAndSymmetryOnGrid) {
  for (double mu : {0.0005, 0.005, 0.05, 0.2, 0.5}) {
    for (double eta : {0.05, 0.232, 0.5, 1.0}) {
      const ProbTable t = quadrant_probabilities(build_source(mu), {eta, 4});
      EXPECT_LT(t.max_row_error(), 1e-9);
      for (int y = 0; y < 4; ++y) EXPECT_NEAR(t(0, y), t(1, 3 - y), 1e-10) << mu << ' ' << eta;
      EXPECT_NEAR(t(2, 0), t(2, 3), 1e-10);
      EXPECT_NEAR(t(2, 1), t(2, 2), 1e-10);
    }
  }
}

TEST(QuadrantProbabilities, FinerBinningNormalizes) {
  const ProbTable t = quadrant_probabilities(build_source(0.1), {0.5, 8});
  EXPECT_EQ(t.outcomes(), 8);
  EXPECT_LT(t.max_row_error(), 1e-9);
}

TEST(SampleHeterodyne, VacuumMeanIsZero) {
  const SourceModel m = build_source(0.0);
  CounterRng rng(3, 1);
  const int n = 1000000;
  double sx = 0, sp = 0;
  for (int i = 0; i < n; ++i) {
    const auto s = sample_heterodyne(m, {0.232, 4}, 1, 0.0, rng);
    sx += s.x;
    sp += s.p;
  }
  const double tol = 4.0 * std::sqrt(0.5 / n);
  EXPECT_LT(std::abs(sx / n), tol);
  EXPECT_LT(std::abs(sp / n), tol);
}

TEST(SampleHeterodyne, MeanAndVariance) {
  const SourceModel m = build_source(0.005);
  CounterRng rng(4, 1);
  const int n = 10000000;
  double sx = 0, sxx = 0, sp = 0, spp = 0;
  for (int i = 0; i < n; ++i) {
    const auto s = sample_heterodyne(m, {0.232, 4}, 3, 0.0, rng);
    sx += s.x;
    sxx += s.x * s.x;
    sp += s.p;
    spp += s.p * s.p;
  }
  const double mx = sx / n, mp = sp / n;
  EXPECT_NEAR(mx, std::sqrt(0.232 * 0.005), 4.0 * std::sqrt(0.5 / n));
  EXPECT_NEAR(std::sqrt(0.00116), 0.03406, 1e-5);
  EXPECT_NEAR(sxx / n - mx * mx, 0.5, 0.002);
  EXPECT_NEAR(spp / n - mp * mp, 0.5, 0.002);
}

TEST(SampleHeterodyne, RejectsBadInput) {
  CounterRng rng(1);
  EXPECT_THROW(sample_heterodyne(build_source(0.1), {0.5, 4}, 0, 0.0, rng), ParameterError);
  EXPECT_THROW(sample_heterodyne(build_source(0.1), {0.5, 4}, 4, 0.0, rng), ParameterError);
}

TEST(Discretize, Examples) {
  EXPECT_EQ(discretize({1.0, 0.5}), 1);
  EXPECT_EQ(discretize({-1.0, 0.1}), 2);
  EXPECT_EQ(discretize({0.0, -1.0}), 4);
  EXPECT_EQ(discretize({0.0, 0.0}), 1);
  EXPECT_EQ(discretize({1.0, 0.0}), 1);
  EXPECT_EQ(discretize({0.0, 1.0}), 2);
  EXPECT_EQ(discretize({-1.0, 0.0}), 3);
  EXPECT_EQ(discretize({-1.0, -1.0}), 3);
}

TEST(Discretize, GeneralBinningAgreesWithQuadrants) {
  CounterRng rng(9);
  std::normal_distribution<double> g;
  for (int i = 0; i < 10000; ++i) {
    const QuadratureSample s{g(rng), g(rng)};
    const int y8 = discretize(s, 8);
    EXPECT_EQ((y8 + 1) / 2, discretize(s, 4));
  }
}

TEST(Discretize, HistogramMatchesQuadrature) {
  const SourceModel m = build_source(0.05);
  const DetectorParams det{0.5, 4};
  const ProbTable t = quadrant_probabilities(m, det);
  CounterRng rng(17, 2);
  const int per_input = 3400000;
  for (int x = 1; x <= 3; ++x) {
    std::array<double, 4> hist{};
    for (int i = 0; i < per_input; ++i) hist[discretize(sample_heterodyne(m, det, x, 0.0, rng)) - 1] += 1;
    for (int y = 0; y < 4; ++y) {
      const double p = t(x - 1, y);
      const double sigma = std::sqrt(per_input * p * (1 - p));
      EXPECT_LT(std::abs(hist[y] - per_input * p), 5 * sigma) << "x=" << x << " y=" << y + 1;
    }
  }
}

TEST(ProbTable, CsvRoundTrip) {
  const ProbTable t = quadrant_probabilities(build_source(0.005), {0.232, 4});
  std::stringstream ss;
  t.write_csv(ss);
  const ProbTable u = ProbTable::read_csv(ss);
  EXPECT_EQ((t.entries() - u.entries()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(ProbTable, RejectsMalformed) {
  std::stringstream bad("0.5,0.5\n0.5,abc\n0.5,0.5\n");
  EXPECT_THROW(ProbTable::read_csv(bad), DataError);
  std::stringstream rows("0.5,0.5\n0.5,0.5\n");
  EXPECT_THROW(ProbTable::read_csv(rows), DataError);
  EXPECT_THROW(ProbTable(Eigen::MatrixXd::Constant(3, 2, -0.1)), ParameterError);
}

TEST(DetectorParams, Validation) {
  EXPECT_NO_THROW((DetectorParams{0.0, 4}.validate()));
  EXPECT_THROW((DetectorParams{1.2, 4}.validate()), ParameterError);
  EXPECT_THROW((DetectorParams{0.5, 1}.validate()), ParameterError);
}
