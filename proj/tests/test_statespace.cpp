#include <gtest/gtest.h>

#include <cmath>

#include "qrng/errors.hpp"
#include "qrng/statespace.hpp"

using namespace qrng;

TEST(BuildSource, ZeroEnergyCollapses) {
  const SourceModel m = build_source(0.0);
  EXPECT_DOUBLE_EQ(m.beta, 1.0);
  for (const auto& s : m.states) {
    EXPECT_NEAR(s(0), 1.0, 1e-15);
    EXPECT_NEAR(s(1), 0.0, 1e-15);
    EXPECT_NEAR(s(2), 0.0, 1e-15);
  }
}

TEST(BuildSource, OperatingPointOverlaps) {
  const SourceModel m = build_source(0.005);
  EXPECT_NEAR(m.beta, 0.99, 1e-15);
  const OverlapReport r = verify_overlaps(m);
  for (double o : r.overlaps) EXPECT_NEAR(o, 0.99, 1e-12);
  EXPECT_TRUE(r.satisfied);
}

TEST(BuildSource, QuarterEnergyInnerProduct) {
  const SourceModel m = build_source(0.25);
  EXPECT_NEAR(m.states[1].dot(m.states[2]), 0.5, 1e-12);
}

TEST(BuildSource, LargeEnergyOverlaps) {
  const OverlapReport r = verify_overlaps(build_source(0.4));
  for (double o : r.overlaps) EXPECT_NEAR(o, 0.2, 1e-12);
}

TEST(BuildSource, RejectsBadParameters) {
  EXPECT_THROW(build_source(-0.01), ParameterError);
  EXPECT_THROW(build_source(0.51), ParameterError);
  EXPECT_THROW(build_source(0.01, {0.5, 0.5, 0.0}), ParameterError);
  EXPECT_THROW(build_source(0.01, {0.5, 0.3, 0.3}), ParameterError);
}

TEST(BuildSource, NormalizationAndEquiOverlapOnGrid) {
  double prev_beta = 2.0;
  for (int i = 0; i < 50; ++i) {
    const double mu = 0.5 * i / 49.0;
    const SourceModel m = build_source(mu);
    for (const auto& s : m.states) EXPECT_NEAR(s.norm(), 1.0, 1e-12) << "mu=" << mu;
    const auto r = verify_overlaps(m);
    EXPECT_NEAR(r.overlaps[0], m.beta, 1e-12);
    EXPECT_NEAR(r.overlaps[1], m.beta, 1e-12);
    EXPECT_NEAR(r.overlaps[2], m.beta, 1e-12);
    EXPECT_LT(m.beta, prev_beta);
    prev_beta = m.beta;
  }
}

TEST(DensityOf, BasisVectors) {
  const DensityMatrix a = density_of(StateVector(1, 0, 0));
  const DensityMatrix b = density_of(StateVector(0, 1, 0));
  Eigen::Matrix3d ea = Eigen::Matrix3d::Zero();
  ea(0, 0) = 1;
  Eigen::Matrix3d eb = Eigen::Matrix3d::Zero();
  eb(1, 1) = 1;
  EXPECT_TRUE(a.entries().isApprox(ea));
  EXPECT_TRUE(b.entries().isApprox(eb));
}

TEST(DensityOf, Idempotent) {
  const SourceModel m = build_source(0.25);
  const DensityMatrix rho = density_of(m.states[1]);
  EXPECT_NEAR(rho.trace(), 1.0, 1e-12);
  EXPECT_LT((rho.entries() * rho.entries() - rho.entries()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((rho.entries() - rho.entries().transpose()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(DensityOf, RejectsUnnormalized) {
  EXPECT_THROW(density_of(StateVector(1, 1, 0)), ParameterError);
}
