#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "qrng/certifier.hpp"
#include "qrng/errors.hpp"

using namespace qrng;

namespace {

ProbTable table_at(double mu, double eta) { return quadrant_probabilities(build_source(mu), {eta, 4}); }

DualOptions lagrange() {
  DualOptions o;
  o.nonpositive_omega = false;
  return o;
}

}  // namespace

TEST(SolvePrimal, IdenticalStatesGiveCertainty) {
  const ProbTable t(Eigen::MatrixXd::Constant(3, 4, 0.25));
  const PrimalSolution s = solve_primal(build_source(0.0), t);
  EXPECT_NEAR(s.pg, 1.0, 1e-7);
  EXPECT_NEAR(asymptotic_min_entropy(s), 0.0, 1e-7);
}

TEST(SolvePrimal, SingleOutcome) {
  const ProbTable t(Eigen::MatrixXd::Ones(3, 1));
  EXPECT_NEAR(solve_primal(build_source(0.01), t).pg, 1.0, 1e-7);
}

TEST(SolvePrimal, OperatingPoint) {
  const SourceModel m = build_source(0.005);
  const ProbTable t = table_at(0.005, 0.232);
  const PrimalSolution s = solve_primal(m, t);
  EXPECT_NEAR(s.pg, oracle::kOperatingPg, 1e-6);
  EXPECT_NEAR(asymptotic_min_entropy(s), oracle::kOperatingHmin, 1e-5);

  // Recover the constraints from the optimizers.
  double objective = 0.0;
  for (int sg = 0; sg < 4; ++sg) {
    Eigen::Matrix3d sum = Eigen::Matrix3d::Zero();
    for (int y = 0; y < 4; ++y) {
      const Eigen::Matrix3d& op = s.op(sg, y);
      EXPECT_GT(Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(op).eigenvalues().minCoeff(), -1e-8);
      sum += op;
    }
    const double scale = sum.trace() / 3.0;
    EXPECT_LT((sum - scale * Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), 1e-8);
    objective += (m.density(2).entries() * s.op(sg, sg)).trace();
  }
  EXPECT_NEAR(objective, s.pg, 1e-8);
  for (int x = 0; x < 3; ++x) {
    for (int y = 0; y < 4; ++y) {
      double p = 0.0;
      for (int sg = 0; sg < 4; ++sg) p += (m.density(x).entries() * s.op(sg, y)).trace();
      EXPECT_NEAR(p, t(x, y), 1e-7);
    }
  }
}

TEST(SolvePrimal, InconsistentTableIsInfeasible) {
  Eigen::MatrixXd e = Eigen::MatrixXd::Constant(3, 4, 0.25);
  e.row(0) << 0.7, 0.1, 0.1, 0.1;
  EXPECT_THROW(solve_primal(build_source(0.0), ProbTable(e)), InfeasibleError);
}

TEST(SolvePrimal, UnnormalizedTableRejected) {
  EXPECT_THROW(solve_primal(build_source(0.01), ProbTable(Eigen::MatrixXd::Constant(3, 4, 0.3))), ParameterError);
}

TEST(AsymptoticMinEntropy, Clamps) {
  EXPECT_DOUBLE_EQ(asymptotic_min_entropy(1.0, 4), 0.0);
  EXPECT_DOUBLE_EQ(asymptotic_min_entropy(0.25, 4), 2.0);
  EXPECT_DOUBLE_EQ(asymptotic_min_entropy(0.1, 4), 2.0);
  EXPECT_DOUBLE_EQ(asymptotic_min_entropy(1.0 + 1e-12, 4), 0.0);
}

TEST(SolveDual, VacuumPoint) {
  const ProbTable t(Eigen::MatrixXd::Constant(3, 4, 0.25));
  const DualCertificate restricted = solve_dual(build_source(0.0), t);
  EXPECT_NEAR(restricted.objective, 1.0, 1e-6);
  const DualCertificate plain = solve_dual(build_source(0.0), t, lagrange());
  EXPECT_NEAR(plain.objective, 1.0, 1e-6);
}

TEST(SolveDual, StrongDualityOfLagrangeDual) {
  const SourceModel m = build_source(0.005);
  const ProbTable t = table_at(0.005, 0.232);
  const double pg = solve_primal(m, t).pg;
  const DualCertificate d = solve_dual(m, t, lagrange());
  EXPECT_NEAR(d.objective, pg, 1e-5);
  EXPECT_TRUE(verify_certificate(d, m).valid);
}

TEST(SolveDual, RestrictedCertificateIsSoundAndVerified) {
  const SourceModel m = build_source(0.005);
  const ProbTable t = table_at(0.005, 0.232);
  const double pg = solve_primal(m, t).pg;
  const DualCertificate d = solve_dual(m, t);
  EXPECT_TRUE(d.nonpositive);
  EXPECT_LE(d.omega.maxCoeff(), 0.0);
  EXPECT_GE(d.objective, pg - 1e-6);
  EXPECT_LE(d.feasibility_residual, 1e-8);
  const ResidualReport r = verify_certificate(d, m);
  EXPECT_TRUE(r.valid);
  EXPECT_EQ(r.pair_max_eigenvalue.size(), 16u);
  EXPECT_LE(r.max_eigenvalue, 1e-8);
  EXPECT_EQ(r.sign_violations, 0);
}

TEST(VerifyCertificate, FlagsPerturbation) {
  const SourceModel m = build_source(0.005);
  DualCertificate d = solve_dual(m, table_at(0.005, 0.232));
  d.omega(1, 2) += 0.1;
  const ResidualReport r = verify_certificate(d, m);
  EXPECT_FALSE(r.valid);
  EXPECT_TRUE(r.max_eigenvalue > 1e-8 || r.sign_violations > 0);
}

TEST(VerifyCertificate, ZeroCertificateIsInfeasible) {
  const SourceModel m = build_source(0.005);
  DualCertificate d;
  d.omega = Eigen::MatrixXd::Zero(3, 4);
  d.h_mats.assign(4, Eigen::Matrix3d::Zero());
  const ResidualReport r = verify_certificate(d, m);
  // The (s, s) operators reduce to rho_3, whose top eigenvalue is 1.
  EXPECT_NEAR(r.max_eigenvalue, 1.0, 1e-12);
  EXPECT_FALSE(r.valid);
}

TEST(Certifier, GuessingProbabilityFallsWithEfficiency) {
  const SourceModel m = build_source(0.005);
  double prev = 1.0 + 1e-12;
  for (double eta : {0.1, 0.2, 0.3, 0.5, 0.7, 0.9}) {
    const double pg = solve_primal(m, table_at(0.005, eta)).pg;
    EXPECT_LE(pg, prev + 1e-8) << eta;
    prev = pg;
  }
}

TEST(Certifier, WeakDualityAcrossPoints) {
  for (double mu : {0.001, 0.01, 0.05}) {
    for (double eta : {0.1, 0.5, 0.9}) {
      const SourceModel m = build_source(mu);
      const ProbTable t = table_at(mu, eta);
      const double pg = solve_primal(m, t).pg;
      const DualCertificate d = solve_dual(m, t);
      EXPECT_GE(d.objective, pg - 1e-6) << mu << ' ' << eta;
      EXPECT_TRUE(verify_certificate(d, m).valid);
    }
  }
}

TEST(CertificateJson, RoundTrip) {
  const SourceModel m = build_source(0.005);
  const DualCertificate d = solve_dual(m, table_at(0.005, 0.232));
  const DualCertificate e = certificate_from_json(nlohmann::json::parse(to_json(d).dump()));
  EXPECT_EQ(e.omega, d.omega);
  for (int s = 0; s < 4; ++s) EXPECT_EQ(e.h_mats[static_cast<std::size_t>(s)], d.h_mats[static_cast<std::size_t>(s)]);
  EXPECT_EQ(e.objective, d.objective);
  EXPECT_THROW(certificate_from_json(nlohmann::json{{"mu", 0.1}}), DataError);
}

TEST(CertificateCache, StoresVerifiesAndRejectsTampering) {
  const auto dir = std::filesystem::temp_directory_path() / "qrng_cache_test";
  std::filesystem::remove_all(dir);
  const CertificateCache cache(dir);
  const SourceModel m = build_source(0.005);
  const DetectorParams det{0.232, 4};
  EXPECT_FALSE(cache.load(m, det).has_value());
  const DualCertificate d = cache.get_or_solve(m, det);
  ASSERT_TRUE(std::filesystem::exists(cache.path_for(0.005, 0.232, 4)));
  const auto loaded = cache.load(m, det);
  ASSERT_TRUE(loaded.has_value());
  EXPECT_EQ(loaded->omega, d.omega);

  auto j = to_json(d);
  j["omega"][0][0] = 0.5;
  std::ofstream(cache.path_for(0.005, 0.232, 4)) << j.dump();
  EXPECT_FALSE(cache.load(m, det).has_value());
  std::filesystem::remove_all(dir);
}
