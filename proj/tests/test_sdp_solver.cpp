#include <gtest/gtest.h>

#include "qrng/sdp_solver.hpp"

using namespace qrng::sdp;

namespace {

Problem trace_one(const Eigen::MatrixXd& c) {
  Problem p;
  p.block_sizes = {static_cast<int>(c.rows())};
  p.objective = BlockMatrix(p.block_sizes);
  p.objective.block(0) = c;
  ConstraintMatrix a;
  a.add(0, Eigen::MatrixXd::Identity(c.rows(), c.cols()));
  p.constraints.push_back(a);
  p.rhs = Eigen::VectorXd::Ones(1);
  return p;
}

}  // namespace

TEST(SdpSolver, LargestEigenvalue) {
  Eigen::MatrixXd c(3, 3);
  c << 2, -1, 0.5, -1, 1, 0.3, 0.5, 0.3, -0.7;
  const Result r = solve(trace_one(c));
  ASSERT_EQ(r.status, Status::optimal);
  const double top = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(c).eigenvalues().maxCoeff();
  EXPECT_NEAR(r.primal_objective, top, 1e-8);
  EXPECT_NEAR(r.dual_objective, top, 1e-8);
  EXPECT_GT(min_eigenvalue(r.x), -1e-9);
  EXPECT_GT(min_eigenvalue(r.z), -1e-9);
}

TEST(SdpSolver, LinearProgramAsScalarBlocks) {
  Problem p;
  p.block_sizes = {1, 1};
  p.objective = BlockMatrix(p.block_sizes);
  p.objective.block(0)(0, 0) = 1.0;
  p.objective.block(1)(0, 0) = 2.0;
  ConstraintMatrix a;
  a.add(0, Eigen::MatrixXd::Ones(1, 1));
  a.add(1, Eigen::MatrixXd::Ones(1, 1));
  p.constraints.push_back(a);
  p.rhs = Eigen::VectorXd::Ones(1);
  const Result r = solve(p);
  ASSERT_TRUE(r.usable());
  EXPECT_NEAR(r.primal_objective, 2.0, 1e-8);
  EXPECT_NEAR(r.x.block(1)(0, 0), 1.0, 1e-7);
}

TEST(SdpSolver, DependentConstraintsArePresolved) {
  Problem p = trace_one(Eigen::MatrixXd::Identity(2, 2) * 3.0);
  p.constraints.push_back(p.constraints[0]);
  p.rhs = Eigen::VectorXd::Ones(2);
  const Result r = solve(p);
  ASSERT_TRUE(r.usable());
  EXPECT_EQ(r.dropped_constraints.size(), 1u);
  EXPECT_NEAR(r.primal_objective, 3.0, 1e-8);
}

TEST(SdpSolver, InconsistentDependentConstraints) {
  Problem p = trace_one(Eigen::MatrixXd::Identity(2, 2));
  p.constraints.push_back(p.constraints[0]);
  p.rhs = Eigen::VectorXd(2);
  p.rhs << 1.0, 2.0;
  EXPECT_EQ(solve(p).status, Status::primal_infeasible);
}

TEST(SdpSolver, FarkasInfeasibility) {
  Problem p = trace_one(Eigen::MatrixXd::Identity(2, 2));
  p.rhs(0) = -1.0;
  EXPECT_EQ(solve(p).status, Status::primal_infeasible);
}

TEST(SdpSolver, BlockMatrixAlgebra) {
  BlockMatrix a = BlockMatrix::identity({2, 1}, 2.0);
  BlockMatrix b = BlockMatrix::identity({2, 1});
  EXPECT_DOUBLE_EQ(a.dot(b), 6.0);
  a.axpy(-2.0, b);
  EXPECT_DOUBLE_EQ(a.norm(), 0.0);
  b += b;
  EXPECT_DOUBLE_EQ(min_eigenvalue(b), 2.0);
}
