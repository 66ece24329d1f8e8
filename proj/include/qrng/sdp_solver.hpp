#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace qrng::sdp {

// Block-diagonal symmetric matrix. Linear (nonnegative orthant) variables
// are represented as 1x1 blocks.
class BlockMatrix {
 public:
  BlockMatrix() = default;
  explicit BlockMatrix(const std::vector<int>& sizes);

  static BlockMatrix identity(const std::vector<int>& sizes, double scale = 1.0);

  int num_blocks() const noexcept { return static_cast<int>(blocks_.size()); }
  Eigen::MatrixXd& block(int b) { return blocks_[static_cast<std::size_t>(b)]; }
  const Eigen::MatrixXd& block(int b) const { return blocks_[static_cast<std::size_t>(b)]; }

  double dot(const BlockMatrix& other) const;
  double norm() const;

  BlockMatrix& operator+=(const BlockMatrix& other);
  BlockMatrix& axpy(double alpha, const BlockMatrix& other);

 private:
  std::vector<Eigen::MatrixXd> blocks_;
};

// Sparse-by-block constraint matrix A_i: only the listed blocks are nonzero.
struct ConstraintMatrix {
  std::vector<std::pair<int, Eigen::MatrixXd>> parts;

  void add(int block, const Eigen::MatrixXd& m) { parts.emplace_back(block, m); }
  double dot(const BlockMatrix& x) const;
  double norm() const;
};

// Standard-form pair
//   primal:  maximize <C, X>  s.t. <A_i, X> = b_i,  X psd
//   dual:    minimize b'y     s.t. Z = sum_i y_i A_i - C psd
struct Problem {
  std::vector<int> block_sizes;
  BlockMatrix objective;
  std::vector<ConstraintMatrix> constraints;
  Eigen::VectorXd rhs;
};

enum class Status {
  optimal,            // every target tolerance met
  inaccurate,         // stalled, but within the acceptable tolerance
  primal_infeasible,  // a Farkas certificate for the primal was verified
  iteration_limit,
  numerical_failure,
};

std::string to_string(Status s);

struct Options {
  double gap_tolerance = 1e-9;
  double feasibility_tolerance = 1e-9;
  double acceptable_tolerance = 1e-8;
  int max_iterations = 150;
  double step_fraction = 0.98;
};

struct Result {
  Status status = Status::numerical_failure;
  BlockMatrix x;
  BlockMatrix z;
  Eigen::VectorXd y;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double relative_gap = 0.0;
  int iterations = 0;
  // Constraints removed as linearly dependent on the rest (their y is 0).
  std::vector<int> dropped_constraints;

  bool usable() const { return status == Status::optimal || status == Status::inaccurate; }
};

// Infeasible-start primal-dual interior point method (HKM search direction,
// Mehrotra predictor-corrector). Dense Schur complement: intended for the
// small block problems of this library.
Result solve(const Problem& problem, const Options& options = {});

// Smallest eigenvalue over all blocks.
double min_eigenvalue(const BlockMatrix& m);

}  // namespace qrng::sdp
