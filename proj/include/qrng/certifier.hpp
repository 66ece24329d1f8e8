#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "qrng/measurement.hpp"
#include "qrng/sdp_solver.hpp"
#include "qrng/statespace.hpp"

namespace qrng {

struct SolverInfo {
  std::string status;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double relative_gap = 0.0;
};

// Optimal grouped strategy of the adversary: operators[s * d + y] is the
// (subnormalized) POVM element for outcome y in group s.
struct PrimalSolution {
  double pg = 1.0;
  int d = 0;
  std::vector<Eigen::Matrix3d> operators;
  SolverInfo solver;

  const Eigen::Matrix3d& op(int s, int y) const {
    return operators[static_cast<std::size_t>(s * d + y)];
  }
};

// Feasible point of the dual program. Every operator
//   sum_x rho_x (delta_{3,x} delta_{s,y} + omega_xy) + H_s - tr(H_s)/3 I
// is negative semidefinite up to feasibility_residual.
struct DualCertificate {
  Eigen::MatrixXd omega;  // 3 x d
  std::vector<Eigen::Matrix3d> h_mats;
  double objective = 0.0;
  double feasibility_residual = 0.0;
  bool nonpositive = true;  // omega <= 0 was imposed
  double mu = 0.0;
  double eta = 0.0;
  SolverInfo solver;

  int outcomes() const noexcept { return static_cast<int>(omega.cols()); }
};

struct DualOptions {
  // Restrict omega <= 0, as required for the finite-size analysis. With
  // false the program is the plain Lagrange dual of the primal.
  bool nonpositive_omega = true;
  sdp::Options solver;
};

struct ResidualReport {
  double max_eigenvalue = 0.0;
  std::vector<double> pair_max_eigenvalue;  // index s * d + y
  int sign_violations = 0;
  double max_omega = 0.0;
  bool valid = false;
};

inline constexpr double kCertificateTolerance = 1e-8;

PrimalSolution solve_primal(const SourceModel& model, const ProbTable& table,
                            const sdp::Options& options = {});

// -log2 P_g clamped to [0, log2 d].
double asymptotic_min_entropy(const PrimalSolution& sol);
double asymptotic_min_entropy(double pg, int d);

DualCertificate solve_dual(const SourceModel& model, const ProbTable& nominal,
                           const DualOptions& options = {});

// The operator that must be negative semidefinite for group s, outcome y.
Eigen::Matrix3d certificate_operator(const DualCertificate& cert, const SourceModel& model, int s,
                                     int y);

ResidualReport verify_certificate(const DualCertificate& cert, const SourceModel& model,
                                  double tolerance = kCertificateTolerance);

nlohmann::json to_json(const DualCertificate& cert);
DualCertificate certificate_from_json(const nlohmann::json& j);

// On-disk store of dual certificates keyed by (mu, eta, d). Loaded
// certificates are re-verified before being returned.
class CertificateCache {
 public:
  explicit CertificateCache(std::filesystem::path dir);

  std::optional<DualCertificate> load(const SourceModel& model, const DetectorParams& det) const;
  void store(const DualCertificate& cert, const DetectorParams& det) const;

  // Load, or solve from the nominal table and store.
  DualCertificate get_or_solve(const SourceModel& model, const DetectorParams& det,
                               const DualOptions& options = {}) const;

  std::filesystem::path path_for(double mu, double eta, int d) const;

 private:
  std::filesystem::path dir_;
};

}  // namespace qrng
