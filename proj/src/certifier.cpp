#include "qrng/certifier.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "qrng/errors.hpp"

namespace qrng {

namespace {

// Orthonormal basis of traceless real symmetric 3x3 matrices.
const std::array<Eigen::Matrix3d, 5>& traceless_basis() {
  static const std::array<Eigen::Matrix3d, 5> basis = [] {
    std::array<Eigen::Matrix3d, 5> e;
    for (auto& m : e) m.setZero();
    const double r2 = 1.0 / std::sqrt(2.0);
    const double r6 = 1.0 / std::sqrt(6.0);
    e[0].diagonal() << r2, -r2, 0.0;
    e[1].diagonal() << r6, r6, -2.0 * r6;
    e[2](0, 1) = e[2](1, 0) = r2;
    e[3](0, 2) = e[3](2, 0) = r2;
    e[4](1, 2) = e[4](2, 1) = r2;
    return e;
  }();
  return basis;
}

std::array<Eigen::Matrix3d, kNumInputs> densities(const SourceModel& model) {
  std::array<Eigen::Matrix3d, kNumInputs> rho;
  for (int x = 0; x < kNumInputs; ++x) rho[static_cast<std::size_t>(x)] = model.density(x).entries();
  return rho;
}

// Guessing-probability program in standard form. Blocks 0..d*d-1 hold the
// operators Pi_y^s (block s*d + y). With `slack`, 3*d extra 1x1 blocks turn
// the probability equalities into <= constraints, whose multipliers are
// then sign-restricted: this is the dual with omega <= 0.
struct Formulation {
  sdp::Problem problem;
  int d = 0;
  int prob_rows = 0;  // first 3*d constraints are the probability ones
};

Formulation build_program(const SourceModel& model, const ProbTable& table, bool slack) {
  const int d = table.outcomes();
  const auto rho = densities(model);
  const auto& basis = traceless_basis();

  Formulation f;
  f.d = d;
  auto& p = f.problem;
  p.block_sizes.assign(static_cast<std::size_t>(d * d), kStateDim);
  if (slack) p.block_sizes.insert(p.block_sizes.end(), static_cast<std::size_t>(kNumInputs * d), 1);

  p.objective = sdp::BlockMatrix(p.block_sizes);
  for (int s = 0; s < d; ++s) p.objective.block(s * d + s) = rho[2];

  std::vector<double> rhs;
  for (int x = 0; x < kNumInputs; ++x) {
    for (int y = 0; y < d; ++y) {
      sdp::ConstraintMatrix a;
      for (int s = 0; s < d; ++s) a.add(s * d + y, rho[static_cast<std::size_t>(x)]);
      if (slack) a.add(d * d + x * d + y, Eigen::MatrixXd::Ones(1, 1));
      p.constraints.push_back(std::move(a));
      rhs.push_back(table(x, y));
    }
  }
  f.prob_rows = kNumInputs * d;
  for (int s = 0; s < d; ++s) {
    for (const auto& e : basis) {
      sdp::ConstraintMatrix a;
      for (int y = 0; y < d; ++y) a.add(s * d + y, e);
      p.constraints.push_back(std::move(a));
      rhs.push_back(0.0);
    }
  }
  p.rhs = Eigen::Map<Eigen::VectorXd>(rhs.data(), static_cast<Eigen::Index>(rhs.size()));
  return f;
}

SolverInfo info_from(const sdp::Result& r) {
  return SolverInfo{sdp::to_string(r.status), r.iterations, r.primal_residual, r.dual_residual,
                    r.relative_gap};
}

void check_table(const ProbTable& table) {
  if (table.max_row_error() > 1e-9) throw ParameterError("probability table rows must sum to 1");
}

double max_eigenvalue(const Eigen::Matrix3d& m) {
  const Eigen::Matrix3d sym = 0.5 * (m + m.transpose());
  return Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(sym, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
}

double max_operator_eigenvalue(const DualCertificate& cert, const SourceModel& model) {
  double worst = -std::numeric_limits<double>::infinity();
  const int d = cert.outcomes();
  for (int s = 0; s < d; ++s) {
    for (int y = 0; y < d; ++y) worst = std::max(worst, max_eigenvalue(certificate_operator(cert, model, s, y)));
  }
  return worst;
}

std::string hex_key(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from(const nlohmann::json& j, const char* field) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) {
    throw DataError(std::string("certificate field '") + field + "' must be a nested array");
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw DataError(std::string("certificate field '") + field + "' has ragged rows");
    }
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
  }
  return m;
}

}  // namespace

PrimalSolution solve_primal(const SourceModel& model, const ProbTable& table,
                            const sdp::Options& options) {
  check_table(table);
  const Formulation f = build_program(model, table, /*slack=*/false);
  const sdp::Result r = sdp::solve(f.problem, options);
  if (r.status == sdp::Status::primal_infeasible) {
    throw InfeasibleError("probability table is not reproducible by any admissible strategy");
  }
  if (!r.usable()) {
    throw NumericError("primal program failed: " + sdp::to_string(r.status),
                       std::max({r.primal_residual, r.dual_residual, r.relative_gap}));
  }
  PrimalSolution sol;
  sol.d = f.d;
  sol.solver = info_from(r);
  sol.operators.reserve(static_cast<std::size_t>(f.d * f.d));
  for (int b = 0; b < f.d * f.d; ++b) sol.operators.emplace_back(r.x.block(b));
  sol.pg = r.primal_objective;
  return sol;
}

double asymptotic_min_entropy(double pg, int d) {
  const double ceiling = std::log2(static_cast<double>(d));
  if (!(pg > 0.0)) return ceiling;
  return std::clamp(-std::log2(pg), 0.0, ceiling) + 0.0;
}

double asymptotic_min_entropy(const PrimalSolution& sol) { return asymptotic_min_entropy(sol.pg, sol.d); }

DualCertificate solve_dual(const SourceModel& model, const ProbTable& nominal,
                           const DualOptions& options) {
  check_table(nominal);
  const Formulation f = build_program(model, nominal, options.nonpositive_omega);
  const sdp::Result r = sdp::solve(f.problem, options.solver);
  if (!r.usable()) {
    throw NumericError("dual program failed: " + sdp::to_string(r.status),
                       std::max({r.primal_residual, r.dual_residual, r.relative_gap}));
  }
  const int d = f.d;
  const auto& basis = traceless_basis();

  DualCertificate cert;
  cert.nonpositive = options.nonpositive_omega;
  cert.mu = model.mu;
  cert.solver = info_from(r);
  cert.omega.resize(kNumInputs, d);
  for (int x = 0; x < kNumInputs; ++x) {
    for (int y = 0; y < d; ++y) cert.omega(x, y) = -r.y(x * d + y);
  }
  for (int s = 0; s < d; ++s) {
    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    for (int k = 0; k < 5; ++k) h -= r.y(f.prob_rows + s * 5 + k) * basis[static_cast<std::size_t>(k)];
    cert.h_mats.push_back(h);
  }
  if (cert.nonpositive) {
    // Lowering omega_xy only subtracts rho_x >= 0 from every operator, so
    // clipping round-off positives keeps the certificate feasible.
    cert.omega = cert.omega.cwiseMin(0.0);
  }

  // Push the certificate onto the feasible side: every operator decreases by
  // at least t * lambda_min(sum_x rho_x) when all omega are lowered by t.
  double residual = max_operator_eigenvalue(cert, model);
  if (residual > 0.0) {
    Eigen::Matrix3d total = Eigen::Matrix3d::Zero();
    for (int x = 0; x < kNumInputs; ++x) total += model.density(x).entries();
    const double floor =
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(total, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
    if (floor > 1e-6) {
      cert.omega.array() -= residual / floor * (1.0 + 1e-9) + 1e-15;
      residual = max_operator_eigenvalue(cert, model);
    }
  }
  cert.feasibility_residual = residual;
  cert.objective = -(cert.omega.cwiseProduct(nominal.entries())).sum();
  if (residual > kCertificateTolerance) {
    throw CertificateError("dual certificate violates the operator constraint", residual);
  }
  return cert;
}

Eigen::Matrix3d certificate_operator(const DualCertificate& cert, const SourceModel& model, int s,
                                     int y) {
  Eigen::Matrix3d op = Eigen::Matrix3d::Zero();
  for (int x = 0; x < kNumInputs; ++x) {
    const double weight = ((x == 2 && s == y) ? 1.0 : 0.0) + cert.omega(x, y);
    op += weight * model.density(x).entries();
  }
  const Eigen::Matrix3d& h = cert.h_mats[static_cast<std::size_t>(s)];
  op += h - (h.trace() / 3.0) * Eigen::Matrix3d::Identity();
  return op;
}

ResidualReport verify_certificate(const DualCertificate& cert, const SourceModel& model, double tolerance) {
  ResidualReport report;
  const int d = cert.outcomes();
  if (cert.omega.rows() != kNumInputs || static_cast<int>(cert.h_mats.size()) != d) {
    report.max_eigenvalue = std::numeric_limits<double>::infinity();
    return report;
  }
  report.max_eigenvalue = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < d; ++s) {
    for (int y = 0; y < d; ++y) {
      // Full QR-iteration eigensolver on a dynamic matrix, deliberately not
      // the closed-form 3x3 path.
      const Eigen::MatrixXd op = certificate_operator(cert, model, s, y);
      const Eigen::MatrixXd sym = 0.5 * (op + op.transpose());
      const double top = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sym).eigenvalues().maxCoeff();
      report.pair_max_eigenvalue.push_back(top);
      report.max_eigenvalue = std::max(report.max_eigenvalue, top);
    }
  }
  report.max_omega = cert.omega.maxCoeff();
  if (cert.nonpositive) {
    report.sign_violations = static_cast<int>((cert.omega.array() > 0.0).count());
  }
  report.valid = report.max_eigenvalue <= tolerance && report.sign_violations == 0;
  return report;
}

nlohmann::json to_json(const DualCertificate& cert) {
  nlohmann::json h = nlohmann::json::array();
  for (const auto& m : cert.h_mats) {
    nlohmann::json flat = nlohmann::json::array();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) flat.push_back(m(i, j));
    h.push_back(flat);
  }
  return {
      {"mu", cert.mu},
      {"eta", cert.eta},
      {"d", cert.outcomes()},
      {"nonpositive_omega", cert.nonpositive},
      {"omega", matrix_json(cert.omega)},
      {"h_matrices_row_major", h},
      {"objective", cert.objective},
      {"feasibility_residual", cert.feasibility_residual},
      {"solver",
       {{"status", cert.solver.status},
        {"iterations", cert.solver.iterations},
        {"primal_residual", cert.solver.primal_residual},
        {"dual_residual", cert.solver.dual_residual},
        {"relative_gap", cert.solver.relative_gap}}},
  };
}

DualCertificate certificate_from_json(const nlohmann::json& j) {
  try {
    DualCertificate cert;
    cert.mu = j.at("mu").get<double>();
    cert.eta = j.at("eta").get<double>();
    cert.nonpositive = j.at("nonpositive_omega").get<bool>();
    cert.omega = matrix_from(j.at("omega"), "omega");
    for (const auto& flat : j.at("h_matrices_row_major")) {
      if (flat.size() != 9) throw DataError("certificate field 'h_matrices_row_major' needs 9 entries per matrix");
      Eigen::Matrix3d m;
      for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) m(i, k) = flat[static_cast<std::size_t>(i * 3 + k)].get<double>();
      cert.h_mats.push_back(m);
    }
    cert.objective = j.at("objective").get<double>();
    cert.feasibility_residual = j.at("feasibility_residual").get<double>();
    if (j.contains("solver")) {
      const auto& s = j.at("solver");
      cert.solver.status = s.value("status", "");
      cert.solver.iterations = s.value("iterations", 0);
      cert.solver.primal_residual = s.value("primal_residual", 0.0);
      cert.solver.dual_residual = s.value("dual_residual", 0.0);
      cert.solver.relative_gap = s.value("relative_gap", 0.0);
    }
    if (static_cast<int>(cert.h_mats.size()) != cert.outcomes()) {
      throw DataError("certificate has mismatched omega and H dimensions");
    }
    return cert;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed certificate: ") + e.what());
  }
}

CertificateCache::CertificateCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::filesystem::path CertificateCache::path_for(double mu, double eta, int d) const {
  return dir_ / ("dual_mu" + hex_key(mu) + "_eta" + hex_key(eta) + "_d" + std::to_string(d) + ".json");
}

std::optional<DualCertificate> CertificateCache::load(const SourceModel& model,
                                                      const DetectorParams& det) const {
  const auto path = path_for(model.mu, det.eta, det.d);
  std::ifstream in(path);
  if (!in) return std::nullopt;
  try {
    DualCertificate cert = certificate_from_json(nlohmann::json::parse(in));
    if (!verify_certificate(cert, model).valid) return std::nullopt;
    return cert;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

void CertificateCache::store(const DualCertificate& cert, const DetectorParams& det) const {
  const auto path = path_for(cert.mu, det.eta, det.d);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    out << to_json(cert).dump(2) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

DualCertificate CertificateCache::get_or_solve(const SourceModel& model, const DetectorParams& det,
                                               const DualOptions& options) const {
  if (options.nonpositive_omega) {
    if (auto cached = load(model, det)) return *cached;
  }
  DualCertificate cert = solve_dual(model, quadrant_probabilities(model, det), options);
  cert.eta = det.eta;
  if (options.nonpositive_omega) store(cert, det);
  return cert;
}

}  // namespace qrng
