#include "qrng/sdp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qrng/errors.hpp"

namespace qrng::sdp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int svec_length(const std::vector<int>& sizes) {
  int n = 0;
  for (int s : sizes) n += s * (s + 1) / 2;
  return n;
}

// Isometric vectorization of one constraint (off-diagonals scaled by sqrt 2).
Eigen::VectorXd svec(const ConstraintMatrix& a, const std::vector<int>& sizes) {
  std::vector<int> offset(sizes.size(), 0);
  for (std::size_t b = 1; b < sizes.size(); ++b) {
    offset[b] = offset[b - 1] + sizes[b - 1] * (sizes[b - 1] + 1) / 2;
  }
  Eigen::VectorXd v = Eigen::VectorXd::Zero(svec_length(sizes));
  for (const auto& [b, m] : a.parts) {
    int k = offset[static_cast<std::size_t>(b)];
    for (int j = 0; j < m.cols(); ++j) {
      for (int i = j; i < m.rows(); ++i) {
        v(k++) += (i == j) ? m(i, j) : std::sqrt(2.0) * m(i, j);
      }
    }
  }
  return v;
}

// Largest alpha with M + alpha dM psd, given the Cholesky factor of M.
double max_step(const BlockMatrix& m, const BlockMatrix& dm) {
  double alpha = kInf;
  for (int b = 0; b < m.num_blocks(); ++b) {
    const auto& mb = m.block(b);
    const auto& db = dm.block(b);
    if (mb.rows() == 1) {
      if (db(0, 0) < 0.0) alpha = std::min(alpha, -mb(0, 0) / db(0, 0));
      continue;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(mb);
    if (llt.info() != Eigen::Success) return 0.0;
    Eigen::MatrixXd l_inv = llt.matrixL().solve(Eigen::MatrixXd::Identity(mb.rows(), mb.cols()));
    Eigen::MatrixXd scaled = l_inv * db * l_inv.transpose();
    scaled = 0.5 * (scaled + scaled.transpose());
    const double lambda = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(scaled, Eigen::EigenvaluesOnly)
                              .eigenvalues()
                              .minCoeff();
    if (lambda < 0.0) alpha = std::min(alpha, -1.0 / lambda);
  }
  return alpha;
}

struct ReducedProblem {
  Problem problem;
  std::vector<int> kept;
  std::vector<int> dropped;
};

// Removes linearly dependent constraints. Throws InfeasibleError when a
// dependent right-hand side disagrees with the independent ones.
ReducedProblem remove_dependent(const Problem& p) {
  const int m = static_cast<int>(p.constraints.size());
  const int n = svec_length(p.block_sizes);
  Eigen::MatrixXd a(n, m);
  for (int i = 0; i < m; ++i) a.col(i) = svec(p.constraints[static_cast<std::size_t>(i)], p.block_sizes);

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-11);
  const int rank = static_cast<int>(qr.rank());

  ReducedProblem out;
  const auto& perm = qr.colsPermutation().indices();
  for (int k = 0; k < m; ++k) {
    (k < rank ? out.kept : out.dropped).push_back(perm(k));
  }
  std::sort(out.kept.begin(), out.kept.end());
  std::sort(out.dropped.begin(), out.dropped.end());

  if (!out.dropped.empty()) {
    Eigen::MatrixXd basis(n, rank);
    Eigen::VectorXd b_kept(rank);
    for (int k = 0; k < rank; ++k) {
      basis.col(k) = a.col(out.kept[static_cast<std::size_t>(k)]);
      b_kept(k) = p.rhs(out.kept[static_cast<std::size_t>(k)]);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> basis_qr(basis);
    for (int j : out.dropped) {
      const Eigen::VectorXd coeff = basis_qr.solve(a.col(j));
      const double mismatch = std::abs(coeff.dot(b_kept) - p.rhs(j));
      if (mismatch > 1e-8 * (1.0 + std::abs(p.rhs(j)))) {
        throw InfeasibleError("constraint " + std::to_string(j) +
                              " is a combination of others with an inconsistent right-hand side");
      }
    }
  }

  out.problem.block_sizes = p.block_sizes;
  out.problem.objective = p.objective;
  out.problem.rhs.resize(rank);
  for (int k = 0; k < rank; ++k) {
    out.problem.constraints.push_back(p.constraints[static_cast<std::size_t>(out.kept[static_cast<std::size_t>(k)])]);
    out.problem.rhs(k) = p.rhs(out.kept[static_cast<std::size_t>(k)]);
  }
  return out;
}

class Workspace {
 public:
  explicit Workspace(const Problem& p) : p_(p) {
    touching_.resize(p.block_sizes.size());
    for (std::size_t i = 0; i < p.constraints.size(); ++i) {
      for (std::size_t k = 0; k < p.constraints[i].parts.size(); ++k) {
        touching_[static_cast<std::size_t>(p.constraints[i].parts[k].first)].push_back(
            {static_cast<int>(i), static_cast<int>(k)});
      }
    }
  }

  Eigen::VectorXd apply(const BlockMatrix& x) const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(p_.constraints.size()));
    for (std::size_t i = 0; i < p_.constraints.size(); ++i) out(static_cast<Eigen::Index>(i)) = p_.constraints[i].dot(x);
    return out;
  }

  // <A_i, G> for a general (not necessarily symmetric) block matrix G.
  Eigen::VectorXd apply_general(const std::vector<Eigen::MatrixXd>& g) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p_.constraints.size()));
    for (std::size_t i = 0; i < p_.constraints.size(); ++i) {
      for (const auto& [b, a] : p_.constraints[i].parts) {
        out(static_cast<Eigen::Index>(i)) += (a.cwiseProduct(g[static_cast<std::size_t>(b)].transpose())).sum();
      }
    }
    return out;
  }

  BlockMatrix adjoint(const Eigen::VectorXd& y) const {
    BlockMatrix out(p_.block_sizes);
    for (std::size_t i = 0; i < p_.constraints.size(); ++i) {
      const double yi = y(static_cast<Eigen::Index>(i));
      if (yi == 0.0) continue;
      for (const auto& [b, a] : p_.constraints[i].parts) out.block(b) += yi * a;
    }
    return out;
  }

  // M_ij = sum_b tr(A_i X A_j Z^{-1})
  Eigen::MatrixXd schur(const BlockMatrix& x, const std::vector<Eigen::MatrixXd>& z_inv) const {
    const auto m = static_cast<Eigen::Index>(p_.constraints.size());
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(m, m);
    for (std::size_t b = 0; b < touching_.size(); ++b) {
      const auto& list = touching_[b];
      for (const auto& [j, kj] : list) {
        const auto& aj = p_.constraints[static_cast<std::size_t>(j)].parts[static_cast<std::size_t>(kj)].second;
        const Eigen::MatrixXd w = x.block(static_cast<int>(b)) * aj * z_inv[b];
        for (const auto& [i, ki] : list) {
          const auto& ai = p_.constraints[static_cast<std::size_t>(i)].parts[static_cast<std::size_t>(ki)].second;
          s(i, j) += (ai.cwiseProduct(w.transpose())).sum();
        }
      }
    }
    return 0.5 * (s + s.transpose());
  }

 private:
  const Problem& p_;
  std::vector<std::vector<std::pair<int, int>>> touching_;
};

struct Direction {
  BlockMatrix dx;
  BlockMatrix dz;
  Eigen::VectorXd dy;
};

struct Residuals {
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;
  double pobj = 0.0;
  double dobj = 0.0;
};

}  // namespace

BlockMatrix::BlockMatrix(const std::vector<int>& sizes) {
  blocks_.reserve(sizes.size());
  for (int s : sizes) blocks_.push_back(Eigen::MatrixXd::Zero(s, s));
}

BlockMatrix BlockMatrix::identity(const std::vector<int>& sizes, double scale) {
  BlockMatrix out(sizes);
  for (int b = 0; b < out.num_blocks(); ++b) out.block(b).diagonal().setConstant(scale);
  return out;
}

double BlockMatrix::dot(const BlockMatrix& other) const {
  double s = 0.0;
  for (std::size_t b = 0; b < blocks_.size(); ++b) s += blocks_[b].cwiseProduct(other.blocks_[b]).sum();
  return s;
}

double BlockMatrix::norm() const { return std::sqrt(dot(*this)); }

BlockMatrix& BlockMatrix::operator+=(const BlockMatrix& other) { return axpy(1.0, other); }

BlockMatrix& BlockMatrix::axpy(double alpha, const BlockMatrix& other) {
  for (std::size_t b = 0; b < blocks_.size(); ++b) blocks_[b] += alpha * other.blocks_[b];
  return *this;
}

double ConstraintMatrix::dot(const BlockMatrix& x) const {
  double s = 0.0;
  for (const auto& [b, m] : parts) s += m.cwiseProduct(x.block(b)).sum();
  return s;
}

double ConstraintMatrix::norm() const {
  double s = 0.0;
  for (const auto& [b, m] : parts) s += m.squaredNorm();
  return std::sqrt(s);
}

std::string to_string(Status s) {
  switch (s) {
    case Status::optimal: return "optimal";
    case Status::inaccurate: return "inaccurate";
    case Status::primal_infeasible: return "primal_infeasible";
    case Status::iteration_limit: return "iteration_limit";
    case Status::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

double min_eigenvalue(const BlockMatrix& m) {
  double lo = kInf;
  for (int b = 0; b < m.num_blocks(); ++b) {
    const Eigen::MatrixXd sym = 0.5 * (m.block(b) + m.block(b).transpose());
    lo = std::min(lo, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sym, Eigen::EigenvaluesOnly)
                          .eigenvalues()
                          .minCoeff());
  }
  return lo;
}

Result solve(const Problem& input, const Options& options) {
  if (input.constraints.size() != static_cast<std::size_t>(input.rhs.size())) {
    throw ParameterError("constraint count does not match right-hand side length");
  }
  Result result;
  ReducedProblem reduced;
  try {
    reduced = remove_dependent(input);
  } catch (const InfeasibleError&) {
    result.status = Status::primal_infeasible;
    return result;
  }
  const Problem& p = reduced.problem;
  result.dropped_constraints = reduced.dropped;

  const Workspace ws(p);
  const auto& sizes = p.block_sizes;
  const auto m = static_cast<Eigen::Index>(p.constraints.size());
  double dim = 0.0;
  for (int s : sizes) dim += s;

  const double b_norm = p.rhs.norm();
  const double c_norm = p.objective.norm();

  // Starting point in the spirit of SDPT3's default.
  double xi = std::max(10.0, std::sqrt(dim));
  double zeta = std::max({10.0, std::sqrt(dim), c_norm});
  for (std::size_t i = 0; i < p.constraints.size(); ++i) {
    const double an = p.constraints[i].norm();
    xi = std::max(xi, std::sqrt(dim) * (1.0 + std::abs(p.rhs(static_cast<Eigen::Index>(i)))) / (1.0 + an));
    zeta = std::max(zeta, an);
  }
  BlockMatrix x = BlockMatrix::identity(sizes, xi);
  BlockMatrix z = BlockMatrix::identity(sizes, zeta);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(m);

  auto residuals = [&](const BlockMatrix& xx, const BlockMatrix& zz, const Eigen::VectorXd& yy) {
    Residuals r;
    r.pobj = p.objective.dot(xx);
    r.dobj = p.rhs.dot(yy);
    r.primal = (p.rhs - ws.apply(xx)).norm() / (1.0 + b_norm);
    BlockMatrix rd = p.objective;
    rd += zz;
    rd.axpy(-1.0, ws.adjoint(yy));
    r.dual = rd.norm() / (1.0 + c_norm);
    r.gap = std::abs(r.pobj - r.dobj) / (1.0 + std::abs(r.pobj) + std::abs(r.dobj));
    return r;
  };

  auto score = [](const Residuals& r) { return std::max({r.primal, r.dual, r.gap}); };

  BlockMatrix best_x = x, best_z = z;
  Eigen::VectorXd best_y = y;
  Residuals best = residuals(x, z, y);
  Status status = Status::iteration_limit;
  int iter = 0;

  for (; iter < options.max_iterations; ++iter) {
    const Residuals r = residuals(x, z, y);
    if (score(r) < score(best)) {
      best = r;
      best_x = x;
      best_z = z;
      best_y = y;
    }
    if (r.primal < options.feasibility_tolerance && r.dual < options.feasibility_tolerance &&
        r.gap < options.gap_tolerance) {
      status = Status::optimal;
      break;
    }

    // Farkas test: A*(y) psd with b'y < 0 proves the primal is infeasible.
    const double y_norm = y.norm();
    if (y_norm > 1e6) {
      const Eigen::VectorXd y_hat = y / y_norm;
      if (p.rhs.dot(y_hat) < -1e-7 && min_eigenvalue(ws.adjoint(y_hat)) > -1e-7) {
        status = Status::primal_infeasible;
        break;
      }
    }
    if (y_norm > 1e14 || x.norm() > 1e14) {
      status = Status::numerical_failure;
      break;
    }

    std::vector<Eigen::MatrixXd> z_inv(sizes.size());
    bool factor_ok = true;
    for (std::size_t b = 0; b < sizes.size(); ++b) {
      Eigen::LLT<Eigen::MatrixXd> llt(z.block(static_cast<int>(b)));
      if (llt.info() != Eigen::Success) {
        factor_ok = false;
        break;
      }
      z_inv[b] = llt.solve(Eigen::MatrixXd::Identity(sizes[b], sizes[b]));
    }
    if (!factor_ok) {
      status = Status::numerical_failure;
      break;
    }

    const double mu = x.dot(z) / dim;
    BlockMatrix rd = p.objective;
    rd += z;
    rd.axpy(-1.0, ws.adjoint(y));

    Eigen::MatrixXd schur = ws.schur(x, z_inv);
    Eigen::LLT<Eigen::MatrixXd> schur_llt(schur);
    Eigen::LDLT<Eigen::MatrixXd> schur_ldlt;
    const bool use_llt = schur_llt.info() == Eigen::Success;
    if (!use_llt) schur_ldlt.compute(schur);

    // Solves for the direction with centering target sigma*mu and an
    // optional second-order correction term dXa*dZa.
    auto direction = [&](double sigma_mu, const Direction* corrector) {
      std::vector<Eigen::MatrixXd> g(sizes.size());
      std::vector<Eigen::MatrixXd> centre(sizes.size());
      for (std::size_t b = 0; b < sizes.size(); ++b) {
        const auto bi = static_cast<int>(b);
        Eigen::MatrixXd target = sigma_mu * Eigen::MatrixXd::Identity(sizes[b], sizes[b]);
        if (corrector) target -= corrector->dx.block(bi) * corrector->dz.block(bi);
        centre[b] = target * z_inv[b];
        g[b] = centre[b] + x.block(bi) * rd.block(bi) * z_inv[b];
      }
      const Eigen::VectorXd rhs = ws.apply_general(g) - p.rhs;
      Direction d;
      d.dy = use_llt ? Eigen::VectorXd(schur_llt.solve(rhs)) : Eigen::VectorXd(schur_ldlt.solve(rhs));
      d.dz = ws.adjoint(d.dy);
      d.dz.axpy(-1.0, rd);
      d.dx = BlockMatrix(sizes);
      for (std::size_t b = 0; b < sizes.size(); ++b) {
        const auto bi = static_cast<int>(b);
        Eigen::MatrixXd dxb = centre[b] - x.block(bi) - x.block(bi) * d.dz.block(bi) * z_inv[b];
        d.dx.block(bi) = 0.5 * (dxb + dxb.transpose());
      }
      return d;
    };

    const Direction predictor = direction(0.0, nullptr);
    const double ap = std::min(1.0, max_step(x, predictor.dx));
    const double ad = std::min(1.0, max_step(z, predictor.dz));
    BlockMatrix x_aff = x;
    x_aff.axpy(ap, predictor.dx);
    BlockMatrix z_aff = z;
    z_aff.axpy(ad, predictor.dz);
    const double mu_aff = x_aff.dot(z_aff) / dim;
    double sigma = std::pow(std::max(0.0, mu_aff) / mu, 3.0);
    sigma = std::clamp(sigma, 0.0, 1.0);

    const Direction step = direction(sigma * mu, &predictor);
    const double gamma = options.step_fraction;
    const double alpha_p = std::min(1.0, gamma * max_step(x, step.dx));
    const double alpha_d = std::min(1.0, gamma * max_step(z, step.dz));
    if (alpha_p < 1e-12 && alpha_d < 1e-12) {
      status = Status::numerical_failure;
      break;
    }
    x.axpy(alpha_p, step.dx);
    z.axpy(alpha_d, step.dz);
    y += alpha_d * step.dy;
  }

  if (status != Status::optimal && status != Status::primal_infeasible) {
    x = best_x;
    z = best_z;
    y = best_y;
    if (score(best) < options.acceptable_tolerance) status = Status::inaccurate;
  }

  const Residuals fin = residuals(x, z, y);
  result.status = status;
  result.iterations = iter;
  result.primal_objective = fin.pobj;
  result.dual_objective = fin.dobj;
  result.primal_residual = fin.primal;
  result.dual_residual = fin.dual;
  result.relative_gap = fin.gap;
  result.x = std::move(x);
  result.z = std::move(z);
  result.y = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(input.constraints.size()));
  for (std::size_t k = 0; k < reduced.kept.size(); ++k) {
    result.y(reduced.kept[k]) = y(static_cast<Eigen::Index>(k));
  }
  return result;
}

}  // namespace qrng::sdp
