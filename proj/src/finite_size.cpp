#include "qrng/finite_size.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>
#include <utility>
#include <vector>

#include "qrng/errors.hpp"

namespace qrng {

namespace {

void check_pt(double p_t) {
  if (!(p_t > 0.0 && p_t < 1.0)) throw ParameterError("p_t must lie strictly between 0 and 1");
}

void check_eps(double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw ParameterError("epsilon must lie strictly between 0 and 1");
}

// (1 - 4a/(3 sqrt N))^2 ln(1/eps) / 2, i.e. b^2 - a^2.
double kato_c(double a, double n_total, double eps) {
  const double k = 1.0 - 4.0 * a / (3.0 * std::sqrt(n_total));
  return k * k * std::log(1.0 / eps) / 2.0;
}

// (b - a, b + a) without cancellation: the small factor is recovered from
// their product c.
std::pair<double, double> kato_sum_diff(double a, double b, double n_total, double eps) {
  const double c = kato_c(a, n_total, eps);
  if (a >= 0.0) {
    const double sum = b + a;
    return {sum > 0.0 ? c / sum : 0.0, sum};
  }
  const double diff = b - a;
  return {diff, c / diff};
}

// Sum_{x,y} omega_xy N_{y|x} / (p_x p_t), always <= 0 for omega <= 0.
double weighted_counts(const Tally& tally, const DualCertificate& cert) {
  if (cert.omega.rows() != kNumInputs || cert.outcomes() != tally.outcomes()) {
    throw ParameterError("certificate and tally disagree on the number of outcomes");
  }
  double total = 0.0;
  for (int x = 0; x < kNumInputs; ++x) {
    const double scale = tally.probs[static_cast<std::size_t>(x)] * tally.p_t;
    for (int y = 0; y < tally.outcomes(); ++y) total += cert.omega(x, y) * tally.counts(x, y) / scale;
  }
  return total;
}

KatoParams make_params(double a, double n_total, double eps, const WBounds& w) {
  KatoParams p;
  p.a = a;
  p.b = kato_b_from_a(a, n_total, eps);
  p.eps = eps;
  p.w_min = w.w_min;
  p.w_max = w.w_max;
  return p;
}

}  // namespace

void Tally::validate() const {
  check_pt(p_t);
  validate_distribution(probs);
  if (!(n_total >= 1.0) || !std::isfinite(n_total)) throw ParameterError("n_total must be >= 1");
  if (counts.rows() != kNumInputs || counts.cols() < 1) throw DataError("counts must have 3 rows");
  if (!counts.allFinite() || (counts.array() < 0.0).any()) throw DataError("counts must be finite and >= 0");
  if (!(n_gen >= 0.0)) throw DataError("n_gen must be >= 0");
  const double total = counts.sum() + n_gen;
  if (std::abs(total - n_total) > 1e-9 * n_total) {
    throw DataError("counts plus generation rounds do not add up to n_total");
  }
}

Tally& Tally::operator+=(const Tally& other) {
  if (counts.size() == 0) counts = Eigen::MatrixXd::Zero(other.counts.rows(), other.counts.cols());
  n_total += other.n_total;
  counts += other.counts;
  n_gen += other.n_gen;
  return *this;
}

Tally nominal_tally(double n_total, double p_t, const InputDistribution& probs, const ProbTable& table) {
  check_pt(p_t);
  validate_distribution(probs);
  Tally t;
  t.n_total = n_total;
  t.p_t = p_t;
  t.probs = probs;
  t.counts.resize(kNumInputs, table.outcomes());
  for (int x = 0; x < kNumInputs; ++x) {
    for (int y = 0; y < table.outcomes(); ++y) {
      t.counts(x, y) = probs[static_cast<std::size_t>(x)] * p_t * n_total * table(x, y);
    }
  }
  t.n_gen = n_total * (1.0 - p_t);
  return t;
}

WBounds w_bounds(const DualCertificate& cert, double p_t, const InputDistribution& probs) {
  check_pt(p_t);
  WBounds w;
  w.w_max = 1.0 / (1.0 - p_t);
  w.w_min = 0.0;
  for (int x = 0; x < cert.omega.rows(); ++x) {
    for (int y = 0; y < cert.omega.cols(); ++y) {
      w.w_min = std::min(w.w_min, cert.omega(x, y) / (p_t * probs[static_cast<std::size_t>(x)]));
    }
  }
  return w;
}

double kato_b_from_a(double a, double n_total, double eps) {
  check_eps(eps);
  if (!(std::sqrt(n_total) - 2.0 * a > 0.0)) throw ParameterError("Kato parameters need sqrt(N) - 2a > 0");
  const double arg = a * a + kato_c(a, n_total, eps);
  if (!(arg >= 0.0)) throw ParameterError("Kato b has no real solution");
  return std::sqrt(arg);
}

double kato_identity_error(double a, double b, double n_total, double eps) {
  const long double la = a, lb = b;
  const long double k = 1.0L - 4.0L * la / (3.0L * std::sqrt(static_cast<long double>(n_total)));
  const long double value = std::exp(-2.0L * (lb * lb - la * la) / (k * k));
  return static_cast<double>(std::abs(value / static_cast<long double>(eps) - 1.0L));
}

double delta_term(double n_total, const KatoParams& params) {
  const double denom = std::sqrt(n_total) - 2.0 * params.a;
  if (!(denom > 0.0)) throw ParameterError("Kato parameters need sqrt(N) - 2a > 0");
  if (params.a == 0.0 && params.b == 0.0) return 0.0;
  double diff = params.b - params.a;
  double sum = params.b + params.a;
  // Use the cancellation-free pair when b sits on the identity.
  if (params.eps > 0.0 && params.eps < 1.0) {
    const double b_ref = kato_b_from_a(params.a, n_total, params.eps);
    if (std::abs(b_ref - params.b) <= 1e-12 * std::max(1.0, b_ref)) {
      std::tie(diff, sum) = kato_sum_diff(params.a, params.b, n_total, params.eps);
    }
  }
  return n_total * (diff * params.w_max - sum * params.w_min) / denom;
}

double ng_upper_bound(const Tally& tally, const DualCertificate& cert, const KatoParams& params, bool clamp) {
  const double ng = (delta_term(tally.n_total, params) - weighted_counts(tally, cert)) * (1.0 - tally.p_t);
  if (!clamp) return ng;
  return std::clamp(ng, 0.0, tally.n_total * (1.0 - tally.p_t));
}

HprimeResult hprime_min(double ng_max, double n_total, double p_t, int d) {
  check_pt(p_t);
  const double ceiling = std::log2(static_cast<double>(d));
  const double gen = n_total * (1.0 - p_t);
  if (!(ng_max >= 0.0) || ng_max > gen * (1.0 + 1e-12)) {
    throw ParameterError("ng_max must lie in [0, N (1 - p_t)]");
  }
  if (ng_max == 0.0) return {ceiling, true};
  return {std::clamp(-std::log2(ng_max / gen), 0.0, ceiling) + 0.0, false};
}

KatoParams optimize_kato(const Tally& tally, const DualCertificate& cert, double eps) {
  tally.validate();
  check_eps(eps);
  const double n = tally.n_total;
  const double root = std::sqrt(n);
  const WBounds w = w_bounds(cert, tally.p_t, tally.probs);

  auto objective = [&](double a) {
    const KatoParams p = make_params(a, n, eps, w);
    const double err = kato_identity_error(p.a, p.b, n, eps);
    // Rounding b to a double limits how well the identity can hold once
    // b^2 >> b^2 - a^2.
    const double c = kato_c(a, n, eps);
    const double allowed = 1e-12 + 16.0 * std::numeric_limits<double>::epsilon() * std::log(1.0 / eps) *
                                       (p.b * p.b / c + 1.0);
    if (!(err <= allowed)) throw NumericError("Kato identity violated during optimization", err);
    return ng_upper_bound(tally, cert, p, /*clamp=*/false);
  };

  // Coarse grid: log-spaced magnitudes on both sides of zero.
  const double lo = -10.0 * root;
  const double hi = 0.5 * root;
  std::vector<double> grid{0.0};
  constexpr int kPerSide = 100;
  for (int i = 0; i < kPerSide; ++i) {
    const double t = std::pow(10.0, -8.0 + 8.0 * i / (kPerSide - 1));
    grid.push_back(lo * t);
    grid.push_back(hi * t * (1.0 - 1e-9));
  }
  std::sort(grid.begin(), grid.end());

  std::vector<double> values(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) values[i] = objective(grid[i]);
  std::size_t best = 0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (values[i] < values[best] ||
        (values[i] == values[best] && std::abs(grid[i]) < std::abs(grid[best]))) {
      best = i;
    }
  }

  // Golden-section refinement inside the neighbouring grid cells.
  double left = best > 0 ? grid[best - 1] : lo * (1.0 - 1e-9);
  double right = best + 1 < grid.size() ? grid[best + 1] : grid[best];
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = right - inv_phi * (right - left);
  double x2 = left + inv_phi * (right - left);
  double f1 = objective(x1);
  double f2 = objective(x2);
  for (int it = 0; it < 300; ++it) {
    if (std::abs(right - left) <= 1e-10 * std::max(1.0, std::abs(x1) + std::abs(x2))) break;
    if (f1 <= f2) {
      right = x2;
      x2 = x1;
      f2 = f1;
      x1 = right - inv_phi * (right - left);
      f1 = objective(x1);
    } else {
      left = x1;
      x1 = x2;
      f1 = f2;
      x2 = left + inv_phi * (right - left);
      f2 = objective(x2);
    }
  }
  double a_best = grid[best];
  double f_best = values[best];
  const double candidate = f1 <= f2 ? x1 : x2;
  const double f_candidate = std::min(f1, f2);
  if (f_candidate < f_best) {
    a_best = candidate;
    f_best = f_candidate;
  }
  // Flat objective (e.g. omega = 0 with a clamp): prefer a = 0 when it ties.
  if (values[static_cast<std::size_t>(std::find(grid.begin(), grid.end(), 0.0) - grid.begin())] <= f_best) {
    a_best = 0.0;
  }
  return make_params(a_best, n, eps, w);
}

KatoParams baseline_kato(const Tally& tally, const DualCertificate& cert, double eps) {
  tally.validate();
  return make_params(0.0, tally.n_total, eps, w_bounds(cert, tally.p_t, tally.probs));
}

double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

double shannon_entropy(const InputDistribution& probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log2(p);
  }
  return h;
}

double input_rate(double p_t, const InputDistribution& probs) {
  check_pt(p_t);
  validate_distribution(probs);
  return binary_entropy(p_t) + p_t * shannon_entropy(probs);
}

Certificate certify(const Tally& tally, const DualCertificate& cert, double eps, double h_min_asymptotic) {
  Certificate out;
  out.h_min_asymptotic = h_min_asymptotic;
  out.params = optimize_kato(tally, cert, eps);
  out.delta = delta_term(tally.n_total, out.params);
  out.ng_max = ng_upper_bound(tally, cert, out.params);
  const HprimeResult h = hprime_min(out.ng_max, tally.n_total, tally.p_t, tally.outcomes());
  out.hprime_min = h.bits;
  out.vacuous = h.vacuous;
  out.r_gross = (1.0 - tally.p_t) * out.hprime_min;
  out.r_in = input_rate(tally.p_t, tally.probs);
  out.r_net = out.r_gross - out.r_in;

  const KatoParams base = baseline_kato(tally, cert, eps);
  out.hprime_min_baseline =
      hprime_min(ng_upper_bound(tally, cert, base), tally.n_total, tally.p_t, tally.outcomes()).bits;
  return out;
}

}  // namespace qrng
