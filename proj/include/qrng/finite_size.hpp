#pragma once

#include <limits>

#include <Eigen/Dense>

#include "qrng/certifier.hpp"
#include "qrng/measurement.hpp"
#include "qrng/statespace.hpp"

namespace qrng {

// Observed counts of one protocol run. Counts are stored as doubles so that
// nominal (expected, fractional) tallies go through the same path.
struct Tally {
  double n_total = 0.0;
  Eigen::MatrixXd counts;  // N_{y|x}, 3 x d
  double n_gen = 0.0;
  double p_t = 0.0;
  InputDistribution probs{kUniformTernary, kUniformTernary, kUniformTernary};

  int outcomes() const noexcept { return static_cast<int>(counts.cols()); }
  // Throws ParameterError/DataError when the invariants do not hold.
  void validate() const;
  Tally& operator+=(const Tally& other);
};

// N_{y|x} = p_x p_t N p'(y|x), n_gen = N (1 - p_t).
Tally nominal_tally(double n_total, double p_t, const InputDistribution& probs, const ProbTable& table);

struct KatoParams {
  double a = 0.0;
  double b = 0.0;
  double eps = 1e-10;
  double w_min = 0.0;
  double w_max = 1.0;
};

struct WBounds {
  double w_min = 0.0;
  double w_max = 1.0;
};

WBounds w_bounds(const DualCertificate& cert, double p_t, const InputDistribution& probs);

// Unique b >= 0 with exp(-2 (b^2 - a^2) / (1 - 4a/(3 sqrt N))^2) = eps.
double kato_b_from_a(double a, double n_total, double eps);

// Relative deviation of the defining identity from eps, computed in a way
// that is stable when |a| is large.
double kato_identity_error(double a, double b, double n_total, double eps);

double delta_term(double n_total, const KatoParams& params);

// Upper bound on successful guesses among generation rounds. `clamp`
// confines it to [0, N (1 - p_t)].
double ng_upper_bound(const Tally& tally, const DualCertificate& cert, const KatoParams& params,
                      bool clamp = true);

struct HprimeResult {
  double bits = 0.0;
  bool vacuous = false;  // ng_max == 0: bound pinned at log2 d
};

HprimeResult hprime_min(double ng_max, double n_total, double p_t, int d = 4);

// Minimizes ng_upper_bound over a in (-10 sqrt N, sqrt N / 2) with b from
// kato_b_from_a. Ties go to the smallest |a|.
KatoParams optimize_kato(const Tally& tally, const DualCertificate& cert, double eps);

// The a = 0 (Azuma-type) choice.
KatoParams baseline_kato(const Tally& tally, const DualCertificate& cert, double eps);

double binary_entropy(double p);
double shannon_entropy(const InputDistribution& probs);
double input_rate(double p_t, const InputDistribution& probs);

struct Certificate {
  double h_min_asymptotic = std::numeric_limits<double>::quiet_NaN();
  double hprime_min = 0.0;
  bool vacuous = false;
  double ng_max = 0.0;
  double delta = 0.0;
  double r_gross = 0.0;
  double r_in = 0.0;
  double r_net = 0.0;
  KatoParams params;
  double hprime_min_baseline = 0.0;  // same pipeline with a = 0
};

Certificate certify(const Tally& tally, const DualCertificate& cert, double eps,
                    double h_min_asymptotic = std::numeric_limits<double>::quiet_NaN());

}  // namespace qrng
