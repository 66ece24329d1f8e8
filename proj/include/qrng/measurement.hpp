#pragma once

#include <iosfwd>
#include <string>

#include <Eigen/Dense>

#include "qrng/rng.hpp"
#include "qrng/statespace.hpp"

namespace qrng {

// Heterodyne detector seen through angular binning of the (X, P) plane.
// eta is the overall efficiency (quantum efficiency times the electronic
// noise equivalent efficiency); eta = 0 is accepted as a degenerate limit.
struct DetectorParams {
  double eta = 1.0;
  int d = 4;

  void validate() const;
};

// Conditional distribution p(y|x): rows are inputs x = 1..3, columns are
// outcomes y = 1..d.
class ProbTable {
 public:
  ProbTable() = default;
  explicit ProbTable(Eigen::MatrixXd entries);

  const Eigen::MatrixXd& entries() const noexcept { return entries_; }
  int outcomes() const noexcept { return static_cast<int>(entries_.cols()); }
  double operator()(int x, int y) const { return entries_(x, y); }

  // Largest |row sum - 1|.
  double max_row_error() const;

  void write_csv(std::ostream& out) const;
  static ProbTable read_csv(std::istream& in);

 private:
  Eigen::MatrixXd entries_;
};

struct QuadratureSample {
  double x = 0.0;  // amplitude quadrature, shot-noise units
  double p = 0.0;  // phase quadrature, shot-noise units
};

// Nominal phase of input x (1-based): x * 2 pi / 3.
double input_phase(int x);

// Integrates the Husimi density of |sqrt(mu) e^{i x 2pi/3}> attenuated by
// eta over each angular sector. The radial integral is done in closed form;
// the angular one by adaptive Gauss-Kronrod on panels aligned with the
// sector edges. Throws NumericError if the 1e-10 target is missed.
ProbTable quadrant_probabilities(const SourceModel& model, const DetectorParams& det);

// Draws (X, P) for input x (1-based) rotated by theta radians. Each
// quadrature is Gaussian with variance 1/2.
QuadratureSample sample_heterodyne(const SourceModel& model, const DetectorParams& det, int x,
                                   double theta, CounterRng& rng);

// Sector index in 1..d of the angle of (X, P) mapped into [0, 2 pi).
// Sector edges belong to the sector that starts there; (0, 0) maps to 1.
int discretize(const QuadratureSample& s, int d = 4);

}  // namespace qrng
