#include "qrng/measurement.hpp"

#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "qrng/errors.hpp"

namespace qrng {

namespace {

constexpr double kQuadratureTolerance = 1e-10;
constexpr double kPi = std::numbers::pi;

// Angular density after integrating the Husimi function over r in closed
// form:  int_0^inf r exp(-r^2 + 2 r c) dr = 1/2 + sqrt(pi)/2 c e^{c^2} (1 + erf c).
double angular_density(double phi, double amplitude, double phase) {
  const double delta = phi - phase;
  const double c = amplitude * std::cos(delta);
  const double s = amplitude * std::sin(delta);
  const double a2 = amplitude * amplitude;
  return (0.5 * std::exp(-a2) +
          0.5 * std::sqrt(kPi) * c * std::exp(-s * s) * (1.0 + std::erf(c))) /
         kPi;
}

}  // namespace

void DetectorParams::validate() const {
  if (!(eta >= 0.0 && eta <= 1.0)) throw ParameterError("detection efficiency must lie in [0, 1]");
  if (d < 2) throw ParameterError("number of outcomes must be at least 2");
}

ProbTable::ProbTable(Eigen::MatrixXd entries) : entries_(std::move(entries)) {
  if (entries_.rows() != kNumInputs || entries_.cols() < 1) {
    throw ParameterError("probability table must have 3 rows and at least one column");
  }
  if (!entries_.allFinite() || entries_.minCoeff() < 0.0) {
    throw ParameterError("probability table entries must be finite and nonnegative");
  }
}

double ProbTable::max_row_error() const {
  double worst = 0.0;
  for (int x = 0; x < entries_.rows(); ++x) {
    worst = std::max(worst, std::abs(entries_.row(x).sum() - 1.0));
  }
  return worst;
}

void ProbTable::write_csv(std::ostream& out) const {
  out.precision(17);
  for (int x = 0; x < entries_.rows(); ++x) {
    for (int y = 0; y < entries_.cols(); ++y) {
      if (y) out << ',';
      out << entries_(x, y);
    }
    out << '\n';
  }
}

ProbTable ProbTable::read_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw DataError("");
      } catch (const std::exception&) {
        throw DataError("probability table: unparsable cell '" + cell + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.size() != kNumInputs) throw DataError("probability table: expected 3 rows");
  const std::size_t d = rows.front().size();
  Eigen::MatrixXd m(kNumInputs, static_cast<Eigen::Index>(d));
  for (std::size_t x = 0; x < rows.size(); ++x) {
    if (rows[x].size() != d) throw DataError("probability table: ragged rows");
    for (std::size_t y = 0; y < d; ++y) m(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) = rows[x][y];
  }
  try {
    return ProbTable(std::move(m));
  } catch (const ParameterError& e) {
    throw DataError(std::string("probability table: ") + e.what());
  }
}

double input_phase(int x) { return x * 2.0 * kPi / 3.0; }

ProbTable quadrant_probabilities(const SourceModel& model, const DetectorParams& det) {
  det.validate();
  const double amplitude = std::sqrt(det.eta * model.mu);
  const double width = 2.0 * kPi / det.d;
  // Panels per sector; a handful keeps each Kronrod panel well resolved.
  const int panels = std::max(1, 16 / det.d);

  Eigen::MatrixXd table(kNumInputs, det.d);
  for (int x = 0; x < kNumInputs; ++x) {
    const double phase = input_phase(x + 1);
    auto f = [&](double phi) { return angular_density(phi, amplitude, phase); };
    for (int y = 0; y < det.d; ++y) {
      double total = 0.0;
      for (int k = 0; k < panels; ++k) {
        const double lo = width * (y + static_cast<double>(k) / panels);
        const double hi = width * (y + static_cast<double>(k + 1) / panels);
        double error = 0.0;
        total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, lo, hi, 12, 1e-14,
                                                                               &error);
        if (!(error <= kQuadratureTolerance)) {
          throw NumericError("quadrant integration did not converge", error);
        }
      }
      table(x, y) = total;
    }
    const double row_error = std::abs(table.row(x).sum() - 1.0);
    if (row_error > kQuadratureTolerance) {
      throw NumericError("quadrant probabilities not normalized", row_error);
    }
  }
  return ProbTable(std::move(table));
}

QuadratureSample sample_heterodyne(const SourceModel& model, const DetectorParams& det, int x,
                                   double theta, CounterRng& rng) {
  if (x < 1 || x > kNumInputs) throw ParameterError("input label must be 1, 2 or 3");
  const double amplitude = std::sqrt(det.eta * model.mu);
  const double phase = input_phase(x) + theta;
  // One distribution object so the polar method's paired draw is not wasted.
  std::normal_distribution<double> noise(0.0, std::sqrt(0.5));
  QuadratureSample s;
  s.x = amplitude * std::cos(phase) + noise(rng);
  s.p = amplitude * std::sin(phase) + noise(rng);
  return s;
}

int discretize(const QuadratureSample& s, int d) {
  if (d == 4) {
    // Exact sign tests; atan2 rounding cannot move a point across an axis.
    if (s.x > 0.0 && s.p >= 0.0) return 1;
    if (s.x <= 0.0 && s.p > 0.0) return 2;
    if (s.x < 0.0 && s.p <= 0.0) return 3;
    if (s.x >= 0.0 && s.p < 0.0) return 4;
    return 1;  // origin
  }
  if (d < 1) throw ParameterError("number of outcomes must be positive");
  if (s.x == 0.0 && s.p == 0.0) return 1;
  double phi = std::atan2(s.p, s.x);
  if (phi < 0.0) phi += 2.0 * kPi;
  const int sector = static_cast<int>(std::floor(phi / (2.0 * kPi / d)));
  return std::clamp(sector, 0, d - 1) + 1;
}

}  // namespace qrng
