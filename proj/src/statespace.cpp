#include "qrng/statespace.hpp"

#include <cmath>
#include <string>

#include "qrng/errors.hpp"

namespace qrng {

namespace {

constexpr double kNormTolerance = 1e-12;
constexpr double kDistributionTolerance = 1e-12;

}  // namespace

DensityMatrix::DensityMatrix(const Eigen::Matrix3d& entries) : entries_(entries) {}

DensityMatrix SourceModel::density(int x) const {
  if (x < 0 || x >= kNumInputs) {
    throw ParameterError("input label out of range: " + std::to_string(x));
  }
  return density_of(states[static_cast<std::size_t>(x)]);
}

void validate_distribution(const InputDistribution& probs) {
  double sum = 0.0;
  for (double p : probs) {
    if (!(p > 0.0) || !std::isfinite(p)) {
      throw ParameterError("input distribution entries must be positive");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kDistributionTolerance) {
    throw ParameterError("input distribution must sum to 1");
  }
}

SourceModel build_source(double mu, const InputDistribution& probs) {
  if (!(mu >= 0.0 && mu <= 0.5)) {
    throw ParameterError("mean photon number must lie in [0, 0.5], got " + std::to_string(mu));
  }
  validate_distribution(probs);

  SourceModel model;
  model.mu = mu;
  model.beta = 1.0 - 2.0 * mu;
  model.probs = probs;

  const double b = model.beta;
  model.states[0] = StateVector(1.0, 0.0, 0.0);
  model.states[1] = StateVector(b, std::sqrt(1.0 - b * b), 0.0);
  model.states[2] = StateVector(b, b * std::sqrt((1.0 - b) / (1.0 + b)),
                                std::sqrt((1.0 + b - 2.0 * b * b) / (1.0 + b)));
  return model;
}

DensityMatrix density_of(const StateVector& state) {
  if (std::abs(state.norm() - 1.0) > kNormTolerance) {
    throw ParameterError("state vector is not normalized");
  }
  return DensityMatrix(state * state.transpose());
}

OverlapReport verify_overlaps(const SourceModel& model) {
  OverlapReport report;
  report.bound = 1.0 - 2.0 * model.mu;
  report.overlaps[0] = model.states[0].dot(model.states[1]);
  report.overlaps[1] = model.states[0].dot(model.states[2]);
  report.overlaps[2] = model.states[1].dot(model.states[2]);
  for (double o : report.overlaps) {
    if (std::abs(o) < report.bound - kNormTolerance) report.satisfied = false;
  }
  return report;
}

}  // namespace qrng
