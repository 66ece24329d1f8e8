#pragma once

#include <array>

#include <Eigen/Dense>

namespace qrng {

inline constexpr int kNumInputs = 3;
inline constexpr int kStateDim = 3;

using StateVector = Eigen::Vector3d;
using InputDistribution = std::array<double, kNumInputs>;

// Rank-one projector onto a signal state. Kept real: every coefficient of
// the worst-case embedding is real.
class DensityMatrix {
 public:
  explicit DensityMatrix(const Eigen::Matrix3d& entries);

  const Eigen::Matrix3d& entries() const noexcept { return entries_; }
  double trace() const { return entries_.trace(); }

 private:
  Eigen::Matrix3d entries_;
};

// Energy-bounded source: three pure states whose pairwise overlaps are all
// equal to beta = 1 - 2 mu, together with the input distribution p_x.
struct SourceModel {
  double mu = 0.0;
  double beta = 1.0;
  InputDistribution probs{1.0 / 3, 1.0 / 3, 1.0 / 3};
  std::array<StateVector, kNumInputs> states;

  // rho_x for x in {0,1,2} (labels 1..3 shifted down by one).
  DensityMatrix density(int x) const;
};

struct OverlapReport {
  // <psi_1|psi_2>, <psi_1|psi_3>, <psi_2|psi_3>
  std::array<double, 3> overlaps{};
  double bound = 1.0;  // 1 - 2 mu
  bool satisfied = true;
};

inline constexpr double kUniformTernary = 1.0 / 3;

void validate_distribution(const InputDistribution& probs);

// Throws ParameterError unless 0 <= mu <= 0.5 and probs is a distribution
// with strictly positive entries.
SourceModel build_source(double mu,
                         const InputDistribution& probs = {kUniformTernary, kUniformTernary,
                                                           kUniformTernary});

// |psi><psi| for a unit vector; ParameterError when ||psi|| deviates from 1.
DensityMatrix density_of(const StateVector& state);

OverlapReport verify_overlaps(const SourceModel& model);

}  // namespace qrng
