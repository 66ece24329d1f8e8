#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qrng/finite_size.hpp"
#include "qrng/frame_sync.hpp"
#include "qrng/interval_sampler.hpp"
#include "qrng/measurement.hpp"
#include "qrng/rng.hpp"
#include "qrng/statespace.hpp"

namespace qrng {

enum class DriftKind { none, constant, random_walk };

// Random-walk step used when no value is configured. It is a stand-in: the
// measured drift is only shown qualitatively, never parameterized.
inline constexpr double kDefaultWalkSigma = 1e-4;

struct DriftModel {
  DriftKind kind = DriftKind::none;
  double theta0 = 0.0;  // constant offset, radians
  double sigma = 0.0;   // random-walk step per round, radians

  static DriftModel none() { return {}; }
  static DriftModel constant(double theta) { return {DriftKind::constant, theta, 0.0}; }
  static DriftModel random_walk(double sigma) { return {DriftKind::random_walk, 0.0, sigma}; }

  void validate() const;
  std::string label() const;
};

struct SimConfig {
  SourceModel model = build_source(0.005);
  DetectorParams det{0.232, 4};
  double p_t = 3.464e-4;
  std::uint64_t n_total = 1000000;
  DriftModel drift;
  std::uint64_t block_size = 10000;
  bool compensate = true;
  // Embed every block in a frame and recover it by correlation.
  std::optional<FrameLayout> frame;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  bool collect_outcomes = false;  // keep generation-round outcomes
  std::size_t log_rounds = 0;     // per-round records kept from the start
  std::string raw_dump;           // f64 LE (X, P) pairs, empty = off

  void validate() const;
};

// Round plan: 0 = generation, x in 1..3 = test round with input x.
struct RoundPlan {
  std::vector<std::uint8_t> code;
  std::uint64_t bits = 0;
};

// Draws the round kind (probability p_t of a test) and, for tests, the
// input from the model's distribution. Sampler state carries over between
// calls so consumption stays near the entropy.
RoundPlan schedule_rounds(const SimConfig& config, BitSource& bits, IntervalSampler& sampler,
                          std::uint64_t count);

// Per-round phase for `count` rounds continuing from `theta_prev`.
std::vector<double> apply_drift(std::uint64_t count, const DriftModel& drift, CounterRng& rng,
                                double theta_prev = 0.0);

struct Compensation {
  double theta_hat = 0.0;
  bool fallback = false;  // no generation round: previous estimate reused
};

// theta_hat = angle of the mean (X, P) over generation rounds; every sample
// is rotated by -theta_hat in place.
Compensation phase_compensate(std::span<QuadratureSample> block, std::span<const std::uint8_t> code,
                              double previous = 0.0);

struct RoundRecord {
  bool test = false;
  int x = 3;
  double theta = 0.0;
  QuadratureSample raw;
  QuadratureSample compensated;
  int y = 1;
};

struct SimSummary {
  std::uint64_t rounds_scheduled = 0;
  std::uint64_t test_rounds = 0;
  std::uint64_t generation_rounds = 0;
  std::uint64_t auxiliary_scheduled = 0;
  std::uint64_t input_bits = 0;
  std::uint64_t blocks = 0;
  std::uint64_t fallback_blocks = 0;
  std::uint64_t lost_blocks = 0;        // frame sync failed
  std::uint64_t lost_rounds = 0;
  std::uint64_t misaligned_blocks = 0;  // synced at the wrong offset
  double mean_abs_phase_error = 0.0;    // |theta_hat - mean theta| per block
  std::string drift;
  bool sigma_is_stand_in = false;
};

struct SimResult {
  Tally tally;
  SimSummary summary;
  std::vector<std::uint8_t> outcomes;  // generation rounds, y in 1..d
  std::vector<RoundRecord> rounds;
};

// Schedule, drift, sample, optional framing, compensation, binning and
// tallying. Blocks are sampled from substreams keyed by block index, so
// the result depends only on the seed and config, not on `workers`.
SimResult run_simulation(const SimConfig& config);

}  // namespace qrng
