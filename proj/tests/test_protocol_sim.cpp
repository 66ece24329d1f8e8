#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "qrng/errors.hpp"
#include "qrng/protocol_sim.hpp"

using namespace qrng;

namespace {

// |observed - expected| per cell in units of the multinomial sigma.
double worst_cell(const Tally& t, const ProbTable& table) {
  double worst = 0.0;
  for (int x = 0; x < 3; ++x) {
    const double n = t.counts.row(x).sum();
    for (int y = 0; y < t.outcomes(); ++y) {
      const double p = table(x, y);
      worst = std::max(worst, std::abs(t.counts(x, y) - n * p) / std::sqrt(n * p * (1.0 - p)));
    }
  }
  return worst;
}

double worst_pair(const Tally& a, const Tally& b) {
  double worst = 0.0;
  for (int x = 0; x < 3; ++x) {
    const double n = a.counts.row(x).sum();
    for (int y = 0; y < a.outcomes(); ++y) {
      const double p = a.counts(x, y) / n;
      const double sd = std::sqrt(std::max(1.0, n * p * (1.0 - p)));
      worst = std::max(worst, std::abs(a.counts(x, y) - b.counts(x, y)) / sd);
    }
  }
  return worst;
}

SimConfig base(std::uint64_t n, double p_t) {
  SimConfig c;
  c.n_total = n;
  c.p_t = p_t;
  c.seed = 77;
  return c;
}

}  // namespace

TEST(ScheduleRounds, ForcedGeneration) {
  const SimConfig c = base(1000, 0.0);
  BitSource bits(CounterRng(1));
  IntervalSampler s;
  const RoundPlan plan = schedule_rounds(c, bits, s, 100000);
  EXPECT_EQ(std::count(plan.code.begin(), plan.code.end(), 0), 100000);
  EXPECT_EQ(plan.bits, 0u);
}

TEST(ScheduleRounds, ForcedTestsAreUniform) {
  const SimConfig c = base(1000, 1.0);
  BitSource bits(CounterRng(2));
  IntervalSampler s;
  constexpr int kN = 1000000;
  const RoundPlan plan = schedule_rounds(c, bits, s, kN);
  const double sd = std::sqrt(kN * (1.0 / 3.0) * (2.0 / 3.0));
  for (int x = 1; x <= 3; ++x) {
    EXPECT_LT(std::abs(std::count(plan.code.begin(), plan.code.end(), x) - kN / 3.0), 5.0 * sd) << x;
  }
  EXPECT_NEAR(static_cast<double>(plan.bits) / kN, std::log2(3.0), 1e-3);
}

TEST(ApplyDrift, Kinds) {
  CounterRng rng(3);
  for (double t : apply_drift(1000, DriftModel::none(), rng)) EXPECT_EQ(t, 0.0);
  for (double t : apply_drift(1000, DriftModel::constant(std::numbers::pi / 6), rng)) {
    EXPECT_EQ(t, std::numbers::pi / 6);
  }
  EXPECT_THROW(apply_drift(10, DriftModel::random_walk(-1.0), rng), ParameterError);
}

TEST(ApplyDrift, RandomWalkVariance) {
  CounterRng rng(4);
  constexpr int kPaths = 1000;
  constexpr std::uint64_t kLen = 10000;
  constexpr double kSigma = 1e-3;
  double sum2 = 0.0;
  for (int i = 0; i < kPaths; ++i) {
    const double end = apply_drift(kLen, DriftModel::random_walk(kSigma), rng).back();
    sum2 += end * end;
  }
  EXPECT_NEAR(sum2 / kPaths, kLen * kSigma * kSigma, 0.25 * kLen * kSigma * kSigma);

  const auto cont = apply_drift(5, DriftModel::random_walk(0.0), rng, 0.7);
  for (double t : cont) EXPECT_EQ(t, 0.7);
}

TEST(PhaseCompensate, RotationIsAnIsometry) {
  CounterRng rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<QuadratureSample> block(1000);
  std::vector<std::uint8_t> code(1000, 0);
  for (std::size_t i = 0; i < block.size(); ++i) {
    block[i] = {g(rng) + 0.3, g(rng) + 0.2};
    code[i] = i % 7 == 0 ? 2 : 0;
  }
  const auto before = block;
  const Compensation c = phase_compensate(block, code);
  EXPECT_FALSE(c.fallback);
  double mx = 0.0, mp = 0.0;
  for (std::size_t i = 0; i < block.size(); ++i) {
    EXPECT_NEAR(std::hypot(block[i].x, block[i].p), std::hypot(before[i].x, before[i].p), 1e-12);
    if (code[i] == 0) {
      mx += block[i].x;
      mp += block[i].p;
    }
  }
  EXPECT_NEAR(std::atan2(mp, mx), 0.0, 1e-12);
}

TEST(PhaseCompensate, FallsBackWithoutGenerationRounds) {
  std::vector<QuadratureSample> block{{1.0, 0.0}};
  const std::vector<std::uint8_t> code{1};
  const Compensation c = phase_compensate(block, code, std::numbers::pi / 2);
  EXPECT_TRUE(c.fallback);
  EXPECT_EQ(c.theta_hat, std::numbers::pi / 2);
  EXPECT_NEAR(block[0].p, -1.0, 1e-15);
  EXPECT_THROW(phase_compensate(block, std::vector<std::uint8_t>{}, 0.0), ParameterError);
}

TEST(RunSimulation, TestFractionAndInputBits) {
  const SimConfig c = base(10000000, 3.464e-4);
  const SimResult r = run_simulation(c);
  const double n = 1e7;
  const double sd = std::sqrt(n * c.p_t * (1.0 - c.p_t));
  EXPECT_LT(std::abs(static_cast<double>(r.summary.test_rounds) - n * c.p_t), 5.0 * sd);
  const double predicted = n * input_rate(c.p_t, c.model.probs);
  EXPECT_NEAR(static_cast<double>(r.summary.input_bits), predicted, 0.05 * predicted);
  EXPECT_DOUBLE_EQ(r.tally.counts.sum() + r.tally.n_gen, n);
  EXPECT_EQ(r.summary.test_rounds + r.summary.generation_rounds, 10000000u);
  EXPECT_EQ(r.summary.auxiliary_scheduled, 10000000u);
}

TEST(RunSimulation, NominalTableReproduced) {
  SimConfig c = base(10000000, 0.01);
  c.workers = 4;
  const SimResult r = run_simulation(c);
  EXPECT_LT(worst_cell(r.tally, quadrant_probabilities(c.model, c.det)), 5.0);
  EXPECT_NO_THROW(r.tally.validate());
}

TEST(RunSimulation, VacuumIsUniform) {
  SimConfig c = base(400000, 0.5);
  c.model = build_source(0.0);
  const SimResult r = run_simulation(c);
  EXPECT_LT(worst_cell(r.tally, ProbTable(Eigen::MatrixXd::Constant(3, 4, 0.25))), 5.0);
}

TEST(RunSimulation, IndependentOfWorkerCount) {
  SimConfig c = base(300000, 0.05);
  c.drift = DriftModel::random_walk(1e-3);
  c.collect_outcomes = true;
  const SimResult one = run_simulation(c);
  c.workers = 5;
  const SimResult many = run_simulation(c);
  EXPECT_EQ(one.tally.counts, many.tally.counts);
  EXPECT_EQ(one.tally.n_gen, many.tally.n_gen);
  EXPECT_EQ(one.outcomes, many.outcomes);
  EXPECT_EQ(one.summary.input_bits, many.summary.input_bits);
  c.seed = 78;
  EXPECT_NE(run_simulation(c).tally.counts, one.tally.counts);
}

TEST(RunSimulation, CompensationNeutralWithoutDrift) {
  SimConfig c = base(2000000, 0.05);
  const SimResult on = run_simulation(c);
  c.compensate = false;
  const SimResult off = run_simulation(c);
  EXPECT_LT(worst_pair(off.tally, on.tally), 5.0);
  EXPECT_LT(on.summary.mean_abs_phase_error, 0.5);
}

TEST(RunSimulation, ConstantDriftIsCompensated) {
  SimConfig c = base(2000000, 0.05);
  const SimResult ref = run_simulation(c);
  c.drift = DriftModel::constant(std::numbers::pi / 6);
  const SimResult drifted = run_simulation(c);
  EXPECT_LT(worst_pair(ref.tally, drifted.tally), 3.0);

  c.compensate = false;
  EXPECT_GT(worst_pair(ref.tally, run_simulation(c).tally), 3.0);
}

TEST(RunSimulation, FramedRunConservesRounds) {
  SimConfig c = base(200000, 0.05);
  c.frame = FrameLayout{};
  c.frame->valid_len = 5000;
  c.workers = 3;
  const SimResult framed = run_simulation(c);
  const auto& s = framed.summary;
  EXPECT_EQ(s.blocks, 40u);
  EXPECT_EQ(s.misaligned_blocks, 0u);
  EXPECT_DOUBLE_EQ(framed.tally.counts.sum() + framed.tally.n_gen + static_cast<double>(s.lost_rounds), 200000.0);

  c.frame.reset();
  c.block_size = 5000;
  const SimResult plain = run_simulation(c);
  if (s.lost_rounds == 0) EXPECT_EQ(framed.tally.counts, plain.tally.counts);
}

TEST(RunSimulation, RoundLogAndDump) {
  SimConfig c = base(20000, 0.2);
  c.log_rounds = 500;
  const auto path = std::filesystem::temp_directory_path() / "qrng_raw_dump.bin";
  c.raw_dump = path.string();
  const SimResult r = run_simulation(c);
  ASSERT_EQ(r.rounds.size(), 500u);
  for (const auto& rec : r.rounds) {
    EXPECT_EQ(rec.y, discretize(rec.compensated));
    EXPECT_NEAR(std::hypot(rec.raw.x, rec.raw.p), std::hypot(rec.compensated.x, rec.compensated.p), 1e-12);
    if (!rec.test) EXPECT_EQ(rec.x, 3);
  }
  EXPECT_EQ(std::filesystem::file_size(path), 20000u * 16u);
  std::filesystem::remove(path);
}

TEST(SimConfig, Validation) {
  SimConfig c;
  c.p_t = 1.5;
  EXPECT_THROW(c.validate(), ParameterError);
  c = SimConfig{};
  c.block_size = 0;
  EXPECT_THROW(c.validate(), ParameterError);
  c = SimConfig{};
  c.drift = DriftModel::random_walk(std::nan(""));
  EXPECT_THROW(run_simulation(c), ParameterError);
}
