#include "qrng/protocol_sim.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <numbers>
#include <random>
#include <thread>

#include "qrng/errors.hpp"

namespace qrng {

namespace {

double wrap_angle(double a) {
  return std::remainder(a, 2.0 * std::numbers::pi);
}

struct BlockState {
  std::size_t begin = 0;  // chunk-local round index
  std::size_t end = 0;
  bool lost = false;
  bool misaligned = false;
};

// Builds the frame around one block, recovers it by correlation and
// replaces the samples by what the receiver would slice out.
void frame_block(const SimConfig& config, std::uint64_t block_index, std::span<QuadratureSample> samples,
                 BlockState& state) {
  const FrameLayout& layout = *config.frame;
  CounterRng rng = CounterRng(config.seed, streams::kFraming).derive(block_index);
  std::normal_distribution<double> noise(0.0, std::sqrt(0.5));
  const std::size_t gap = static_cast<std::size_t>(rng() % (layout.max_gap + 1));
  const std::size_t ref_len = layout.reference.size();

  std::vector<double> xs, ps;
  const std::size_t total = gap + ref_len + 2 * samples.size();
  xs.reserve(total);
  ps.reserve(total);
  for (std::size_t i = 0; i < gap; ++i) {
    xs.push_back(noise(rng));
    ps.push_back(noise(rng));
  }
  for (double r : layout.reference) {
    xs.push_back(r + noise(rng));
    ps.push_back(noise(rng));
  }
  for (const auto& s : samples) {
    xs.push_back(s.x);
    ps.push_back(s.p);
    xs.push_back(0.0);  // auxiliary slot, not sampled
    ps.push_back(0.0);
  }

  SyncResult sync;
  try {
    sync = frame_sync(xs, layout, 0, layout.max_gap);
  } catch (const SyncError&) {
    state.lost = true;
    return;
  }
  state.misaligned = sync.offset != gap;
  const std::size_t start = sync.offset + ref_len;
  if (start + 2 * (samples.size() - 1) >= xs.size()) {
    state.lost = true;
    return;
  }
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = {xs[start + 2 * i], ps[start + 2 * i]};
}

template <typename Fn>
void parallel_blocks(unsigned workers, std::size_t count, Fn&& fn) {
  if (workers <= 1 || count <= 1) {
    for (std::size_t b = 0; b < count; ++b) fn(b);
    return;
  }
  const unsigned used = static_cast<unsigned>(std::min<std::size_t>(workers, count));
  std::vector<std::exception_ptr> errors(used);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < used; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t b = w; b < count; b += used) fn(b);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

void DriftModel::validate() const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ParameterError("drift sigma must be >= 0");
  if (!std::isfinite(theta0)) throw ParameterError("drift offset must be finite");
}

std::string DriftModel::label() const {
  switch (kind) {
    case DriftKind::none:
      return "none";
    case DriftKind::constant:
      return "constant";
    case DriftKind::random_walk:
      return "random-walk";
  }
  return "unknown";
}

void SimConfig::validate() const {
  validate_distribution(model.probs);
  det.validate();
  if (!(p_t >= 0.0 && p_t <= 1.0)) throw ParameterError("p_t must lie in [0, 1]");
  if (n_total < 1) throw ParameterError("n_total must be >= 1");
  if (block_size < 1) throw ParameterError("block_size must be >= 1");
  drift.validate();
  if (frame) frame->validate();
}

RoundPlan schedule_rounds(const SimConfig& config, BitSource& bits, IntervalSampler& sampler,
                          std::uint64_t count) {
  RoundPlan plan;
  plan.code.resize(count);
  const std::vector<double> inputs(config.model.probs.begin(), config.model.probs.end());
  const std::uint64_t before = bits.consumed();
  for (std::uint64_t i = 0; i < count; ++i) {
    if (sampler.bernoulli(bits, config.p_t).symbol == 1) {
      plan.code[i] = static_cast<std::uint8_t>(sampler.sample(bits, inputs).symbol + 1);
    } else {
      plan.code[i] = 0;
    }
  }
  plan.bits = bits.consumed() - before;
  return plan;
}

std::vector<double> apply_drift(std::uint64_t count, const DriftModel& drift, CounterRng& rng,
                                double theta_prev) {
  drift.validate();
  std::vector<double> theta(count, 0.0);
  switch (drift.kind) {
    case DriftKind::none:
      break;
    case DriftKind::constant:
      std::fill(theta.begin(), theta.end(), drift.theta0);
      break;
    case DriftKind::random_walk: {
      std::normal_distribution<double> step(0.0, 1.0);
      double t = theta_prev;
      for (auto& v : theta) {
        t += drift.sigma * step(rng);
        v = t;
      }
      break;
    }
  }
  return theta;
}

Compensation phase_compensate(std::span<QuadratureSample> block, std::span<const std::uint8_t> code,
                              double previous) {
  if (block.size() != code.size()) throw ParameterError("block and plan sizes differ");
  double sx = 0.0, sp = 0.0;
  std::size_t gen = 0;
  for (std::size_t i = 0; i < block.size(); ++i) {
    if (code[i] != 0) continue;
    sx += block[i].x;
    sp += block[i].p;
    ++gen;
  }
  Compensation c;
  if (gen == 0) {
    c.theta_hat = previous;
    c.fallback = true;
  } else {
    c.theta_hat = std::atan2(sp, sx);
  }
  const double cs = std::cos(c.theta_hat);
  const double sn = std::sin(c.theta_hat);
  for (auto& s : block) {
    const double x = cs * s.x + sn * s.p;
    const double p = -sn * s.x + cs * s.p;
    s = {x, p};
  }
  return c;
}

SimResult run_simulation(const SimConfig& config) {
  config.validate();
  const int d = config.det.d;
  const std::uint64_t n = config.n_total;
  const std::uint64_t bsize = config.frame ? std::min<std::uint64_t>(config.block_size, config.frame->valid_len)
                                           : config.block_size;
  const std::uint64_t n_blocks = (n + bsize - 1) / bsize;
  const std::uint64_t chunk_blocks = std::max<std::uint64_t>(16, 4ull * std::max(1u, config.workers));

  SimResult result;
  auto& tally = result.tally;
  tally.p_t = config.p_t;
  tally.probs = config.model.probs;
  tally.counts = Eigen::MatrixXd::Zero(kNumInputs, d);
  auto& summary = result.summary;
  summary.drift = config.drift.label();
  summary.sigma_is_stand_in = config.drift.kind == DriftKind::random_walk && config.drift.sigma == kDefaultWalkSigma;

  BitSource bits(CounterRng(config.seed, streams::kInputBits));
  IntervalSampler sampler;
  CounterRng drift_rng(config.seed, streams::kDrift);
  const CounterRng detection(config.seed, streams::kDetection);

  std::ofstream dump;
  if (!config.raw_dump.empty()) {
    dump.open(config.raw_dump, std::ios::binary);
    if (!dump) throw DataError("cannot open raw dump file " + config.raw_dump);
  }

  double theta_prev = 0.0;
  double theta_hat_prev = 0.0;
  double phase_error_sum = 0.0;
  std::uint64_t phase_error_blocks = 0;
  std::vector<std::uint64_t> gen_counts(static_cast<std::size_t>(d), 0);

  for (std::uint64_t first = 0; first < n_blocks; first += chunk_blocks) {
    const std::uint64_t last = std::min(n_blocks, first + chunk_blocks);
    const std::uint64_t r0 = first * bsize;
    const std::uint64_t r1 = std::min(n, last * bsize);
    const std::size_t len = static_cast<std::size_t>(r1 - r0);

    const RoundPlan plan = schedule_rounds(config, bits, sampler, len);
    const std::vector<double> theta = apply_drift(len, config.drift, drift_rng, theta_prev);
    if (!theta.empty()) theta_prev = theta.back();

    std::vector<BlockState> blocks(static_cast<std::size_t>(last - first));
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      blocks[b].begin = static_cast<std::size_t>(b * bsize);
      blocks[b].end = std::min(len, static_cast<std::size_t>((b + 1) * bsize));
    }

    std::vector<QuadratureSample> samples(len);
    parallel_blocks(config.workers, blocks.size(), [&](std::size_t b) {
      BlockState& st = blocks[b];
      CounterRng rng = detection.derive(first + b);
      for (std::size_t i = st.begin; i < st.end; ++i) {
        const int x = plan.code[i] == 0 ? 3 : plan.code[i];
        samples[i] = sample_heterodyne(config.model, config.det, x, theta[i], rng);
      }
      if (config.frame) {
        frame_block(config, first + b,
                    std::span<QuadratureSample>(samples.data() + st.begin, st.end - st.begin), st);
      }
    });

    for (auto& st : blocks) {
      const std::size_t m = st.end - st.begin;
      ++summary.blocks;
      for (std::size_t i = st.begin; i < st.end; ++i) {
        if (plan.code[i] == 0) {
          ++summary.generation_rounds;
        } else {
          ++summary.test_rounds;
        }
      }
      if (st.lost) {
        ++summary.lost_blocks;
        summary.lost_rounds += m;
        continue;
      }
      if (st.misaligned) ++summary.misaligned_blocks;

      std::span<QuadratureSample> block(samples.data() + st.begin, m);
      std::vector<QuadratureSample> raw;
      const std::uint64_t g0 = r0 + st.begin;
      if (g0 < config.log_rounds || dump.is_open()) raw.assign(block.begin(), block.end());
      if (dump.is_open()) {
        for (const auto& s : raw) {
          const double pair[2] = {s.x, s.p};
          dump.write(reinterpret_cast<const char*>(pair), sizeof pair);
        }
      }

      if (config.compensate) {
        const Compensation c = phase_compensate(block, {plan.code.data() + st.begin, m}, theta_hat_prev);
        theta_hat_prev = c.theta_hat;
        if (c.fallback) {
          ++summary.fallback_blocks;
        } else {
          double mean_theta = 0.0;
          for (std::size_t i = st.begin; i < st.end; ++i) mean_theta += theta[i];
          mean_theta /= static_cast<double>(m);
          phase_error_sum += std::abs(wrap_angle(c.theta_hat - mean_theta));
          ++phase_error_blocks;
        }
      }

      for (std::size_t i = st.begin; i < st.end; ++i) {
        const int y = discretize(samples[i], d);
        const int code = plan.code[i];
        if (code == 0) {
          ++gen_counts[static_cast<std::size_t>(y - 1)];
          if (config.collect_outcomes) result.outcomes.push_back(static_cast<std::uint8_t>(y));
        } else {
          tally.counts(code - 1, y - 1) += 1.0;
        }
        const std::uint64_t g = r0 + i;
        if (g < config.log_rounds) {
          RoundRecord rec;
          rec.test = code != 0;
          rec.x = code == 0 ? 3 : code;
          rec.theta = theta[i];
          rec.raw = raw[i - st.begin];
          rec.compensated = samples[i];
          rec.y = y;
          result.rounds.push_back(rec);
        }
      }
    }
  }

  summary.rounds_scheduled = n;
  summary.auxiliary_scheduled = n;
  summary.input_bits = bits.consumed();
  summary.mean_abs_phase_error = phase_error_blocks ? phase_error_sum / static_cast<double>(phase_error_blocks) : 0.0;

  double gen = 0.0;
  for (auto c : gen_counts) gen += static_cast<double>(c);
  tally.n_gen = gen;
  tally.n_total = static_cast<double>(n - summary.lost_rounds);
  return result;
}

}  // namespace qrng
