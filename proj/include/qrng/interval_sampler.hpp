#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "qrng/rng.hpp"

namespace qrng {

// Uniform bits, either drawn from a generator or replayed from a fixed
// sequence. `capacity` caps how many bits may be read in total.
class BitSource {
 public:
  explicit BitSource(CounterRng rng, std::optional<std::uint64_t> capacity = std::nullopt);
  explicit BitSource(std::vector<std::uint8_t> bits);

  // Throws UnderflowError once the source is exhausted.
  int next();

  std::uint64_t consumed() const noexcept { return consumed_; }

 private:
  std::optional<CounterRng> rng_;
  std::vector<std::uint8_t> replay_;
  std::optional<std::uint64_t> capacity_;
  std::uint64_t consumed_ = 0;
  std::uint64_t word_ = 0;
  int left_ = 0;
};

struct IntervalDraw {
  int symbol = 0;           // 0-based
  std::uint64_t bits = 0;   // bits read for this symbol
};

// Interval algorithm run as a lazy arithmetic decoder over the bit stream.
// The unresolved part of the bit interval carries over between calls, so
// a sequence of n symbols costs -log2 P(sequence) + O(1) bits in total,
// with each symbol exactly distributed up to 2^-60 boundary rounding.
// Consecutive calls may use different distributions.
class IntervalSampler {
 public:
  using Fixed = unsigned __int128;

  IntervalSampler() = default;

  IntervalDraw sample(BitSource& source, const std::vector<double>& dist);

  // Two-symbol shortcut: returns 1 with probability p.
  IntervalDraw bernoulli(BitSource& source, double p);

 private:
  IntervalDraw draw(BitSource& source, const Fixed* cdf, int n);
  void renormalize();

  static constexpr int kBits = 62;
  static constexpr std::uint64_t kFull = std::uint64_t{1} << kBits;
  static constexpr std::uint64_t kHalf = kFull >> 1;
  static constexpr std::uint64_t kQuarter = kFull >> 2;

  // Symbol interval [low_, low_ + range_) contains the bit interval
  // [bit_low_, bit_low_ + bit_width_).
  std::uint64_t low_ = 0;
  std::uint64_t range_ = kFull;
  std::uint64_t bit_low_ = 0;
  std::uint64_t bit_width_ = kFull;
};

}  // namespace qrng
