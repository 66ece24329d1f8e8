#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace qrng {

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

// One Philox4x32 block with ten rounds.
PhiloxCounter philox4x32_10(PhiloxCounter counter, PhiloxKey key);

// Counter-based generator. Output i of stream s under seed k is a pure
// function of (k, s, i), so disjoint streams can be handed to workers in
// any order and still reproduce the sequential result.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept;

  // Independent generator for a named child stream.
  CounterRng derive(std::uint64_t child) const noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

 private:
  void refill() noexcept;

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int available_ = 0;
};

// Well-known child stream ids used by the simulator.
namespace streams {
inline constexpr std::uint64_t kInputBits = 1;
inline constexpr std::uint64_t kDrift = 2;
inline constexpr std::uint64_t kDetection = 3;
inline constexpr std::uint64_t kFraming = 4;
}  // namespace streams

}  // namespace qrng
