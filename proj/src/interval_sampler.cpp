#include "qrng/interval_sampler.hpp"

#include <cmath>
#include <utility>

#include "qrng/errors.hpp"

namespace qrng {

BitSource::BitSource(CounterRng rng, std::optional<std::uint64_t> capacity)
    : rng_(std::move(rng)), capacity_(capacity) {}

BitSource::BitSource(std::vector<std::uint8_t> bits)
    : replay_(std::move(bits)), capacity_(replay_.size()) {}

int BitSource::next() {
  if (capacity_ && consumed_ >= *capacity_) throw UnderflowError("bit source exhausted");
  if (!rng_) return replay_[consumed_++] & 1;
  if (left_ == 0) {
    word_ = (*rng_)();
    left_ = 64;
  }
  const int bit = static_cast<int>(word_ & 1);
  word_ >>= 1;
  --left_;
  ++consumed_;
  return bit;
}

using Fixed = IntervalSampler::Fixed;

namespace {

Fixed to_fixed(long double u) {
  if (u >= 1.0L) return Fixed{1} << 64;
  if (u <= 0.0L) return 0;
  return static_cast<Fixed>(std::ldexp(u, 64));
}

// Cumulative distribution in 2^64 fixed point; cdf[n] is implicit 2^64.
std::vector<Fixed> fixed_cdf(const std::vector<double>& dist) {
  if (dist.empty()) throw ParameterError("distribution must be non-empty");
  double total = 0.0;
  for (double p : dist) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ParameterError("distribution entries must be >= 0");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ParameterError("distribution must sum to 1");
  std::vector<Fixed> cdf(dist.size(), 0);
  long double acc = 0.0L;
  for (std::size_t i = 1; i < dist.size(); ++i) {
    acc += dist[i - 1] / total;
    cdf[i] = to_fixed(acc);
  }
  return cdf;
}

}  // namespace

IntervalDraw IntervalSampler::sample(BitSource& source, const std::vector<double>& dist) {
  const auto cdf = fixed_cdf(dist);
  return draw(source, cdf.data(), static_cast<int>(cdf.size()));
}

IntervalDraw IntervalSampler::bernoulli(BitSource& source, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw ParameterError("probability must lie in [0, 1]");
  if (p == 0.0) return {0, 0};
  if (p == 1.0) return {1, 0};
  const Fixed cdf[2] = {0, to_fixed(1.0L - static_cast<long double>(p))};
  return draw(source, cdf, 2);
}

IntervalDraw IntervalSampler::draw(BitSource& source, const Fixed* cdf, int n) {
  auto boundary = [&](int k) -> std::uint64_t {
    if (k >= n) return low_ + range_;
    return low_ + static_cast<std::uint64_t>((static_cast<Fixed>(range_) * cdf[k]) >> 64);
  };

  IntervalDraw out;
  int lo = 0;
  int hi = n;  // candidate symbols [lo, hi)
  for (;;) {
    // Narrow the candidates to the sub-intervals that meet the bit interval.
    while (lo + 1 < hi && boundary(lo + 1) <= bit_low_) ++lo;
    while (hi - 1 > lo && boundary(hi - 1) >= bit_low_ + bit_width_) --hi;
    if (hi - lo == 1) break;
    bit_width_ >>= 1;
    if (source.next()) bit_low_ += bit_width_;
    ++out.bits;
  }
  out.symbol = lo;
  const std::uint64_t start = boundary(lo);
  range_ = boundary(lo + 1) - start;
  low_ = start;
  renormalize();
  return out;
}

void IntervalSampler::renormalize() {
  for (;;) {
    std::uint64_t shift;
    if (low_ + range_ <= kHalf) {
      shift = 0;
    } else if (low_ >= kHalf) {
      shift = kHalf;
    } else if (low_ >= kQuarter && low_ + range_ <= kHalf + kQuarter) {
      shift = kQuarter;
    } else {
      break;
    }
    low_ = (low_ - shift) << 1;
    bit_low_ = (bit_low_ - shift) << 1;
    range_ <<= 1;
    bit_width_ <<= 1;
  }
}

}  // namespace qrng
