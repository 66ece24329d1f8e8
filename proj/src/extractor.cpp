#include "qrng/extractor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <string>

#include "qrng/errors.hpp"

namespace qrng {

namespace {

std::size_t word_count(std::size_t bits) { return (bits + 63) / 64; }

// 64 bits of `s` starting at bit `pos` (zeros past the end).
std::uint64_t window64(const std::vector<std::uint64_t>& w, std::size_t pos) {
  const std::size_t k = pos >> 6;
  const unsigned sh = pos & 63;
  const std::uint64_t lo = k < w.size() ? w[k] : 0;
  if (sh == 0) return lo;
  const std::uint64_t hi = k + 1 < w.size() ? w[k + 1] : 0;
  return (lo >> sh) | (hi << (64 - sh));
}

}  // namespace

BitString::BitString(std::size_t size) : words_(word_count(size), 0), size_(size) {}

BitString BitString::from_bits(const std::vector<int>& bits) {
  BitString out(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) out.set(i, bits[i] != 0);
  return out;
}

BitString BitString::from_bytes(const std::vector<std::uint8_t>& bytes, std::size_t size) {
  const std::size_t available = bytes.size() * 8;
  if (size == static_cast<std::size_t>(-1)) size = available;
  if (size > available) throw DataError("bit count exceeds the supplied bytes");
  BitString out(size);
  for (std::size_t i = 0; i < size; ++i) out.set(i, (bytes[i / 8] >> (7 - i % 8)) & 1u);
  return out;
}

std::vector<std::uint8_t> BitString::to_bytes() const {
  std::vector<std::uint8_t> out((size_ + 7) / 8, 0);
  for (std::size_t i = 0; i < size_; ++i) {
    if (get(i)) out[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
  }
  return out;
}

void BitString::set(std::size_t i, bool v) {
  const std::uint64_t mask = std::uint64_t{1} << (i & 63);
  if (v) {
    words_[i >> 6] |= mask;
  } else {
    words_[i >> 6] &= ~mask;
  }
}

void BitString::push_back(bool v) {
  if ((size_ & 63) == 0) words_.push_back(0);
  ++size_;
  set(size_ - 1, v);
}

void BitString::append(const BitString& other) {
  for (std::size_t i = 0; i < other.size_; ++i) push_back(other.get(i));
}

std::size_t BitString::count() const {
  std::size_t c = 0;
  for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
  return c;
}

BitString BitString::slice(std::size_t begin, std::size_t length) const {
  if (begin + length > size_) throw ParameterError("slice out of range");
  BitString out(length);
  for (std::size_t k = 0; k < out.words_.size(); ++k) out.words_[k] = window64(words_, begin + 64 * k);
  if (length & 63) out.words_.back() &= (std::uint64_t{1} << (length & 63)) - 1;
  return out;
}

BitString BitString::operator^(const BitString& other) const {
  if (size_ != other.size_) throw ParameterError("bit strings differ in length");
  BitString out = *this;
  for (std::size_t k = 0; k < words_.size(); ++k) out.words_[k] ^= other.words_[k];
  return out;
}

bool BitString::operator==(const BitString& other) const {
  return size_ == other.size_ && words_ == other.words_;
}

void ExtractorConfig::validate() const {
  if (!(eps_hash > 0.0 && eps_hash < 1.0)) throw ParameterError("eps_hash must lie in (0, 1)");
  const std::size_t expected = m_out == 0 ? 0 : n_raw + m_out - 1;
  if (seed.size() != expected) {
    throw ParameterError("Toeplitz seed has " + std::to_string(seed.size()) + " bits, expected " +
                         std::to_string(expected));
  }
}

BitString encode_outcomes(const std::vector<std::uint8_t>& outcomes) {
  BitString out(2 * outcomes.size());
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const int y = outcomes[i];
    if (y < 1 || y > 4) throw DataError("outcome " + std::to_string(y) + " at index " + std::to_string(i) + " not in 1..4");
    out.set(2 * i, ((y - 1) >> 1) & 1);
    out.set(2 * i + 1, (y - 1) & 1);
  }
  return out;
}

BitString toeplitz_extract(const BitString& raw, const ExtractorConfig& config) {
  config.validate();
  if (raw.size() != config.n_raw) throw ParameterError("raw length differs from n_raw");
  const std::size_t n = config.n_raw;
  const std::size_t m = config.m_out;
  BitString out(m);
  if (m == 0 || n == 0) return out;

  // Reversed raw string, so each output bit is a plain AND-parity of a
  // seed window against it.
  BitString rev(n);
  for (std::size_t j = 0; j < n; ++j) rev.set(n - 1 - j, raw.get(j));
  const auto& r = rev.words();
  const std::size_t nw = r.size();

  // 64 pre-shifted copies of the seed make every window a word-aligned read.
  const auto& s = config.seed.words();
  const std::size_t span = (m + 63) / 64 + nw;
  std::vector<std::vector<std::uint64_t>> shifted(64, std::vector<std::uint64_t>(span, 0));
  for (unsigned sh = 0; sh < 64; ++sh) {
    for (std::size_t k = 0; k < span; ++k) shifted[sh][k] = window64(s, sh + 64 * k);
  }
  for (std::size_t i = 0; i < m; ++i) {
    const auto& row = shifted[i & 63];
    const std::size_t base = i >> 6;
    std::uint64_t acc = 0;
    for (std::size_t k = 0; k < nw; ++k) acc ^= row[base + k] & r[k];
    out.set(i, std::popcount(acc) & 1);
  }
  return out;
}

BitString toeplitz_extract_dense(const BitString& raw, const ExtractorConfig& config) {
  config.validate();
  if (raw.size() != config.n_raw) throw ParameterError("raw length differs from n_raw");
  const std::size_t n = config.n_raw;
  BitString out(config.m_out);
  for (std::size_t i = 0; i < config.m_out; ++i) {
    bool bit = false;
    for (std::size_t j = 0; j < n; ++j) bit ^= config.seed.get(i + n - 1 - j) && raw.get(j);
    out.set(i, bit);
  }
  return out;
}

std::uint64_t output_length(double n_gen, double hprime_min, double eps_hash) {
  if (!(eps_hash > 0.0 && eps_hash < 1.0)) throw ParameterError("eps_hash must lie in (0, 1)");
  if (!(hprime_min >= 0.0)) throw ParameterError("hprime_min must be >= 0");
  const double budget = n_gen * hprime_min - 2.0 * std::log2(1.0 / eps_hash);
  return budget > 0.0 ? static_cast<std::uint64_t>(std::floor(budget)) : 0;
}

BlockPlan plan_blocks(std::size_t n_raw, int bits_per_round, double hprime_min, double eps_hash,
                      std::size_t block_rounds) {
  if (bits_per_round < 1) throw ParameterError("bits_per_round must be >= 1");
  if (block_rounds < 1) throw ParameterError("block_rounds must be >= 1");
  const std::size_t rounds = n_raw / static_cast<std::size_t>(bits_per_round);
  BlockPlan plan;
  block_rounds = std::min(block_rounds, rounds);
  if (block_rounds == 0) return plan;
  plan.block_raw = block_rounds * static_cast<std::size_t>(bits_per_round);
  plan.block_out = static_cast<std::size_t>(output_length(static_cast<double>(block_rounds), hprime_min, eps_hash));
  plan.block_out = std::min(plan.block_out, plan.block_raw);
  plan.blocks = plan.block_out == 0 ? 0 : rounds / block_rounds;
  return plan;
}

BitString extract_blocks(const BitString& raw, const BlockPlan& plan, const BitString& seed, double eps_hash) {
  BitString out;
  if (plan.blocks == 0) return out;
  if (plan.blocks * plan.block_raw > raw.size()) throw ParameterError("raw string shorter than the block plan");
  ExtractorConfig cfg{plan.block_raw, plan.block_out, eps_hash, seed};
  cfg.validate();
  for (std::size_t b = 0; b < plan.blocks; ++b) {
    out.append(toeplitz_extract(raw.slice(b * plan.block_raw, plan.block_raw), cfg));
  }
  return out;
}

SanityReport sanity_tests(const BitString& bits) {
  const std::size_t n = bits.size();
  if (n < 10000) throw ParameterError("sanity tests need at least 10^4 bits");
  SanityReport rep;
  rep.bits = n;
  const double nd = static_cast<double>(n);
  const double ones = static_cast<double>(bits.count());
  const double zeros = nd - ones;
  rep.monobit_z = (ones - nd / 2.0) / std::sqrt(nd / 4.0);

  // Wald-Wolfowitz runs test.
  std::size_t runs = 1;
  for (std::size_t i = 1; i < n; ++i) runs += bits.get(i) != bits.get(i - 1);
  if (ones == 0.0 || zeros == 0.0) {
    rep.runs_z = std::numeric_limits<double>::infinity();
  } else {
    const double mean = 2.0 * ones * zeros / nd + 1.0;
    const double var = (mean - 1.0) * (mean - 2.0) / (nd - 1.0);
    rep.runs_z = (static_cast<double>(runs) - mean) / std::sqrt(var);
  }

  // Chi-square over non-overlapping bytes.
  std::vector<double> hist(256, 0.0);
  const std::size_t blocks = n / 8;
  for (std::size_t b = 0; b < blocks; ++b) {
    unsigned v = 0;
    for (int k = 0; k < 8; ++k) v = (v << 1) | static_cast<unsigned>(bits.get(8 * b + static_cast<std::size_t>(k)));
    hist[v] += 1.0;
  }
  const double expected = static_cast<double>(blocks) / 256.0;
  for (double h : hist) rep.chi_square += (h - expected) * (h - expected) / expected;
  rep.chi_square_z = (rep.chi_square - 255.0) / std::sqrt(2.0 * 255.0);

  rep.pass = std::abs(rep.monobit_z) < 4.0 && std::abs(rep.runs_z) < 4.0 && std::abs(rep.chi_square_z) < 4.0;
  return rep;
}

}  // namespace qrng
