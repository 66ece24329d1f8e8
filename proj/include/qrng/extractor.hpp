#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace qrng {

// Bit string packed into 64-bit words; bit i sits at bit (i % 64) of word
// i / 64. Byte I/O is most-significant-bit first within each byte.
class BitString {
 public:
  BitString() = default;
  explicit BitString(std::size_t size);

  static BitString from_bits(const std::vector<int>& bits);
  // Reads `size` bits from packed bytes (defaults to 8 * bytes.size()).
  static BitString from_bytes(const std::vector<std::uint8_t>& bytes, std::size_t size = static_cast<std::size_t>(-1));
  std::vector<std::uint8_t> to_bytes() const;

  std::size_t size() const noexcept { return size_; }
  bool empty() const noexcept { return size_ == 0; }
  bool get(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1u; }
  void set(std::size_t i, bool v);
  void push_back(bool v);
  void append(const BitString& other);
  std::size_t count() const;

  BitString slice(std::size_t begin, std::size_t length) const;
  BitString operator^(const BitString& other) const;
  bool operator==(const BitString& other) const;

  const std::vector<std::uint64_t>& words() const noexcept { return words_; }

 private:
  std::vector<std::uint64_t> words_;
  std::size_t size_ = 0;
};

struct ExtractorConfig {
  std::size_t n_raw = 0;
  std::size_t m_out = 0;
  double eps_hash = 1e-10;
  BitString seed;  // n_raw + m_out - 1 bits

  void validate() const;
};

// y in 1..4 to the big-endian two-bit binary of y - 1.
BitString encode_outcomes(const std::vector<std::uint8_t>& outcomes);

// T raw over GF(2) with T[i][j] = seed[i - j + n_raw - 1]. Word-parallel:
// row i is the parity of (seed window starting at i) AND (reversed raw).
BitString toeplitz_extract(const BitString& raw, const ExtractorConfig& config);

// Same product, one matrix entry at a time.
BitString toeplitz_extract_dense(const BitString& raw, const ExtractorConfig& config);

// max(0, floor(n_gen H' - 2 log2(1/eps_hash))).
std::uint64_t output_length(double n_gen, double hprime_min, double eps_hash);

// Splits the raw string into whole blocks of `block_rounds` generation
// rounds and hashes each with the same seed (a strong extractor's seed may
// be reused). Each block is sized by output_length for its own round count,
// so the total never exceeds the budget of the whole run. A trailing
// partial block is dropped.
struct BlockPlan {
  std::size_t block_raw = 0;
  std::size_t block_out = 0;
  std::size_t blocks = 0;

  std::size_t seed_len() const noexcept { return block_out == 0 ? 0 : block_raw + block_out - 1; }
  std::size_t total_out() const noexcept { return block_out * blocks; }
};

BlockPlan plan_blocks(std::size_t n_raw, int bits_per_round, double hprime_min, double eps_hash,
                      std::size_t block_rounds);

BitString extract_blocks(const BitString& raw, const BlockPlan& plan, const BitString& seed, double eps_hash);

struct SanityReport {
  std::size_t bits = 0;
  double monobit_z = 0.0;
  double runs_z = 0.0;
  double chi_square = 0.0;  // 8-bit blocks, 255 degrees of freedom
  double chi_square_z = 0.0;
  bool pass = false;
};

// Needs at least 10^4 bits.
SanityReport sanity_tests(const BitString& bits);

}  // namespace qrng
