#pragma once

#include <cstddef>
#include <vector>

namespace qrng {

// Length-63 maximal-length sequence (x^6 + x + 1) mapped to +-amplitude.
std::vector<double> m_sequence_reference(double amplitude = 5.0);

// One frame on the wire: a jitter gap of 0..max_gap noise samples, the
// reference pattern, then 2 * valid_len slots (each prepared state followed
// by its auxiliary partner).
struct FrameLayout {
  std::vector<double> reference = m_sequence_reference();
  std::size_t valid_len = 10000;
  std::size_t max_gap = 64;
  double threshold = 0.5;

  std::size_t payload_len() const noexcept { return 2 * valid_len; }
  // Throws ParameterError if the reference is empty or its largest
  // aperiodic autocorrelation sidelobe exceeds kMaxSidelobe of the peak.
  void validate() const;
};

inline constexpr double kMaxSidelobe = 0.35;

// Largest off-peak aperiodic autocorrelation divided by the energy.
double max_sidelobe(const std::vector<double>& reference);

// Normalized correlation of the reference with stream[offset, offset + L):
// <r, s> / (|r| |s|), 0 for an all-zero window.
double correlation_score(const std::vector<double>& stream, std::size_t offset,
                         const std::vector<double>& reference);

struct SyncResult {
  std::size_t offset = 0;  // index of the first reference sample
  double score = 0.0;
};

// Best offset in [from, from + window]. Throws SyncError if the best score
// is below the layout threshold.
SyncResult frame_sync(const std::vector<double>& stream, const FrameLayout& layout, std::size_t from = 0,
                      std::size_t window = static_cast<std::size_t>(-1));

// Offsets of consecutive frames, each searched in the max_gap window after
// the end of the previous frame.
std::vector<SyncResult> sync_frames(const std::vector<double>& stream, const FrameLayout& layout);

}  // namespace qrng
