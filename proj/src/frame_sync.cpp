#include "qrng/frame_sync.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qrng/errors.hpp"

namespace qrng {

std::vector<double> m_sequence_reference(double amplitude) {
  std::vector<double> out;
  unsigned state = 0x3f;
  for (int i = 0; i < 63; ++i) {
    const unsigned bit = state & 1u;
    out.push_back(bit ? amplitude : -amplitude);
    const unsigned feedback = (state ^ (state >> 1)) & 1u;  // x^6 + x + 1
    state = (state >> 1) | (feedback << 5);
  }
  return out;
}

double max_sidelobe(const std::vector<double>& reference) {
  double energy = 0.0;
  for (double v : reference) energy += v * v;
  if (energy == 0.0) return 1.0;
  double worst = 0.0;
  for (std::size_t lag = 1; lag < reference.size(); ++lag) {
    double acc = 0.0;
    for (std::size_t i = 0; i + lag < reference.size(); ++i) acc += reference[i] * reference[i + lag];
    worst = std::max(worst, std::abs(acc) / energy);
  }
  return worst;
}

void FrameLayout::validate() const {
  if (reference.empty()) throw ParameterError("frame reference must be non-empty");
  if (valid_len == 0) throw ParameterError("frame valid_len must be >= 1");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ParameterError("sync threshold must lie in (0, 1)");
  const double lobe = max_sidelobe(reference);
  if (lobe > kMaxSidelobe) {
    throw ParameterError("frame reference autocorrelation sidelobe " + std::to_string(lobe) + " too high");
  }
}

double correlation_score(const std::vector<double>& stream, std::size_t offset,
                         const std::vector<double>& reference) {
  double dot = 0.0, ss = 0.0, rr = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double s = stream[offset + i];
    dot += reference[i] * s;
    ss += s * s;
    rr += reference[i] * reference[i];
  }
  if (ss == 0.0 || rr == 0.0) return 0.0;
  return dot / std::sqrt(ss * rr);
}

SyncResult frame_sync(const std::vector<double>& stream, const FrameLayout& layout, std::size_t from,
                      std::size_t window) {
  const std::size_t len = layout.reference.size();
  if (len == 0) throw ParameterError("frame reference must be non-empty");
  SyncResult best;
  best.score = -1.0;
  if (stream.size() >= len && from <= stream.size() - len) {
    const std::size_t last = std::min(stream.size() - len, window > stream.size() ? stream.size() : from + window);
    for (std::size_t off = from; off <= last; ++off) {
      const double score = correlation_score(stream, off, layout.reference);
      if (score > best.score) best = {off, score};
    }
  }
  if (best.score < layout.threshold) {
    throw SyncError("no reference pattern above threshold", std::max(best.score, 0.0));
  }
  return best;
}

std::vector<SyncResult> sync_frames(const std::vector<double>& stream, const FrameLayout& layout) {
  std::vector<SyncResult> frames;
  std::size_t from = 0;
  const std::size_t frame_body = layout.reference.size() + layout.payload_len();
  while (from + frame_body <= stream.size()) {
    const SyncResult r = frame_sync(stream, layout, from, layout.max_gap);
    frames.push_back(r);
    from = r.offset + frame_body;
  }
  return frames;
}

}  // namespace qrng
