#pragma once

#include <vector>

#include "echoprint/audio.hpp"

namespace echoprint {

struct FrameFeatures {
  std::vector<double> spectral_flatness;  // [0, 1]; exact silence is 1.0
  std::vector<double> frame_energy;       // dB relative to full scale
  std::size_t frame_length = 0;           // samples
  std::size_t hop = 0;                    // samples
};

struct SegmenterConfig {
  double frame_ms = 32.0;
  double hop_ms = 16.0;
  // Silence threshold is this many dB below the median frame energy.
  double silence_offset_db = 10.0;
  double flatness_threshold = 0.35;
  double min_gap_s = 0.2;
  double min_utterance_s = 0.3;
  // Extra silence kept after each utterance (never overlapping the next) so
  // the reverberant decay is not cut at the silence threshold.
  double trailing_guard_s = 0.3;
};

inline constexpr double kEnergyFloorDb = -120.0;

FrameFeatures frame_features(const AudioTrace& trace, double frame_ms, double hop_ms);

// Voiced runs of the trace, merged across short gaps, with one frame step of
// guard silence before and one step plus trailing_guard_s after. Silence-only
// traces yield an empty list.
std::vector<Utterance> segment(const AudioTrace& trace, const SegmenterConfig& cfg = {});

}  // namespace echoprint
