#include <cmath>
#include <limits>
#include <numbers>

#include "echoprint/channel_sim.hpp"
#include "echoprint/dsp.hpp"
#include "echoprint/error.hpp"

namespace echoprint {

std::string to_string(CodecMode mode) {
  switch (mode) {
    case CodecMode::kNarrowband: return "narrowband";
    case CodecMode::kMediumband: return "mediumband";
    case CodecMode::kWideband: return "wideband";
    case CodecMode::kSuperwideband: return "superwideband";
  }
  return "wideband";
}

CodecMode codec_mode_from_string(const std::string& s) {
  if (s == "narrowband") return CodecMode::kNarrowband;
  if (s == "mediumband") return CodecMode::kMediumband;
  if (s == "wideband") return CodecMode::kWideband;
  if (s == "superwideband") return CodecMode::kSuperwideband;
  throw ConfigError("unknown codec mode '" + s + "'");
}

std::pair<double, double> codec_passband(CodecMode mode) {
  switch (mode) {
    case CodecMode::kNarrowband: return {300.0, 3400.0};
    case CodecMode::kMediumband: return {200.0, 6000.0};
    case CodecMode::kWideband: return {100.0, 8000.0};
    case CodecMode::kSuperwideband: return {50.0, std::numeric_limits<double>::infinity()};
  }
  return {50.0, std::numeric_limits<double>::infinity()};
}

AudioTrace codec_emulate(const AudioTrace& trace, CodecMode mode) {
  AudioTrace out = trace;
  if (trace.samples.empty()) return out;
  const double nyquist = trace.sample_rate / 2.0;
  const auto [f_lo, f_hi_nominal] = codec_passband(mode);
  // Raised-cosine transitions: 20 % below the lower edge, 15 % above the
  // upper edge. The upper edge is dropped when it reaches Nyquist.
  const double lo_stop = 0.8 * f_lo;
  const bool has_hi = 1.15 * f_hi_nominal < nyquist;
  const double f_hi = f_hi_nominal;
  const double hi_stop = 1.15 * f_hi;

  const std::size_t n = dsp::next_pow2(2 * trace.samples.size());
  auto X = dsp::rfft(trace.samples, n);
  for (std::size_t k = 0; k < X.size(); ++k) {
    const double f = static_cast<double>(k) * trace.sample_rate / static_cast<double>(n);
    double g = 1.0;
    if (f <= lo_stop) {
      g = 0.0;
    } else if (f < f_lo) {
      g = 0.5 - 0.5 * std::cos(std::numbers::pi * (f - lo_stop) / (f_lo - lo_stop));
    }
    if (has_hi) {
      if (f >= hi_stop) {
        g = 0.0;
      } else if (f > f_hi) {
        g *= 0.5 + 0.5 * std::cos(std::numbers::pi * (f - f_hi) / (hi_stop - f_hi));
      }
    }
    X[k] *= g;
  }
  auto y = dsp::irfft(X, n);
  y.resize(trace.samples.size());
  out.samples = std::move(y);
  return out;
}

}  // namespace echoprint
