#include <algorithm>
#include <cmath>
#include <numbers>

#include "echoprint/channel_sim.hpp"
#include "echoprint/dsp.hpp"
#include "echoprint/error.hpp"
#include "echoprint/fingerprint.hpp"

namespace echoprint {
namespace {

constexpr int kFractionalHalfTaps = 16;  // 33-tap fractional delay

double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

struct Image {
  double delay;      // samples
  double amplitude;
};

}  // namespace

void validate(const RoomSpec& room) {
  for (int a = 0; a < 3; ++a) {
    if (!(room.dims[a] > 0.0)) throw ConfigError("room: dimensions must be positive");
    const double s = room.source_pos[a], m = room.mic_pos[a];
    if (!(s > 0.0 && s < room.dims[a]) || !(m > 0.0 && m < room.dims[a])) {
      throw ConfigError("room: source and microphone must lie strictly inside the room");
    }
  }
  for (double b : room.surface_coeffs) {
    if (!(b >= 0.0 && b < 1.0)) throw ConfigError("room: reflection coefficients must be in [0, 1)");
  }
  if (room.max_order < 0) throw ConfigError("room: max_order must be >= 0");
  if (room.source_pos == room.mic_pos) {
    throw DegenerateGeometryError("room: source and microphone coincide");
  }
}

ImpulseResponse image_source_ir(const RoomSpec& room, int sample_rate) {
  validate(room);
  const auto& L = room.dims;
  const auto& s = room.source_pos;
  const auto& r = room.mic_pos;
  const auto& beta = room.surface_coeffs;
  const int n = room.max_order;
  const double samples_per_metre = sample_rate / kSpeedOfSound;

  // Reflection count per wall for image index m and parity q along one axis:
  // |m - q| hits on the wall at 0, |m| on the far wall.
  std::vector<Image> images;
  for (int mx = -n; mx <= n; ++mx) {
    for (int my = -n; my <= n; ++my) {
      for (int mz = -n; mz <= n; ++mz) {
        for (int q = 0; q < 2; ++q) {
          const int ox = std::abs(mx - q) + std::abs(mx);
          if (ox > n) continue;
          for (int j = 0; j < 2; ++j) {
            const int oy = std::abs(my - j) + std::abs(my);
            if (ox + oy > n) continue;
            for (int k = 0; k < 2; ++k) {
              const int oz = std::abs(mz - k) + std::abs(mz);
              if (ox + oy + oz > n) continue;
              const double gain = std::pow(beta[0], std::abs(mx - q)) * std::pow(beta[1], std::abs(mx)) *
                                  std::pow(beta[2], std::abs(my - j)) * std::pow(beta[3], std::abs(my)) *
                                  std::pow(beta[4], std::abs(mz - k)) * std::pow(beta[5], std::abs(mz));
              if (gain == 0.0) continue;
              const double dx = (1 - 2 * q) * s[0] - r[0] + 2.0 * mx * L[0];
              const double dy = (1 - 2 * j) * s[1] - r[1] + 2.0 * my * L[1];
              const double dz = (1 - 2 * k) * s[2] - r[2] + 2.0 * mz * L[2];
              const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
              images.push_back({d * samples_per_metre, gain / (4.0 * std::numbers::pi * d)});
            }
          }
        }
      }
    }
  }

  ImpulseResponse ir;
  ir.sample_rate = sample_rate;
  double last = 0.0;
  for (const auto& im : images) last = std::max(last, im.delay);
  ir.taps.assign(static_cast<std::size_t>(std::ceil(last)) + kFractionalHalfTaps + 2, 0.0);

  // Hann-windowed sinc centred on the exact (fractional) arrival time.
  const double window_half = kFractionalHalfTaps + 1.0;
  for (const auto& im : images) {
    const auto centre = static_cast<long>(std::lround(im.delay));
    for (long t = centre - kFractionalHalfTaps; t <= centre + kFractionalHalfTaps; ++t) {
      if (t < 0) continue;
      const double x = static_cast<double>(t) - im.delay;
      const double w = 0.5 * (1.0 + std::cos(std::numbers::pi * x / window_half));
      ir.taps[static_cast<std::size_t>(t)] += im.amplitude * w * sinc(x);
    }
  }
  ir.rt60_est = estimate_rt60(ir.taps, sample_rate);
  return ir;
}

std::vector<double> convolve_raw(std::span<const double> dry, std::span<const double> ir) {
  return dsp::fft_convolve(dry, ir);
}

AudioTrace convolve(const AudioTrace& dry, const ImpulseResponse& ir) {
  if (dry.sample_rate != ir.sample_rate) throw ConfigError("convolve: sample rates differ");
  AudioTrace out;
  out.sample_rate = dry.sample_rate;
  out.label = dry.label;
  out.samples = convolve_raw(dry.samples, ir.taps);
  const double peak = peak_abs(out.samples);
  if (peak > 0.0) {
    for (double& v : out.samples) v /= peak;
  }
  return out;
}

}  // namespace echoprint
