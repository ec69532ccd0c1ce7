#include <algorithm>
#include <cmath>
#include <numeric>

#include "echoprint/dsp.hpp"
#include "echoprint/error.hpp"
#include "echoprint/fingerprint.hpp"

namespace echoprint {
namespace {

using dsp::Complex;

std::size_t frame_size(int sample_rate, const NoiseSuppressorConfig& cfg) {
  auto n = static_cast<std::size_t>(std::llround(cfg.frame_ms * 1e-3 * sample_rate));
  n += n % 2;
  return std::max<std::size_t>(n, 16);
}

// Frames start at -N/2 so that, with a periodic Hann window at 50 % overlap,
// every sample is covered by two windows summing to one.
std::size_t frame_count(std::size_t length, std::size_t n) {
  const std::size_t hop = n / 2;
  return (length + hop) / hop + 1;
}

std::vector<double> windowed_frame(std::span<const double> x, std::size_t index,
                                   std::size_t n, std::span<const double> window) {
  const std::size_t hop = n / 2;
  std::vector<double> frame(n, 0.0);
  const long start = static_cast<long>(index * hop) - static_cast<long>(hop);
  for (std::size_t k = 0; k < n; ++k) {
    const long s = start + static_cast<long>(k);
    if (s >= 0 && s < static_cast<long>(x.size())) {
      frame[k] = x[static_cast<std::size_t>(s)] * window[k];
    }
  }
  return frame;
}

}  // namespace

std::vector<double> estimate_noise_psd(std::span<const std::vector<double>> signals,
                                       int sample_rate, const NoiseSuppressorConfig& cfg) {
  const std::size_t n = frame_size(sample_rate, cfg);
  const auto window = dsp::hann(n);
  std::vector<std::pair<double, std::vector<double>>> frames;
  for (const auto& x : signals) {
    if (x.size() < n) continue;
    // Only frames fully inside the signal; padded edges would bias the floor.
    const std::size_t hop = n / 2;
    for (std::size_t i = 1; (i + 1) * hop <= x.size(); ++i) {
      const auto f = windowed_frame(x, i, n, window);
      const auto spec = dsp::rfft(f, n);
      std::vector<double> power(spec.size());
      double total = 0.0;
      for (std::size_t k = 0; k < spec.size(); ++k) {
        power[k] = std::norm(spec[k]);
        total += power[k];
      }
      frames.emplace_back(total, std::move(power));
    }
  }
  std::vector<double> psd(n / 2 + 1, 0.0);
  if (frames.empty()) return psd;
  std::stable_sort(frames.begin(), frames.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  const std::size_t take = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(cfg.noise_quantile * static_cast<double>(frames.size()))));
  for (std::size_t i = 0; i < take; ++i) {
    for (std::size_t k = 0; k < psd.size(); ++k) psd[k] += frames[i].second[k];
  }
  for (double& v : psd) v /= static_cast<double>(take);
  return psd;
}

std::vector<double> suppress_noise(std::span<const double> signal, int sample_rate,
                                   std::span<const double> noise_psd,
                                   const NoiseSuppressorConfig& cfg) {
  const std::size_t n = frame_size(sample_rate, cfg);
  const std::size_t hop = n / 2;
  const std::size_t bins = n / 2 + 1;
  if (noise_psd.size() != bins) throw ShapeError("suppress_noise: noise spectrum size mismatch");
  std::vector<double> out(signal.size(), 0.0);
  if (signal.empty()) return out;

  const auto window = dsp::hann(n);
  const std::size_t count = frame_count(signal.size(), n);
  std::vector<double> prev_clean(bins, 0.0);  // |G X|^2 of the previous frame
  std::vector<double> gain(bins, 1.0);
  std::vector<Complex> shaped(bins);

  for (std::size_t i = 0; i < count; ++i) {
    const auto frame = windowed_frame(signal, i, n, window);
    const auto X = dsp::rfft(frame, n);

    for (std::size_t k = 0; k < bins; ++k) {
      const double lambda = noise_psd[k];
      const double power = std::norm(X[k]);
      if (lambda <= 0.0) {
        gain[k] = 1.0;
      } else {
        const double post = power / lambda;
        const double prio = cfg.smoothing * prev_clean[k] / lambda +
                            (1.0 - cfg.smoothing) * std::max(post - 1.0, 0.0);
        gain[k] = std::max(cfg.gain_floor, prio / (1.0 + prio));
      }
      shaped[k] = gain[k] * X[k];
    }

    if (cfg.harmonic_regeneration) {
      // Half-wave rectification restores harmonics the first pass attenuated.
      auto first = dsp::irfft(shaped, n);
      for (double& v : first) v = std::max(v, 0.0);
      const auto H = dsp::rfft(first, n);
      for (std::size_t k = 0; k < bins; ++k) {
        const double lambda = noise_psd[k];
        if (lambda <= 0.0) continue;
        const double prio = (cfg.regeneration_mix * std::norm(shaped[k]) +
                             (1.0 - cfg.regeneration_mix) * std::norm(H[k])) /
                            lambda;
        gain[k] = std::max(cfg.gain_floor, prio / (1.0 + prio));
        shaped[k] = gain[k] * X[k];
      }
    }
    for (std::size_t k = 0; k < bins; ++k) prev_clean[k] = std::norm(shaped[k]);

    const auto y = dsp::irfft(shaped, n);
    const long start = static_cast<long>(i * hop) - static_cast<long>(hop);
    for (std::size_t k = 0; k < n; ++k) {
      const long s = start + static_cast<long>(k);
      if (s >= 0 && s < static_cast<long>(out.size())) out[static_cast<std::size_t>(s)] += y[k];
    }
  }
  return out;
}

AudioTrace suppress_noise(const AudioTrace& signal, const std::optional<AudioTrace>& noise_profile,
                          const NoiseSuppressorConfig& cfg) {
  if (signal.samples.empty()) throw EmptyInputError("suppress_noise: empty signal");
  std::vector<double> psd;
  if (noise_profile) {
    NoiseSuppressorConfig all = cfg;
    all.noise_quantile = 1.0;
    const std::vector<std::vector<double>> src{noise_profile->samples};
    psd = estimate_noise_psd(src, signal.sample_rate, all);
  } else {
    const std::vector<std::vector<double>> src{signal.samples};
    psd = estimate_noise_psd(src, signal.sample_rate, cfg);
  }
  AudioTrace out;
  out.sample_rate = signal.sample_rate;
  out.label = signal.label;
  out.samples = suppress_noise(signal.samples, signal.sample_rate, psd, cfg);
  return out;
}

}  // namespace echoprint
