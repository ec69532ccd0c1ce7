#include <algorithm>
#include <cmath>
#include <random>

#include "echoprint/channel_sim.hpp"
#include "echoprint/dsp.hpp"
#include "echoprint/error.hpp"

namespace echoprint {
namespace {

struct Sinusoid {
  double omega;      // rad/sample
  double amplitude;
  double phase;      // at the analysis centre
};

// Peaks of the zero-phase, Hann-windowed spectrum of the `n` samples ending
// at `end`. Frequencies are refined by parabolic interpolation of the log
// magnitude.
std::vector<Sinusoid> analyse(std::span<const double> x, std::size_t end, std::size_t n,
                              std::size_t* centre) {
  const std::size_t start = end - n;
  *centre = start + n / 2;
  const std::size_t m = 4 * dsp::next_pow2(n);
  const auto w = dsp::hann(n);
  std::vector<double> buf(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    // Rotate so the window centre sits at index 0.
    const std::size_t idx = (i + m - n / 2) % m;
    buf[idx] = x[start + i] * w[i];
  }
  const auto X = dsp::rfft(buf, m);
  std::vector<double> mag(X.size());
  double peak = 0.0;
  for (std::size_t k = 0; k < X.size(); ++k) {
    mag[k] = std::abs(X[k]);
    peak = std::max(peak, mag[k]);
  }
  std::vector<Sinusoid> out;
  if (peak <= 0.0) return out;
  const double floor = peak * 1e-3;  // -60 dB
  const double window_sum = static_cast<double>(n) / 2.0;
  for (std::size_t k = 1; k + 1 < mag.size(); ++k) {
    if (mag[k] < floor || mag[k] < mag[k - 1] || mag[k] <= mag[k + 1]) continue;
    const double a = std::log(std::max(mag[k - 1], 1e-300));
    const double b = std::log(mag[k]);
    const double c = std::log(std::max(mag[k + 1], 1e-300));
    const double denom = a - 2.0 * b + c;
    const double delta = denom != 0.0 ? 0.5 * (a - c) / denom : 0.0;
    const double log_peak = b - 0.25 * (a - c) * delta;
    const double omega = 2.0 * M_PI * (static_cast<double>(k) + delta) / static_cast<double>(m);
    out.push_back({omega, 2.0 * std::exp(log_peak) / window_sum, std::arg(X[k])});
  }
  return out;
}

}  // namespace

std::string to_string(Concealment c) {
  return c == Concealment::kSilence ? "silence" : "repeat-spectrum";
}

Concealment concealment_from_string(const std::string& s) {
  if (s == "silence") return Concealment::kSilence;
  if (s == "repeat-spectrum") return Concealment::kRepeatSpectrum;
  throw ConfigError("unknown concealment '" + s + "'");
}

AudioTrace lossy_channel(const AudioTrace& trace, const LossProfile& profile, LossStats* stats) {
  if (profile.frame_ms < 2.5) throw ConfigError("lossy_channel: frame must be >= 2.5 ms");
  if (!(profile.loss_rate >= 0.0 && profile.loss_rate <= 1.0)) {
    throw ConfigError("lossy_channel: loss rate must be in [0, 1]");
  }
  AudioTrace out = trace;
  const auto frame = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(profile.frame_ms * 1e-3 * trace.sample_rate)));
  const std::size_t frames = (trace.samples.size() + frame - 1) / frame;
  LossStats local;
  local.frames = frames;
  if (profile.loss_rate == 0.0) {
    if (stats != nullptr) *stats = local;
    return out;
  }

  std::mt19937_64 rng(profile.seed);
  std::bernoulli_distribution drop(profile.loss_rate);
  auto& y = out.samples;
  const std::size_t analysis = 2 * frame;
  std::vector<Sinusoid> model;
  std::size_t model_centre = 0;
  double decay = 1.0;  // amplitude ratio per frame
  int run = 0;  // consecutive concealed frames

  for (std::size_t f = 0; f < frames; ++f) {
    const bool lost = drop(rng);
    const std::size_t a = f * frame;
    const std::size_t b = std::min(a + frame, y.size());
    if (!lost) {
      run = 0;
      continue;
    }
    ++local.dropped;
    if (profile.concealment == Concealment::kSilence || a < analysis) {
      std::fill(y.begin() + static_cast<std::ptrdiff_t>(a), y.begin() + static_cast<std::ptrdiff_t>(b), 0.0);
      ++run;
      continue;
    }
    // The first lost frame of a burst re-analyses the signal as played out so
    // far; later frames keep extending the same sinusoids, fading 6 dB each.
    // The extension also follows the energy trend of the last two frames, so
    // a decaying tail keeps decaying instead of being held at its level.
    if (run == 0) {
      model = analyse(y, a, analysis, &model_centre);
      const double e_prev = energy(std::span<const double>(y).subspan(a - analysis, frame));
      const double e_last = energy(std::span<const double>(y).subspan(a - frame, frame));
      decay = e_prev > 0.0 ? std::min(1.0, std::sqrt(e_last / e_prev)) : 1.0;
    }
    const double fade = std::pow(0.5, run);
    for (std::size_t s = a; s < b; ++s) {
      const double t = static_cast<double>(s) - static_cast<double>(model_centre);
      double v = 0.0;
      for (const auto& p : model) v += p.amplitude * std::cos(p.omega * t + p.phase);
      y[s] = fade * std::pow(decay, t / static_cast<double>(frame)) * v;
    }
    ++run;
  }
  for (double& v : y) v = std::clamp(v, -1.0, 1.0);
  if (stats != nullptr) *stats = local;
  return out;
}

}  // namespace echoprint
