#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "echoprint/channel_sim.hpp"

namespace echoprint {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Two-pole resonator with unity gain at its centre frequency.
class Resonator {
 public:
  Resonator(double freq, double bandwidth, int rate) {
    const double r = std::exp(-std::numbers::pi * bandwidth / rate);
    const double theta = kTwoPi * freq / rate;
    a1_ = 2.0 * r * std::cos(theta);
    a2_ = -r * r;
    gain_ = (1.0 - r) * std::sqrt(1.0 - 2.0 * r * std::cos(2.0 * theta) + r * r);
  }
  double operator()(double x) {
    const double y = gain_ * x + a1_ * y1_ + a2_ * y2_;
    y2_ = y1_;
    y1_ = y;
    return y;
  }

 private:
  double a1_ = 0.0, a2_ = 0.0, gain_ = 1.0;
  double y1_ = 0.0, y2_ = 0.0;
};

double raised_cosine_envelope(std::size_t i, std::size_t n, std::size_t attack, std::size_t release) {
  if (i < attack) return 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(i) / attack);
  if (i + release >= n) {
    const double t = static_cast<double>(n - i) / static_cast<double>(release);
    return 0.5 - 0.5 * std::cos(std::numbers::pi * std::clamp(t, 0.0, 1.0));
  }
  return 1.0;
}

}  // namespace

AudioTrace synthesize_speech(const SpeakerProfile& speaker, double duration_s, std::uint64_t seed,
                             int sample_rate) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  std::normal_distribution<double> gauss(0.0, 1.0);

  const auto total = static_cast<std::size_t>(duration_s * sample_rate);
  AudioTrace trace;
  trace.sample_rate = sample_rate;
  trace.samples.assign(total, 0.0);
  const double rate = sample_rate;

  std::size_t cursor = static_cast<std::size_t>(uniform(0.15, 0.3) * rate);
  while (cursor + static_cast<std::size_t>(0.45 * rate) < total) {
    const int syllables = 2 + static_cast<int>(u(rng) * 4.0);
    const double loudness = uniform(0.5, 1.0);
    for (int syl = 0; syl < syllables && cursor < total; ++syl) {
      // Optional fricative onset.
      if (u(rng) < 0.3) {
        const auto len = static_cast<std::size_t>(uniform(0.04, 0.09) * rate);
        Resonator hiss(uniform(3000.0, 5000.0), 1500.0, sample_rate);
        for (std::size_t i = 0; i < len && cursor + i < total; ++i) {
          trace.samples[cursor + i] +=
              0.05 * loudness * raised_cosine_envelope(i, len, len / 4, len / 4) * hiss(gauss(rng));
        }
        cursor += len;
      }
      // Voiced nucleus: harmonic complex with a -6 dB/octave tilt, a gently
      // falling pitch contour and a per-syllable vowel.
      const auto len = static_cast<std::size_t>(uniform(0.12, 0.28) * rate);
      const double f0_start = speaker.f0 * uniform(0.9, 1.15);
      const double f0_end = f0_start * uniform(0.85, 1.0);
      std::array<Resonator, 3> formants{
          Resonator(speaker.formants[0] * uniform(0.75, 1.3), 90.0, sample_rate),
          Resonator(speaker.formants[1] * uniform(0.75, 1.3), 110.0, sample_rate),
          Resonator(speaker.formants[2] * uniform(0.85, 1.15), 160.0, sample_rate)};
      const int harmonics = static_cast<int>(4000.0 / f0_start);
      std::vector<double> phase(static_cast<std::size_t>(harmonics));
      for (double& p : phase) p = uniform(0.0, kTwoPi);
      const auto attack = static_cast<std::size_t>(0.02 * rate);
      const auto release = static_cast<std::size_t>(0.05 * rate);
      for (std::size_t i = 0; i < len && cursor + i < total; ++i) {
        const double frac = static_cast<double>(i) / static_cast<double>(len);
        const double f0 = f0_start + (f0_end - f0_start) * frac;
        double src = 0.0;
        for (int h = 1; h <= harmonics; ++h) {
          auto& ph = phase[static_cast<std::size_t>(h - 1)];
          ph += kTwoPi * h * f0 / rate;
          if (h * f0 < 0.45 * rate) src += std::sin(ph) / h;
        }
        double v = src;
        // Formants act in parallel so no single resonance dominates the tilt.
        double shaped = 0.0;
        for (auto& f : formants) shaped += f(v);
        v = 0.3 * src + shaped;
        trace.samples[cursor + i] += loudness * raised_cosine_envelope(i, len, attack, release) * v;
      }
      cursor += len;
      // Short intra-word dip.
      cursor += static_cast<std::size_t>(uniform(0.02, 0.07) * rate);
    }
    // Pause between utterances.
    cursor += static_cast<std::size_t>(uniform(0.35, 0.7) * rate);
  }

  const double peak = peak_abs(trace.samples);
  if (peak > 0.0) {
    for (double& v : trace.samples) v *= 0.9 / peak;
  }
  return trace;
}

std::vector<AudioTrace> default_dry_bank(int count, double duration_s, std::uint64_t seed) {
  // A spread of voices from low male to high female pitch.
  static constexpr std::array<double, 8> kPitches{95.0, 210.0, 120.0, 240.0, 140.0, 180.0, 105.0, 225.0};
  static constexpr std::array<std::array<double, 3>, 4> kFormants{{{520.0, 1400.0, 2450.0},
                                                                   {600.0, 1700.0, 2700.0},
                                                                   {450.0, 1250.0, 2300.0},
                                                                   {680.0, 1900.0, 2900.0}}};
  std::vector<AudioTrace> bank;
  for (int i = 0; i < count; ++i) {
    SpeakerProfile sp;
    sp.f0 = kPitches[static_cast<std::size_t>(i) % kPitches.size()];
    sp.formants = kFormants[static_cast<std::size_t>(i) % kFormants.size()];
    AudioTrace t = synthesize_speech(sp, duration_s, mix_seed(seed, 0xD1, static_cast<std::uint64_t>(i)));
    t.label = "dry" + std::to_string(i);
    bank.push_back(std::move(t));
  }
  return bank;
}

std::vector<AudioTrace> speaker_dry_bank(const SpeakerProfile& speaker, int count, double duration_s,
                                         std::uint64_t seed) {
  std::vector<AudioTrace> bank;
  for (int i = 0; i < count; ++i) {
    AudioTrace t = synthesize_speech(speaker, duration_s, mix_seed(seed, 0xD2, static_cast<std::uint64_t>(i)));
    t.label = "dry" + std::to_string(i);
    bank.push_back(std::move(t));
  }
  return bank;
}

}  // namespace echoprint
