#include "echoprint/segmentation.hpp"

#include <algorithm>
#include <cmath>

#include "echoprint/dsp.hpp"
#include "echoprint/error.hpp"

namespace echoprint {
namespace {

std::size_t ms_to_samples(double ms, int rate) {
  return static_cast<std::size_t>(std::llround(ms * 1e-3 * rate));
}

double median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return m;
}

}  // namespace

FrameFeatures frame_features(const AudioTrace& trace, double frame_ms, double hop_ms) {
  if (frame_ms < 10.0) throw ConfigError("frame_features: frame must be >= 10 ms");
  if (hop_ms <= 0.0 || hop_ms > frame_ms) {
    throw ConfigError("frame_features: hop must be in (0, frame]");
  }
  FrameFeatures f;
  f.frame_length = ms_to_samples(frame_ms, trace.sample_rate);
  f.hop = std::max<std::size_t>(1, ms_to_samples(hop_ms, trace.sample_rate));
  const std::size_t n = trace.samples.size();
  if (n < f.frame_length) throw TooShortError("frame_features: trace shorter than one frame");

  const std::size_t frames = 1 + (n - f.frame_length) / f.hop;
  const std::size_t nfft = dsp::next_pow2(f.frame_length);
  const auto window = dsp::hann(f.frame_length);
  std::vector<double> buf(f.frame_length);
  f.spectral_flatness.reserve(frames);
  f.frame_energy.reserve(frames);

  for (std::size_t i = 0; i < frames; ++i) {
    const double* x = trace.samples.data() + i * f.hop;
    double ms = 0.0;
    for (std::size_t k = 0; k < f.frame_length; ++k) {
      ms += x[k] * x[k];
      buf[k] = x[k] * window[k];
    }
    ms /= static_cast<double>(f.frame_length);
    f.frame_energy.push_back(ms > 0.0 ? std::max(kEnergyFloorDb, 10.0 * std::log10(ms))
                                      : kEnergyFloorDb);

    const auto spec = dsp::rfft(buf, nfft);
    double log_sum = 0.0, lin_sum = 0.0;
    bool any_zero = false;
    for (std::size_t k = 1; k < spec.size(); ++k) {
      const double mag = std::abs(spec[k]);
      lin_sum += mag;
      if (mag > 0.0) {
        log_sum += std::log(mag);
      } else {
        any_zero = true;
      }
    }
    const auto bins = static_cast<double>(spec.size() - 1);
    double flatness = 1.0;
    if (lin_sum > 0.0) {
      flatness = any_zero ? 0.0 : std::exp(log_sum / bins) / (lin_sum / bins);
      flatness = std::clamp(flatness, 0.0, 1.0);
    }
    f.spectral_flatness.push_back(flatness);
  }
  return f;
}

std::vector<Utterance> segment(const AudioTrace& trace, const SegmenterConfig& cfg) {
  const FrameFeatures f = frame_features(trace, cfg.frame_ms, cfg.hop_ms);
  const std::size_t frames = f.frame_energy.size();
  const double silence_db = median(f.frame_energy) - cfg.silence_offset_db;

  std::vector<bool> voiced(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    voiced[i] = f.frame_energy[i] > silence_db && f.frame_energy[i] > kEnergyFloorDb &&
                f.spectral_flatness[i] < cfg.flatness_threshold;
  }

  // Runs of voiced frames as [first, last] frame indices.
  std::vector<std::pair<std::size_t, std::size_t>> runs;
  for (std::size_t i = 0; i < frames;) {
    if (!voiced[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < frames && voiced[j + 1]) ++j;
    runs.emplace_back(i, j);
    i = j + 1;
  }

  const std::size_t n = trace.samples.size();
  const std::size_t half_hop = f.hop / 2;
  // Each frame stands for the hop-wide slice around its centre.
  auto frame_begin = [&](std::size_t i) {
    const std::size_t centre = i * f.hop + f.frame_length / 2;
    return centre > half_hop ? centre - half_hop : 0;
  };
  auto frame_end = [&](std::size_t i) {
    return std::min(n, i * f.hop + f.frame_length / 2 + (f.hop - half_hop));
  };

  const std::size_t min_gap = ms_to_samples(cfg.min_gap_s * 1e3, trace.sample_rate);
  std::vector<std::pair<std::size_t, std::size_t>> spans;  // half-open sample ranges
  for (const auto& [a, b] : runs) {
    const std::size_t s = frame_begin(a), e = frame_end(b);
    if (!spans.empty() && s - spans.back().second < min_gap) {
      spans.back().second = e;
    } else {
      spans.emplace_back(s, e);
    }
  }

  const auto min_len = static_cast<std::size_t>(
      std::llround(cfg.min_utterance_s * trace.sample_rate));
  std::vector<std::pair<std::size_t, std::size_t>> kept;
  for (const auto& sp : spans) {
    if (sp.second - sp.first >= min_len) kept.push_back(sp);
  }

  // Guard silence: one frame step before, one step plus the trailing guard
  // after. The trailing side wins over the next utterance's leading guard
  // because the decay after voicing is what later stages measure.
  const std::size_t tail = ms_to_samples(cfg.trailing_guard_s * 1e3, trace.sample_rate);
  std::vector<Utterance> out;
  out.reserve(kept.size());
  std::size_t prev_end = 0;
  for (std::size_t u = 0; u < kept.size(); ++u) {
    std::size_t s = kept[u].first, e = kept[u].second;
    std::size_t limit = n;
    if (u + 1 < kept.size()) {
      const std::size_t next = kept[u + 1].first;
      limit = next > e + f.hop ? next - f.hop : e;
    }
    s = s > prev_end + f.hop ? s - f.hop : prev_end;
    e = std::max(e, std::min(limit, e + f.hop + tail));
    prev_end = e;
    Utterance utt;
    utt.sample_rate = trace.sample_rate;
    utt.start_offset = s;
    utt.samples.assign(trace.samples.begin() + static_cast<std::ptrdiff_t>(s),
                       trace.samples.begin() + static_cast<std::ptrdiff_t>(e));
    utt.duration = static_cast<double>(e - s) / trace.sample_rate;
    out.push_back(std::move(utt));
  }
  return out;
}

}  // namespace echoprint
