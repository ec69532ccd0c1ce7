#include "echoprint/fingerprint.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "echoprint/error.hpp"

namespace echoprint {
namespace {

// Per-sample gain from per-interval values, linearly interpolated between
// interval centres and held flat beyond the first and last centre.
std::vector<double> interpolate_gain(std::span<const double> per_interval, std::size_t length,
                                     int intervals) {
  const auto bounds = interval_bounds(length, intervals);
  std::vector<double> centres(bounds.size());
  for (std::size_t j = 0; j < bounds.size(); ++j) {
    centres[j] = 0.5 * static_cast<double>(bounds[j].first + bounds[j].second - 1);
  }
  std::vector<double> g(length);
  std::size_t j = 0;
  for (std::size_t s = 0; s < length; ++s) {
    const double t = static_cast<double>(s);
    while (j + 1 < centres.size() && centres[j + 1] <= t) ++j;
    if (t <= centres.front()) {
      g[s] = per_interval.front();
    } else if (j + 1 >= centres.size()) {
      g[s] = per_interval.back();
    } else {
      const double span = centres[j + 1] - centres[j];
      const double a = span > 0.0 ? (t - centres[j]) / span : 0.0;
      g[s] = (1.0 - a) * per_interval[j] + a * per_interval[j + 1];
    }
  }
  return g;
}

// Least-squares slope of y over x.
double fit_slope(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

}  // namespace

std::size_t voicing_offset(std::span<const double> x, int sample_rate, double window_ms, double drop_db) {
  const auto hop = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(window_ms * 1e-3 * sample_rate)));
  std::vector<double> env;
  for (std::size_t a = 0; a + hop <= x.size(); a += hop) {
    double e = 0.0;
    for (std::size_t k = a; k < a + hop; ++k) e += x[k] * x[k];
    env.push_back(10.0 * std::log10(e / static_cast<double>(hop) + 1e-20));
  }
  if (env.empty()) return x.size();
  const double peak = *std::max_element(env.begin(), env.end());
  std::size_t last = 0;
  for (std::size_t j = 0; j < env.size(); ++j) {
    if (env[j] >= peak - drop_db) last = j;
  }
  return (last + 1) * hop;
}

std::string to_string(Separation s) {
  return s == Separation::kDecomposition ? "decomposition" : "voicing_offset";
}

Separation separation_from_string(const std::string& s) {
  if (s == "decomposition") return Separation::kDecomposition;
  if (s == "voicing_offset") return Separation::kVoicingOffset;
  throw ConfigError("unknown separation '" + s + "'");
}

FingerprintVector normalize_and_aggregate(std::span<const CqtSpectrum> R,
                                          std::span<const CqtSpectrum> D, double eps_rel) {
  if (R.size() != D.size()) throw ShapeError("normalize_and_aggregate: R/D segment count differs");
  if (R.empty()) throw EmptyInputError("normalize_and_aggregate: no segments");
  const std::size_t bands = R.front().bins.size();
  double total_direct = 0.0;
  for (std::size_t i = 0; i < R.size(); ++i) {
    if (R[i].bins.size() != bands || D[i].bins.size() != bands ||
        R[i].center_freqs != D[i].center_freqs) {
      throw ShapeError("normalize_and_aggregate: mismatched bin layouts");
    }
    total_direct += std::accumulate(D[i].bins.begin(), D[i].bins.end(), 0.0);
  }
  const double eps = eps_rel * total_direct;

  FingerprintVector fp;
  fp.p.assign(bands, 0.0);
  fp.band_mask.assign(bands, false);
  fp.n_segments = static_cast<int>(R.size());
  for (std::size_t i = 0; i < R.size(); ++i) {
    for (std::size_t j = 0; j < bands; ++j) {
      const double d = D[i].bins[j];
      if (d > eps && d > 0.0) {
        fp.p[j] += R[i].bins[j] / d;
        fp.band_mask[j] = true;
      }
    }
  }
  return fp;
}

FingerprintVector fingerprint_utterances(std::span<const Utterance> utterances,
                                         const FingerprintConfig& cfg,
                                         FingerprintDetails* details) {
  if (utterances.empty()) throw EmptyInputError("fingerprint: no utterances");
  const int rate = utterances.front().sample_rate;

  // A common reference level makes everything downstream of this point,
  // including the dB trace matrix, independent of the input gain.
  double peak = 0.0;
  for (const auto& u : utterances) {
    if (u.sample_rate != rate) throw ConfigError("fingerprint: mixed sample rates");
    peak = std::max(peak, peak_abs(u.samples));
  }
  if (peak == 0.0) throw NoFingerprintError("fingerprint: all utterances are silent");

  std::vector<std::vector<double>> signals;
  signals.reserve(utterances.size());
  for (const auto& u : utterances) {
    std::vector<double> x(u.samples);
    for (double& v : x) v /= peak;
    signals.push_back(std::move(x));
  }

  if (cfg.suppress) {
    const auto psd = estimate_noise_psd(signals, rate, cfg.noise);
    for (auto& x : signals) x = suppress_noise(x, rate, psd, cfg.noise);
  }

  std::vector<Utterance> cleaned(utterances.begin(), utterances.end());
  for (std::size_t i = 0; i < cleaned.size(); ++i) cleaned[i].samples = signals[i];
  const TraceMatrix O = build_trace_matrix(cleaned, cfg.intervals);

  std::vector<CqtSpectrum> R, D;
  std::vector<SeparatedUtterance> separated;
  std::vector<std::size_t> offsets;
  DecompositionResult dec;
  bool any_reverberant = false;
  if (cfg.separation == Separation::kDecomposition) dec = deep_decompose(O, cfg.decomposition);

  for (std::size_t i = 0; i < signals.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const auto& x = signals[i];
    AudioTrace rev, dir;
    rev.sample_rate = dir.sample_rate = rate;
    rev.samples.assign(x.size(), 0.0);
    dir.samples.assign(x.size(), 0.0);

    if (cfg.separation == Separation::kDecomposition) {
      std::vector<double> g_rev(static_cast<std::size_t>(cfg.intervals));
      std::vector<double> g_dir(g_rev.size());
      for (Eigen::Index j = 0; j < O.values.cols(); ++j) {
        const double r = dec.reverberant(row, j);
        const double d = dec.direct(row, j);
        const double sum = r + d;
        g_rev[static_cast<std::size_t>(j)] = sum > 0.0 ? r / sum : 0.0;
        g_dir[static_cast<std::size_t>(j)] = sum > 0.0 ? d / sum : 0.0;
      }
      const auto wr = interpolate_gain(g_rev, x.size(), cfg.intervals);
      const auto wd = interpolate_gain(g_dir, x.size(), cfg.intervals);
      for (std::size_t s = 0; s < x.size(); ++s) {
        rev.samples[s] = x[s] * wr[s];
        dir.samples[s] = x[s] * wd[s];
      }
    } else {
      const std::size_t offset = voicing_offset(x, rate, cfg.offset_window_ms, cfg.offset_drop_db);
      const std::size_t tail_start =
          std::min(x.size(), offset + static_cast<std::size_t>(std::llround(cfg.tail_skip_s * rate)));
      std::copy(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(offset), dir.samples.begin());
      std::copy(x.begin() + static_cast<std::ptrdiff_t>(tail_start), x.end(),
                rev.samples.begin() + static_cast<std::ptrdiff_t>(tail_start));
      offsets.push_back(offset);
    }
    any_reverberant = any_reverberant || std::any_of(rev.samples.begin(), rev.samples.end(),
                                                     [](double v) { return v != 0.0; });
    R.push_back(cqt(rev, cfg.cqt));
    D.push_back(cqt(dir, cfg.cqt));
    if (details != nullptr) {
      separated.push_back({std::move(rev.samples), std::move(dir.samples)});
    }
  }
  if (!any_reverberant) throw NoFingerprintError("fingerprint: no reverberant component found");

  FingerprintVector fp = normalize_and_aggregate(R, D, cfg.eps_direct);
  if (details != nullptr) {
    details->trace_matrix = O;
    details->decomposition = std::move(dec);
    details->offsets = std::move(offsets);
    details->separated = std::move(separated);
    details->R = std::move(R);
    details->D = std::move(D);
  }
  return fp;
}

double estimate_rt60(std::span<const double> ir, int sample_rate) {
  if (ir.empty()) return 0.0;
  // Schroeder energy decay curve.
  std::vector<double> edc(ir.size());
  double acc = 0.0;
  for (std::size_t i = ir.size(); i-- > 0;) {
    acc += ir[i] * ir[i];
    edc[i] = acc;
  }
  if (acc <= 0.0) return 0.0;
  std::vector<double> x, y;
  for (std::size_t i = 0; i < edc.size(); ++i) {
    const double db = 10.0 * std::log10(std::max(edc[i] / acc, 1e-300));
    if (db > -5.0) continue;
    if (db < -25.0) break;
    x.push_back(static_cast<double>(i) / sample_rate);
    y.push_back(db);
  }
  if (x.size() < 2) return 0.0;
  const double slope = fit_slope(x, y);
  return slope < 0.0 ? -60.0 / slope : 0.0;
}

double estimate_rt60_blind(std::span<const Utterance> utterances) {
  std::vector<double> estimates;
  for (const auto& u : utterances) {
    const auto hop = static_cast<std::size_t>(u.sample_rate / 100);  // 10 ms
    if (hop == 0 || u.samples.size() < 8 * hop) continue;
    std::vector<double> env;
    for (std::size_t s = 0; s + hop <= u.samples.size(); s += hop) {
      double e = 0.0;
      for (std::size_t k = s; k < s + hop; ++k) e += u.samples[k] * u.samples[k];
      env.push_back(10.0 * std::log10(std::max(e / static_cast<double>(hop), 1e-12)));
    }
    // Decay after the loudest frame of the final third (the last voicing offset).
    const std::size_t from = env.size() * 2 / 3;
    const auto peak = static_cast<std::size_t>(
        std::max_element(env.begin() + static_cast<std::ptrdiff_t>(from), env.end()) - env.begin());
    std::vector<double> x, y;
    for (std::size_t i = peak; i < env.size(); ++i) {
      const double rel = env[i] - env[peak];
      if (rel > -5.0) continue;
      if (rel < -25.0) break;
      x.push_back(static_cast<double>(i) * 0.01);
      y.push_back(env[i]);
    }
    if (x.size() < 3) continue;
    const double slope = fit_slope(x, y);
    if (slope < 0.0) estimates.push_back(-60.0 / slope);
  }
  if (estimates.empty()) return 0.0;
  std::nth_element(estimates.begin(), estimates.begin() + static_cast<std::ptrdiff_t>(estimates.size() / 2),
                   estimates.end());
  return estimates[estimates.size() / 2];
}

}  // namespace echoprint
