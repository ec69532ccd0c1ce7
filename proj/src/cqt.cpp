#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <tuple>

#include "echoprint/dsp.hpp"
#include "echoprint/error.hpp"
#include "echoprint/fingerprint.hpp"

namespace echoprint {
namespace {

using dsp::Complex;
constexpr double kPi = std::numbers::pi;

// Sum_{n<N} exp(-i d n).
Complex dirichlet(double d, double N) {
  const double half = 0.5 * d;
  const double s = std::sin(half);
  const Complex phase = std::polar(1.0, -half * (N - 1.0));
  if (std::abs(s) < 1e-12) return Complex(N, 0.0);  // d is a multiple of 2*pi
  return phase * (std::sin(N * half) / s);
}

// Frequency response of (1/N) * hann[n] * exp(+i w_k n) at angular frequency w.
Complex kernel_response(double w, double wk, double N) {
  const double d = w - wk;
  const double step = 2.0 * kPi / N;
  const Complex v = 0.5 * dirichlet(d, N) - 0.25 * dirichlet(d - step, N) -
                    0.25 * dirichlet(d + step, N);
  return v / N;
}

struct KernelBank {
  std::vector<double> centers;
  std::vector<double> bandwidths;
  std::vector<std::size_t> first_bin;           // per kernel
  std::vector<std::vector<double>> weights;     // |G_k|^2 over its support
  std::size_t max_length = 0;
};

struct BankKey {
  int rate;
  std::size_t nfft;
  double f_min, f_max;
  int bpo;
  bool operator<(const BankKey& o) const {
    return std::tie(rate, nfft, f_min, f_max, bpo) <
           std::tie(o.rate, o.nfft, o.f_min, o.f_max, o.bpo);
  }
};

struct Layout {
  std::vector<double> centers;
  std::vector<std::size_t> lengths;
  std::size_t max_length = 0;
};

Layout make_layout(int rate, double f_min, int bins, int bpo) {
  const double q = 1.0 / (std::pow(2.0, 1.0 / bpo) - 1.0);
  Layout l;
  for (int k = 0; k < bins; ++k) {
    const double fk = f_min * std::pow(2.0, static_cast<double>(k) / bpo);
    const auto len = static_cast<std::size_t>(std::llround(q * rate / fk));
    l.centers.push_back(fk);
    l.lengths.push_back(len);
    l.max_length = std::max(l.max_length, len);
  }
  return l;
}

// Kernel spectra are sampled on the FFT grid of each signal length; the bank
// is cached per (rate, nfft, layout) since signals share a handful of sizes.
std::shared_ptr<const KernelBank> kernel_bank(const BankKey& key, const Layout& layout) {
  static std::mutex mu;
  static std::map<BankKey, std::shared_ptr<const KernelBank>> cache;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  auto bank = std::make_shared<KernelBank>();
  bank->centers = layout.centers;
  bank->max_length = layout.max_length;
  const double nfft = static_cast<double>(key.nfft);
  const std::size_t half = key.nfft / 2;
  // Sixteen main-lobe half widths either side: Hann side lobes are below
  // -80 dB there.
  constexpr double kSupport = 16.0;
  for (std::size_t k = 0; k < layout.centers.size(); ++k) {
    const double N = static_cast<double>(layout.lengths[k]);
    const double wk = 2.0 * kPi * layout.centers[k] / key.rate;
    bank->bandwidths.push_back(key.rate / N);
    const double reach = kSupport * 2.0 * kPi / N;
    const double lo = std::max(0.0, (wk - reach) / (2.0 * kPi) * nfft);
    const double hi = std::min(static_cast<double>(half), (wk + reach) / (2.0 * kPi) * nfft);
    const auto m0 = static_cast<std::size_t>(std::floor(lo));
    const auto m1 = static_cast<std::size_t>(std::ceil(hi));
    std::vector<double> w;
    w.reserve(m1 - m0 + 1);
    for (std::size_t m = m0; m <= m1; ++m) {
      const double wm = 2.0 * kPi * static_cast<double>(m) / nfft;
      w.push_back(std::norm(kernel_response(wm, wk, N)));
    }
    bank->first_bin.push_back(m0);
    bank->weights.push_back(std::move(w));
  }
  std::lock_guard<std::mutex> lock(mu);
  return cache.emplace(key, std::move(bank)).first->second;
}

}  // namespace

int cqt_bin_count(double f_min, double f_max, int bins_per_octave) {
  if (!(f_min < f_max)) throw ConfigError("cqt: f_min must be below f_max");
  if (bins_per_octave < 1) throw ConfigError("cqt: bins_per_octave must be positive");
  // A tiny slack keeps exact octave ranges from gaining a spurious bin.
  return static_cast<int>(std::ceil(bins_per_octave * std::log2(f_max / f_min) - 1e-9));
}

CqtSpectrum cqt(const AudioTrace& signal, double f_min, double f_max, int bins_per_octave) {
  const int bins = cqt_bin_count(f_min, f_max, bins_per_octave);
  if (f_min < 20.0) throw ConfigError("cqt: f_min must be >= 20 Hz");
  if (f_max > signal.sample_rate / 2.0) throw ConfigError("cqt: f_max above Nyquist");

  const Layout layout = make_layout(signal.sample_rate, f_min, bins, bins_per_octave);
  CqtSpectrum out;
  out.bins.assign(static_cast<std::size_t>(bins), 0.0);
  out.center_freqs = layout.centers;
  out.bins_per_octave = bins_per_octave;
  out.f_min = f_min;
  out.f_max = f_max;
  out.bandwidths.reserve(layout.lengths.size());
  for (std::size_t len : layout.lengths) {
    out.bandwidths.push_back(static_cast<double>(signal.sample_rate) / static_cast<double>(len));
  }

  const std::size_t L = signal.samples.size();
  if (L == 0) return out;
  bool silent = true;
  for (double v : signal.samples) {
    if (v != 0.0) {
      silent = false;
      break;
    }
  }
  if (silent) return out;

  // Linear convolution of the whole signal with each kernel, measured through
  // Parseval on a zero-padded FFT.
  const std::size_t nfft = dsp::next_pow2(L + layout.max_length);
  const auto bank = kernel_bank({signal.sample_rate, nfft, f_min, f_max, bins_per_octave}, layout);
  const auto X = dsp::rfft(signal.samples, nfft);
  std::vector<double> power(X.size());
  for (std::size_t m = 0; m < X.size(); ++m) power[m] = std::norm(X[m]);

  const double norm = 1.0 / (static_cast<double>(nfft) * static_cast<double>(L));
  for (std::size_t k = 0; k < out.bins.size(); ++k) {
    const auto& w = bank->weights[k];
    const std::size_t m0 = bank->first_bin[k];
    double acc = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) acc += power[m0 + j] * w[j];
    out.bins[k] = acc * norm;
  }
  return out;
}

}  // namespace echoprint
