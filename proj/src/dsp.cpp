#include "echoprint/dsp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

namespace echoprint::dsp {
namespace {

struct FftwBuffer {
  explicit FftwBuffer(std::size_t bytes) : ptr(fftw_malloc(bytes)) {}
  ~FftwBuffer() { fftw_free(ptr); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  void* ptr;
};

struct PlanPair {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

// Plans are created once per size under a lock; execution with the
// new-array interface is thread-safe.
const PlanPair& plans_for(std::size_t n) {
  static std::mutex mu;
  static std::map<std::size_t, PlanPair> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  FftwBuffer real(sizeof(double) * n);
  FftwBuffer cplx(sizeof(fftw_complex) * (n / 2 + 1));
  PlanPair p;
  const int ni = static_cast<int>(n);
  p.forward = fftw_plan_dft_r2c_1d(ni, static_cast<double*>(real.ptr),
                                   static_cast<fftw_complex*>(cplx.ptr),
                                   FFTW_ESTIMATE);
  p.inverse = fftw_plan_dft_c2r_1d(ni, static_cast<fftw_complex*>(cplx.ptr),
                                   static_cast<double*>(real.ptr),
                                   FFTW_ESTIMATE);
  return cache.emplace(n, p).first->second;
}

}  // namespace

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<Complex> rfft(std::span<const double> x, std::size_t n) {
  const PlanPair& plan = plans_for(n);
  FftwBuffer in(sizeof(double) * n);
  FftwBuffer out(sizeof(fftw_complex) * (n / 2 + 1));
  auto* inp = static_cast<double*>(in.ptr);
  const std::size_t m = std::min(n, x.size());
  std::copy_n(x.begin(), m, inp);
  std::fill(inp + m, inp + n, 0.0);
  fftw_execute_dft_r2c(plan.forward, inp, static_cast<fftw_complex*>(out.ptr));
  auto* o = static_cast<fftw_complex*>(out.ptr);
  std::vector<Complex> result(n / 2 + 1);
  for (std::size_t k = 0; k < result.size(); ++k) result[k] = {o[k][0], o[k][1]};
  return result;
}

std::vector<double> irfft(std::span<const Complex> spectrum, std::size_t n) {
  const PlanPair& plan = plans_for(n);
  FftwBuffer in(sizeof(fftw_complex) * (n / 2 + 1));
  FftwBuffer out(sizeof(double) * n);
  auto* c = static_cast<fftw_complex*>(in.ptr);
  for (std::size_t k = 0; k < n / 2 + 1; ++k) {
    const Complex v = k < spectrum.size() ? spectrum[k] : Complex{};
    c[k][0] = v.real();
    c[k][1] = v.imag();
  }
  fftw_execute_dft_c2r(plan.inverse, c, static_cast<double*>(out.ptr));
  const auto* o = static_cast<double*>(out.ptr);
  std::vector<double> result(o, o + n);
  const double scale = 1.0 / static_cast<double>(n);
  for (double& v : result) v *= scale;
  return result;
}

std::vector<double> hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                static_cast<double>(n));
  }
  return w;
}

std::vector<double> fft_convolve(std::span<const double> a,
                                 std::span<const double> b) {
  if (a.empty() || b.empty()) return {};
  const std::size_t out_len = a.size() + b.size() - 1;
  // Direct form is faster and exact for short kernels.
  if (std::min(a.size(), b.size()) <= 64) {
    std::vector<double> y(out_len, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] == 0.0) continue;
      for (std::size_t j = 0; j < b.size(); ++j) y[i + j] += a[i] * b[j];
    }
    return y;
  }
  const std::size_t n = next_pow2(out_len);
  auto fa = rfft(a, n);
  const auto fb = rfft(b, n);
  for (std::size_t k = 0; k < fa.size(); ++k) fa[k] *= fb[k];
  auto y = irfft(fa, n);
  y.resize(out_len);
  return y;
}

double to_db(double power_ratio) {
  return 10.0 * std::log10(std::max(power_ratio, 1e-300));
}

}  // namespace echoprint::dsp
