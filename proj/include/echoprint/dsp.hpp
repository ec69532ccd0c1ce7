#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace echoprint::dsp {

using Complex = std::complex<double>;

std::size_t next_pow2(std::size_t n);

// Real-input FFT of `x` zero-padded to `n` points. Returns n/2+1 bins.
std::vector<Complex> rfft(std::span<const double> x, std::size_t n);

// Inverse of rfft; returns n real samples (scaled by 1/n).
std::vector<double> irfft(std::span<const Complex> spectrum, std::size_t n);

// Periodic Hann window (sums to a constant at 50 % overlap).
std::vector<double> hann(std::size_t n);

// Full linear convolution via FFT. Length a.size() + b.size() - 1.
std::vector<double> fft_convolve(std::span<const double> a,
                                 std::span<const double> b);

double to_db(double power_ratio);

}  // namespace echoprint::dsp
