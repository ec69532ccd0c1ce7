#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "echoprint/audio.hpp"
#include "echoprint/decomposition.hpp"

namespace echoprint {

struct CqtConfig {
  double f_min = 50.0;
  double f_max = 2000.0;
  int bins_per_octave = 24;
};

struct CqtSpectrum {
  std::vector<double> bins;          // mean power per band
  std::vector<double> center_freqs;  // Hz
  std::vector<double> bandwidths;    // Hz, sample_rate / window length
  int bins_per_octave = 0;
  double f_min = 0.0;
  double f_max = 0.0;
};

int cqt_bin_count(double f_min, double f_max, int bins_per_octave);

// Mean power of the signal through each constant-Q kernel (Hann-windowed
// complex exponential whose length is Q periods of the centre frequency).
CqtSpectrum cqt(const AudioTrace& signal, double f_min, double f_max, int bins_per_octave);
inline CqtSpectrum cqt(const AudioTrace& signal, const CqtConfig& cfg) {
  return cqt(signal, cfg.f_min, cfg.f_max, cfg.bins_per_octave);
}

struct NoiseSuppressorConfig {
  double frame_ms = 32.0;          // 50 % overlap
  double noise_quantile = 0.1;     // lowest-energy share of frames used as noise
  double smoothing = 0.98;         // decision-directed a-priori SNR weight
  double gain_floor = 0.1;
  bool harmonic_regeneration = true;
  double regeneration_mix = 0.5;   // weight of the first-pass estimate in pass two
};

// Noise power spectrum (frame_ms frames, 50 % overlap) averaged over the
// lowest-energy `noise_quantile` share of frames pooled from all signals.
std::vector<double> estimate_noise_psd(std::span<const std::vector<double>> signals,
                                       int sample_rate, const NoiseSuppressorConfig& cfg);

std::vector<double> suppress_noise(std::span<const double> signal, int sample_rate,
                                   std::span<const double> noise_psd,
                                   const NoiseSuppressorConfig& cfg);

// Two-pass Wiener suppression with harmonic regeneration. Without a noise
// profile the noise spectrum comes from the quietest frames of `signal`.
AudioTrace suppress_noise(const AudioTrace& signal,
                          const std::optional<AudioTrace>& noise_profile = std::nullopt,
                          const NoiseSuppressorConfig& cfg = {});

struct FingerprintVector {
  std::string label;
  std::vector<double> p;
  std::vector<bool> band_mask;
  int n_segments = 0;

  std::size_t size() const { return p.size(); }
};

// P_ij = R_ij / D_ij where D_ij exceeds eps_rel times the total direct
// power, else 0; p_j = sum_i P_ij.
FingerprintVector normalize_and_aggregate(std::span<const CqtSpectrum> R,
                                          std::span<const CqtSpectrum> D,
                                          double eps_rel = 1e-8);

// How each utterance is split into its direct and reverberant parts.
enum class Separation {
  // Direct: everything up to the voicing offset (the end of the last
  // envelope window within offset_drop_db of the loudest one). Reverberant: the
  // free decay from tail_skip_s after the offset to the end of the utterance.
  kVoicingOffset,
  // Per-interval soft split from the deep NMF regenerations O' and its
  // complement, applied as time-varying gains.
  kDecomposition,
};

std::string to_string(Separation s);
Separation separation_from_string(const std::string& s);

// End of the last window_ms energy window within drop_db of the loudest
// window; the whole signal when it is shorter than one window.
std::size_t voicing_offset(std::span<const double> x, int sample_rate, double window_ms, double drop_db);

struct FingerprintConfig {
  CqtConfig cqt;
  NoiseSuppressorConfig noise;
  bool suppress = true;
  int intervals = 512;
  Separation separation = Separation::kVoicingOffset;
  double offset_window_ms = 10.0;
  double offset_drop_db = 10.0;
  double tail_skip_s = 0.1;
  DecompositionConfig decomposition;
  double eps_direct = 1e-8;
};

// Separated components of one utterance, in the time domain.
struct SeparatedUtterance {
  std::vector<double> reverberant;
  std::vector<double> direct;
};

struct FingerprintDetails {
  TraceMatrix trace_matrix;
  DecompositionResult decomposition;   // empty unless Separation::kDecomposition
  std::vector<std::size_t> offsets;    // voicing offset per utterance, samples
  std::vector<SeparatedUtterance> separated;
  std::vector<CqtSpectrum> R;
  std::vector<CqtSpectrum> D;
};

FingerprintVector fingerprint_utterances(std::span<const Utterance> utterances,
                                         const FingerprintConfig& cfg = {},
                                         FingerprintDetails* details = nullptr);

// CSV with header label,band_0..band_{B-1},band_mask_hex,n_segments; values
// use 17 significant digits so a read-back is exact. Bit j of the mask hex
// (little-endian nibbles written most significant first) is band j.
std::string band_mask_to_hex(const std::vector<bool>& mask);
std::vector<bool> band_mask_from_hex(const std::string& hex, std::size_t bands);
void write_fingerprints(const std::filesystem::path& path, std::span<const FingerprintVector> rows);
std::vector<FingerprintVector> read_fingerprints(const std::filesystem::path& path);

// Reverberation time from a decay curve: Schroeder backward integration and a
// straight-line fit to the -5..-25 dB stretch, extrapolated to -60 dB.
// Returns 0 when the curve never decays by 25 dB.
double estimate_rt60(std::span<const double> impulse_response, int sample_rate);

// Blind estimate from running speech: median of the decay slopes fitted to
// the energy envelope just after each voicing offset.
double estimate_rt60_blind(std::span<const Utterance> utterances);

}  // namespace echoprint
