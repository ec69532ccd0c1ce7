#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace echoprint {

inline constexpr int kCanonicalRate = 16000;

// Single-channel audio at full scale +/-1.0.
struct AudioTrace {
  std::vector<double> samples;
  int sample_rate = kCanonicalRate;
  std::string label;

  std::size_t size() const { return samples.size(); }
  double duration() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

// A voiced stretch of a parent trace, guard frames included.
struct Utterance {
  std::vector<double> samples;
  int sample_rate = kCanonicalRate;
  std::size_t start_offset = 0;  // sample index in the parent trace
  double duration = 0.0;         // seconds
};

// Chunk-amplitude matrix: one row per utterance, one column per interval.
// Entries are dB relative to full scale, shifted so that the floor maps to 0.
struct TraceMatrix {
  Eigen::MatrixXd values;
  std::vector<std::size_t> row_lengths;  // sample count of each source utterance
};

bool is_supported_rate(int rate);

// Throws DataError when samples are non-finite, empty or exceed full scale,
// or when the rate is unsupported.
void validate(const AudioTrace& trace);

AudioTrace read_wav(const std::filesystem::path& path);

// 16-bit PCM mono. Samples are rounded to the nearest 1/32768 step and
// clipped to the representable range.
void write_wav(const std::filesystem::path& path, const AudioTrace& trace);

AudioTrace resample(const AudioTrace& trace, int target_rate);

// Amplitude to shifted dB: 20*log10(max(|a|, 1e-6)) + 120.
double amplitude_to_db(double amplitude);
double db_to_amplitude(double db);

// Half-open sample ranges for splitting `length` samples into `intervals`
// slots. Utterances shorter than the interval count get one-sample slots.
std::vector<std::pair<std::size_t, std::size_t>> interval_bounds(
    std::size_t length, int intervals);

TraceMatrix build_trace_matrix(std::span<const Utterance> utterances,
                               int intervals);

// Utility shared by several stages.
double peak_abs(std::span<const double> x);
double energy(std::span<const double> x);

}  // namespace echoprint
