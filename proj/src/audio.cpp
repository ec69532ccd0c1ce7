#include "echoprint/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>

#include "echoprint/error.hpp"

namespace echoprint {
namespace {

constexpr double kDbFloorAmplitude = 1e-6;
constexpr double kDbShift = 120.0;

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace

bool is_supported_rate(int rate) {
  return rate == 8000 || rate == 16000 || rate == 44100 || rate == 48000;
}

void validate(const AudioTrace& trace) {
  if (!is_supported_rate(trace.sample_rate)) {
    throw DataError("unsupported sample rate " + std::to_string(trace.sample_rate));
  }
  if (trace.samples.empty()) throw DataError("audio trace is empty");
  for (double s : trace.samples) {
    if (!std::isfinite(s)) throw DataError("audio trace contains non-finite samples");
    if (std::abs(s) > 1.0) throw DataError("audio trace exceeds full scale");
  }
}

AudioTrace read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const std::string where = " in " + path.string();
  if (bytes.size() < 12 || std::string(bytes.begin(), bytes.begin() + 4) != "RIFF" ||
      std::string(bytes.begin() + 8, bytes.begin() + 12) != "WAVE") {
    throw FormatError("missing RIFF/WAVE header" + where);
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string id(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                         bytes.begin() + static_cast<std::ptrdiff_t>(pos) + 4);
    const std::uint32_t size = read_u32(&bytes[pos + 4]);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) {
      // Some writers leave a bogus data size; clamp the final chunk.
      if (id != "data") throw FormatError("truncated '" + id + "' chunk" + where);
    }
    const std::size_t avail = std::min<std::size_t>(size, bytes.size() - body);
    if (id == "fmt ") {
      if (avail < 16) throw FormatError("short fmt chunk" + where);
      format = read_u16(&bytes[body]);
      channels = read_u16(&bytes[body + 2]);
      rate = read_u32(&bytes[body + 4]);
      bits = read_u16(&bytes[body + 14]);
      if (format == kFormatExtensible) {
        if (avail < 26) throw FormatError("short extensible fmt chunk" + where);
        format = read_u16(&bytes[body + 24]);
      }
      have_fmt = true;
    } else if (id == "data") {
      data = &bytes[body];
      data_size = avail;
    }
    pos = body + size + (size & 1u);
  }
  if (!have_fmt) throw FormatError("missing fmt chunk" + where);
  if (data == nullptr) throw FormatError("missing data chunk" + where);
  if (format != kFormatPcm || bits != 16) {
    throw UnsupportedCodecError("only 16-bit linear PCM is supported (format " +
                                std::to_string(format) + ", " +
                                std::to_string(bits) + " bits)" + where);
  }
  if (channels != 1 && channels != 2) {
    throw UnsupportedCodecError("only mono or stereo is supported" + where);
  }
  if (!is_supported_rate(static_cast<int>(rate))) {
    throw UnsupportedCodecError("unsupported sample rate " + std::to_string(rate) + where);
  }

  const std::size_t frame_bytes = 2u * channels;
  const std::size_t frames = data_size / frame_bytes;
  AudioTrace trace;
  trace.sample_rate = static_cast<int>(rate);
  trace.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    const unsigned char* p = data + i * frame_bytes;
    if (channels == 1) {
      trace.samples[i] = static_cast<std::int16_t>(read_u16(p)) / 32768.0;
    } else {
      const double l = static_cast<std::int16_t>(read_u16(p)) / 32768.0;
      const double r = static_cast<std::int16_t>(read_u16(p + 2)) / 32768.0;
      trace.samples[i] = 0.5 * (l + r);
    }
  }
  if (frames == 0) throw FormatError("no audio frames" + where);
  return trace;
}

void write_wav(const std::filesystem::path& path, const AudioTrace& trace) {
  if (!is_supported_rate(trace.sample_rate)) {
    throw DataError("unsupported sample rate " + std::to_string(trace.sample_rate));
  }
  const auto n = static_cast<std::uint32_t>(trace.samples.size());
  std::string out;
  out.reserve(44 + 2 * trace.samples.size());
  out += "RIFF";
  put_u32(out, 36 + 2 * n);
  out += "WAVE";
  out += "fmt ";
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(trace.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(trace.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, 2 * n);
  for (double s : trace.samples) {
    double q = std::round(s * 32768.0);
    q = std::clamp(q, -32768.0, 32767.0);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

AudioTrace resample(const AudioTrace& trace, int target_rate) {
  if (!is_supported_rate(target_rate) || !is_supported_rate(trace.sample_rate)) {
    throw ConfigError("resample: unsupported rate");
  }
  if (target_rate == trace.sample_rate) return trace;

  const int g = std::gcd(trace.sample_rate, target_rate);
  const long up = target_rate / g;
  const long down = trace.sample_rate / g;
  const std::size_t in_len = trace.samples.size();
  const auto out_len = static_cast<std::size_t>(
      std::llround(static_cast<double>(in_len) * target_rate / trace.sample_rate));

  // Kaiser-windowed sinc; cutoff just below the lower Nyquist frequency.
  constexpr double kBeta = 8.6;
  constexpr double kZeroCrossings = 32.0;
  const double rho = 0.94 * std::min(1.0, static_cast<double>(up) / static_cast<double>(down));
  const double half_width = kZeroCrossings / rho;
  const long taps_each_side = static_cast<long>(std::ceil(half_width));
  const double i0_beta = std::cyl_bessel_i(0.0, kBeta);

  auto kernel = [&](double tau) {
    if (std::abs(tau) >= half_width) return 0.0;
    const double x = rho * tau;
    const double sinc = x == 0.0 ? 1.0 : std::sin(M_PI * x) / (M_PI * x);
    const double r = tau / half_width;
    const double w = std::cyl_bessel_i(0.0, kBeta * std::sqrt(1.0 - r * r)) / i0_beta;
    return rho * sinc * w;
  };

  // One tap table per output phase.
  const std::size_t width = static_cast<std::size_t>(2 * taps_each_side + 1);
  std::vector<double> table(static_cast<std::size_t>(up) * width);
  for (long phase = 0; phase < up; ++phase) {
    const double frac = static_cast<double>(phase) / static_cast<double>(up);
    for (long j = -taps_each_side; j <= taps_each_side; ++j) {
      table[static_cast<std::size_t>(phase) * width +
            static_cast<std::size_t>(j + taps_each_side)] = kernel(frac - static_cast<double>(j));
    }
  }

  AudioTrace out;
  out.sample_rate = target_rate;
  out.label = trace.label;
  out.samples.assign(out_len, 0.0);
  const auto& x = trace.samples;
  for (std::size_t n = 0; n < out_len; ++n) {
    const long long num = static_cast<long long>(n) * down;
    const long base = static_cast<long>(num / up);
    const long phase = static_cast<long>(num % up);
    const double* taps = &table[static_cast<std::size_t>(phase) * width];
    double acc = 0.0;
    for (long j = -taps_each_side; j <= taps_each_side; ++j) {
      const long k = base + j;
      if (k < 0 || k >= static_cast<long>(in_len)) continue;
      acc += x[static_cast<std::size_t>(k)] * taps[j + taps_each_side];
    }
    out.samples[n] = acc;
  }
  return out;
}

double amplitude_to_db(double amplitude) {
  return 20.0 * std::log10(std::max(std::abs(amplitude), kDbFloorAmplitude)) + kDbShift;
}

double db_to_amplitude(double db) { return std::pow(10.0, (db - kDbShift) / 20.0); }

std::vector<std::pair<std::size_t, std::size_t>> interval_bounds(std::size_t length,
                                                                 int intervals) {
  std::vector<std::pair<std::size_t, std::size_t>> bounds;
  if (length == 0 || intervals <= 0) return bounds;
  const auto t = static_cast<std::size_t>(intervals);
  bounds.reserve(t);
  for (std::size_t j = 0; j < t; ++j) {
    std::size_t a = j * length / t;
    std::size_t b = (j + 1) * length / t;
    if (a >= length) a = length - 1;
    if (b <= a) b = a + 1;
    bounds.emplace_back(a, b);
  }
  return bounds;
}

TraceMatrix build_trace_matrix(std::span<const Utterance> utterances, int intervals) {
  if (utterances.empty()) throw EmptyInputError("build_trace_matrix: no utterances");
  if (intervals < 8) throw ConfigError("build_trace_matrix: need at least 8 intervals");
  TraceMatrix m;
  m.values.resize(static_cast<Eigen::Index>(utterances.size()), intervals);
  m.row_lengths.reserve(utterances.size());
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    const auto& x = utterances[i].samples;
    if (x.empty()) throw EmptyInputError("build_trace_matrix: empty utterance");
    const auto bounds = interval_bounds(x.size(), intervals);
    for (std::size_t j = 0; j < bounds.size(); ++j) {
      double sum = 0.0;
      for (std::size_t s = bounds[j].first; s < bounds[j].second; ++s) sum += std::abs(x[s]);
      const double mean = sum / static_cast<double>(bounds[j].second - bounds[j].first);
      m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          amplitude_to_db(mean);
    }
    m.row_lengths.push_back(x.size());
  }
  return m;
}

double peak_abs(std::span<const double> x) {
  double p = 0.0;
  for (double v : x) p = std::max(p, std::abs(v));
  return p;
}

double energy(std::span<const double> x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

}  // namespace echoprint
