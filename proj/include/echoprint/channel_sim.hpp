#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "echoprint/audio.hpp"
#include "echoprint/manifest.hpp"

namespace echoprint {

inline constexpr double kSpeedOfSound = 343.0;  // m/s at 20 C

using Vec3 = std::array<double, 3>;

// Surfaces ordered x=0, x=L, y=0, y=W, z=0 (floor), z=H (ceiling).
struct RoomSpec {
  Vec3 dims{};
  std::array<double, 6> surface_coeffs{};  // pressure reflection coefficients
  Vec3 source_pos{};
  Vec3 mic_pos{};
  int max_order = 10;
  std::string label;
};

struct ImpulseResponse {
  std::vector<double> taps;
  int sample_rate = kCanonicalRate;
  double rt60_est = 0.0;
};

// Throws DegenerateGeometryError / ConfigError on invalid specs.
void validate(const RoomSpec& room);

ImpulseResponse image_source_ir(const RoomSpec& room, int sample_rate);

// Linear convolution without normalisation.
std::vector<double> convolve_raw(std::span<const double> dry, std::span<const double> ir);

// Linear convolution, peak-normalised to +/-1.
AudioTrace convolve(const AudioTrace& dry, const ImpulseResponse& ir);

enum class CodecMode { kNarrowband, kMediumband, kWideband, kSuperwideband };

std::string to_string(CodecMode mode);
CodecMode codec_mode_from_string(const std::string& s);

// Passband of each mode before capping at Nyquist; the upper edge is
// infinite for superwideband (high-pass only).
std::pair<double, double> codec_passband(CodecMode mode);

AudioTrace codec_emulate(const AudioTrace& trace, CodecMode mode);

enum class Concealment { kRepeatSpectrum, kSilence };

std::string to_string(Concealment c);
Concealment concealment_from_string(const std::string& s);

struct LossProfile {
  double loss_rate = 0.0;
  double frame_ms = 20.0;
  Concealment concealment = Concealment::kRepeatSpectrum;
  std::uint64_t seed = 1;
};

struct LossStats {
  std::size_t frames = 0;
  std::size_t dropped = 0;
};

AudioTrace lossy_channel(const AudioTrace& trace, const LossProfile& profile,
                         LossStats* stats = nullptr);

// Energy reflection values of common surface materials.
struct MaterialTable {
  std::map<std::string, double> energy_reflection;

  static MaterialTable defaults();
  static MaterialTable load(const std::filesystem::path& path);
  double pressure_coeff(const std::string& material) const;
};

// Deterministic speech-like source: voiced syllables (harmonic complex
// through formant resonators) and fricative bursts, grouped into
// utterances separated by pauses.
struct SpeakerProfile {
  double f0 = 120.0;               // Hz
  std::array<double, 3> formants{500.0, 1500.0, 2500.0};
};

AudioTrace synthesize_speech(const SpeakerProfile& speaker, double duration_s,
                             std::uint64_t seed, int sample_rate = kCanonicalRate);

// Mixed voices, one per entry.
std::vector<AudioTrace> default_dry_bank(int count, double duration_s, std::uint64_t seed);

// One voice reading different material in each entry.
std::vector<AudioTrace> speaker_dry_bank(const SpeakerProfile& speaker, int count, double duration_s,
                                         std::uint64_t seed);

struct ChannelSpec {
  CodecMode codec = CodecMode::kWideband;
  LossProfile loss;
};

struct CorpusItem {
  ManifestEntry entry;
  AudioTrace trace;
};

struct CorpusSpec {
  std::vector<RoomSpec> rooms;          // geometry and surfaces; positions are re-drawn
  int positions = 5;
  double position_jitter = 0.15;        // metres
  double source_distance = 1.0;         // speaker-to-mic distance, metres
  ChannelSpec channel;
  std::uint64_t seed = 1;
};

// Position p of a room: microphone near the p-th point of a 3x3 grid at
// desk height, speaker at `source_distance` in a seeded direction.
RoomSpec place(const RoomSpec& room, int position, double jitter, double source_distance,
               std::uint64_t seed);

std::uint64_t mix_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                       std::uint64_t c = 0);

// Every room x position x dry trace, in that nesting order. When `out_dir` is
// set the traces are written there as WAVs with a manifest.csv.
std::vector<CorpusItem> generate_corpus(const CorpusSpec& spec,
                                        std::span<const AudioTrace> dry_bank,
                                        const std::optional<std::filesystem::path>& out_dir =
                                            std::nullopt);

// Image order used by the presets: long enough (about 0.7 s in the preset
// geometry) for the tail to reach its diffuse decay.
inline constexpr int kPresetMaxOrder = 40;

// Ten rooms sharing one geometry, each lined with a different material mix.
std::vector<RoomSpec> preset_rooms(int count, const MaterialTable& materials = MaterialTable::defaults());

}  // namespace echoprint
