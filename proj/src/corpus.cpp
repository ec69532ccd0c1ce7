#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include <json.hpp>

#include "echoprint/channel_sim.hpp"
#include "echoprint/error.hpp"

namespace echoprint {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Rounds to the 16-bit grid so in-memory corpora equal their WAV files.
void quantize_pcm16(std::vector<double>& x) {
  for (double& v : x) v = std::clamp(std::round(v * 32768.0), -32768.0, 32767.0) / 32768.0;
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  return splitmix64(h ^ c);
}

MaterialTable MaterialTable::defaults() {
  MaterialTable t;
  t.energy_reflection = {{"concrete", 0.98}, {"glass", 0.97}, {"brick", 0.96},
                         {"plaster", 0.95},  {"wood", 0.90},  {"curtain", 0.60},
                         {"carpet", 0.45},   {"acoustic_tile", 0.30}};
  return t;
}

MaterialTable MaterialTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open material table " + path.string());
  MaterialTable t;
  try {
    const auto j = nlohmann::json::parse(in);
    for (const auto& [name, value] : j.at("energy_reflection").items()) {
      const double v = value.get<double>();
      if (!(v >= 0.0 && v < 1.0)) throw ConfigError("material '" + name + "' out of range");
      t.energy_reflection[name] = v;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad material table " + path.string() + ": " + e.what());
  }
  return t;
}

double MaterialTable::pressure_coeff(const std::string& material) const {
  const auto it = energy_reflection.find(material);
  if (it == energy_reflection.end()) throw ConfigError("unknown material '" + material + "'");
  return std::sqrt(it->second);
}

std::vector<RoomSpec> preset_rooms(int count, const MaterialTable& materials) {
  // Surface order: x=0 wall, x=L wall, y=0 wall, y=W wall, floor, ceiling.
  // Every room damps each axis with at least one absorbing surface so no
  // pair of hard parallel walls leaves a flutter tail that all rooms share.
  static const std::vector<std::array<const char*, 6>> kLinings = {
      {"acoustic_tile", "acoustic_tile", "acoustic_tile", "acoustic_tile", "carpet", "acoustic_tile"},
      {"curtain", "curtain", "acoustic_tile", "acoustic_tile", "carpet", "acoustic_tile"},
      {"acoustic_tile", "acoustic_tile", "curtain", "curtain", "carpet", "acoustic_tile"},
      {"curtain", "curtain", "curtain", "curtain", "carpet", "acoustic_tile"},
      {"acoustic_tile", "wood", "concrete", "curtain", "carpet", "acoustic_tile"},
      {"concrete", "curtain", "acoustic_tile", "acoustic_tile", "concrete", "acoustic_tile"},
      {"acoustic_tile", "curtain", "acoustic_tile", "curtain", "carpet", "concrete"},
      {"acoustic_tile", "acoustic_tile", "curtain", "glass", "wood", "acoustic_tile"},
      {"concrete", "curtain", "concrete", "curtain", "carpet", "acoustic_tile"},
      {"curtain", "wood", "acoustic_tile", "brick", "carpet", "concrete"},
      {"acoustic_tile", "plaster", "curtain", "wood", "carpet", "concrete"},
      {"concrete", "curtain", "concrete", "curtain", "carpet", "concrete"},
  };

  std::vector<RoomSpec> rooms;
  for (int i = 0; i < count; ++i) {
    const auto& lining = kLinings[static_cast<std::size_t>(i) % kLinings.size()];
    RoomSpec r;
    r.dims = {6.0, 4.5, 3.0};
    for (std::size_t s = 0; s < 6; ++s) r.surface_coeffs[s] = materials.pressure_coeff(lining[s]);
    r.source_pos = {2.0, 2.0, 1.2};
    r.mic_pos = {3.0, 2.25, 0.8};
    r.max_order = kPresetMaxOrder;
    r.label = "room" + std::to_string(i);
    if (i >= static_cast<int>(kLinings.size())) r.label += "_" + std::to_string(i / kLinings.size());
    rooms.push_back(r);
  }
  return rooms;
}

RoomSpec place(const RoomSpec& room, int position, double jitter, double source_distance,
               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  RoomSpec r = room;
  const int gx = position % 3, gy = (position / 3) % 3;
  const double margin = 0.3;
  r.mic_pos = {room.dims[0] * (gx + 1) / 4.0 + jitter * u(rng),
               room.dims[1] * (gy + 1) / 4.0 + jitter * u(rng), std::min(0.8, room.dims[2] / 2.0)};
  const double rise = std::min(0.4, room.dims[2] - r.mic_pos[2] - margin);
  const double horizontal = std::sqrt(std::max(0.0, source_distance * source_distance - rise * rise));
  double angle = std::numbers::pi * u(rng);
  for (int attempt = 0; attempt < 16; ++attempt) {
    r.source_pos = {r.mic_pos[0] + horizontal * std::cos(angle),
                    r.mic_pos[1] + horizontal * std::sin(angle), r.mic_pos[2] + rise};
    if (r.source_pos[0] > margin && r.source_pos[0] < room.dims[0] - margin &&
        r.source_pos[1] > margin && r.source_pos[1] < room.dims[1] - margin) {
      break;
    }
    angle += std::numbers::pi / 8.0;
  }
  for (int a = 0; a < 2; ++a) {
    r.source_pos[static_cast<std::size_t>(a)] =
        std::clamp(r.source_pos[static_cast<std::size_t>(a)], margin, room.dims[static_cast<std::size_t>(a)] - margin);
  }
  return r;
}

std::vector<CorpusItem> generate_corpus(const CorpusSpec& spec, std::span<const AudioTrace> dry_bank,
                                        const std::optional<std::filesystem::path>& out_dir) {
  if (spec.rooms.size() < 2) throw ConfigError("generate_corpus: need at least two rooms");
  if (dry_bank.empty()) throw ConfigError("generate_corpus: empty dry bank");
  if (spec.positions < 1) throw ConfigError("generate_corpus: need at least one position");
  if (out_dir) std::filesystem::create_directories(*out_dir);

  std::vector<CorpusItem> items;
  DatasetManifest manifest;
  for (std::size_t r = 0; r < spec.rooms.size(); ++r) {
    for (int p = 0; p < spec.positions; ++p) {
      const RoomSpec placed = place(spec.rooms[r], p, spec.position_jitter, spec.source_distance,
                                    mix_seed(spec.seed, 0x9051, r, static_cast<std::uint64_t>(p)));
      const ImpulseResponse ir = image_source_ir(placed, kCanonicalRate);
      for (std::size_t d = 0; d < dry_bank.size(); ++d) {
        const AudioTrace dry =
            dry_bank[d].sample_rate == kCanonicalRate ? dry_bank[d] : resample(dry_bank[d], kCanonicalRate);
        const std::uint64_t seed = mix_seed(spec.seed, r, static_cast<std::uint64_t>(p), d);
        AudioTrace wet = convolve(dry, ir);
        wet = codec_emulate(wet, spec.channel.codec);
        LossProfile loss = spec.channel.loss;
        loss.seed = seed;
        wet = lossy_channel(wet, loss);
        const double peak = peak_abs(wet.samples);
        if (peak > 1.0) {
          for (double& v : wet.samples) v /= peak;
        }
        quantize_pcm16(wet.samples);
        wet.label = spec.rooms[r].label;

        CorpusItem item;
        item.entry.label = spec.rooms[r].label;
        item.entry.room_id = spec.rooms[r].label;
        item.entry.position_id = p;
        item.entry.codec_mode = to_string(spec.channel.codec);
        item.entry.loss_rate = spec.channel.loss.loss_rate;
        item.entry.seed = seed;
        item.entry.path = spec.rooms[r].label + "_p" + std::to_string(p) + "_d" + std::to_string(d) + ".wav";
        item.trace = std::move(wet);
        if (out_dir) {
          write_wav(*out_dir / item.entry.path, item.trace);
          manifest.entries.push_back(item.entry);
        }
        items.push_back(std::move(item));
      }
    }
  }
  if (out_dir) manifest.save(*out_dir / "manifest.csv");
  return items;
}

}  // namespace echoprint
