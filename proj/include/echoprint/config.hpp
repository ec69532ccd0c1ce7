#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "echoprint/harness.hpp"

namespace echoprint {

struct ExperimentSpec {
  std::string kind = "packet_loss";   // packet_loss, codec, concealment, open_world, bagging
  std::vector<double> loss_rates = {0.0, 0.1, 0.2, 0.3};
  std::vector<CodecMode> codecs = {CodecMode::kNarrowband, CodecMode::kMediumband,
                                   CodecMode::kWideband, CodecMode::kSuperwideband};
  double concealment_loss_rate = 0.1;
  std::vector<Concealment> concealments = {Concealment::kRepeatSpectrum, Concealment::kSilence};
  std::vector<double> unlabelled_fractions = {0.0, 0.5};
};

struct InputPaths {
  std::optional<std::filesystem::path> manifest;
  std::optional<std::filesystem::path> fingerprints;
  std::optional<std::filesystem::path> model;
  std::optional<std::filesystem::path> wav;
};

struct Config {
  CorpusConfig corpus;
  PipelineConfig pipeline;
  EvaluationConfig evaluation;
  ExperimentSpec experiment;
  InputPaths inputs;
  bool debug_layers = false;   // fingerprint: per-layer H and W dumps
};

// JSON with comments allowed. Missing keys keep their defaults; unknown keys
// and ill-typed values raise ConfigError. Relative input paths are resolved
// against the config file's directory.
Config load_config(const std::filesystem::path& path);
Config parse_config(const std::string& text, const std::filesystem::path& base_dir = {});

// Round-trippable dump of every setting, used as the report config echo.
std::string config_to_json(const Config& cfg);
std::string pipeline_to_json(const PipelineConfig& cfg);

// A single room: {"label", "dims", "source", "mic", "max_order", and either
// "surfaces" (six material names, x0 x1 y0 y1 floor ceiling) or "coeffs"
// (six pressure reflection coefficients)}.
RoomSpec load_room_spec(const std::filesystem::path& path,
                        const MaterialTable& materials = MaterialTable::defaults());

}  // namespace echoprint
