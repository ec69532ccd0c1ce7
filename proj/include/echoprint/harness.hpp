#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "echoprint/channel_sim.hpp"
#include "echoprint/classifier.hpp"
#include "echoprint/fingerprint.hpp"
#include "echoprint/manifest.hpp"
#include "echoprint/segmentation.hpp"

namespace echoprint {

struct PipelineConfig {
  SegmenterConfig segmenter;
  FingerprintConfig fingerprint;
  ClassifierConfig classifier;
};

// Synthetic corpus: `rooms` presets (or explicit room specs), each sampled at
// `positions` placements with `traces_per_position` dry recordings.
struct CorpusConfig {
  int rooms = 10;
  std::vector<RoomSpec> room_specs;   // overrides the presets when non-empty
  std::optional<std::filesystem::path> materials;
  int max_order = kPresetMaxOrder;
  int positions = 5;
  int traces_per_position = 12;
  double trace_seconds = 6.0;
  // One voice with varied content (the attacker holds recordings of the
  // target) or a mixed bank of voices.
  bool single_speaker = true;
  SpeakerProfile speaker{110.0, {520.0, 1400.0, 2450.0}};
  double position_jitter = 0.15;
  double source_distance = 1.0;
  ChannelSpec channel;
};

CorpusSpec make_corpus_spec(const CorpusConfig& cfg, std::uint64_t seed);
std::vector<AudioTrace> make_dry_bank(const CorpusConfig& cfg, std::uint64_t seed);
std::vector<CorpusItem> simulate_corpus(const CorpusConfig& cfg, std::uint64_t seed,
                                        const std::optional<std::filesystem::path>& out_dir = std::nullopt);

struct FingerprintedTrace {
  ManifestEntry entry;
  std::optional<FingerprintVector> fingerprint;  // empty when no fingerprint could be formed
  std::string failure;
};

// Segments and fingerprints one trace (resampled to the canonical rate).
FingerprintedTrace fingerprint_trace(const ManifestEntry& entry, const AudioTrace& trace,
                                     const PipelineConfig& cfg);
std::vector<FingerprintedTrace> fingerprint_corpus(std::span<const CorpusItem> items,
                                                   const PipelineConfig& cfg);
std::vector<FingerprintedTrace> fingerprint_manifest(const DatasetManifest& manifest,
                                                     const PipelineConfig& cfg);

struct Fold {
  std::vector<std::size_t> train;  // indices into the manifest, ascending
  std::vector<std::size_t> test;
};

// Per location the traces are shuffled and dealt into k folds. Iteration i
// trains on fold i and tests on the rest (inverted) or the other way round.
// Unlabelled entries are only ever tested, unless `unlabelled_in_training`
// is set: then they are dealt into folds by room_id like labelled traces and
// the training folds carry them as unlabelled negatives.
std::vector<Fold> kfold_split(std::span<const ManifestEntry> entries, int k, std::uint64_t seed,
                              bool inverted = true, bool unlabelled_in_training = false);
inline std::vector<Fold> kfold_split(const DatasetManifest& manifest, int k, std::uint64_t seed,
                                     bool inverted = true, bool unlabelled_in_training = false) {
  return kfold_split(manifest.entries, k, seed, inverted, unlabelled_in_training);
}

struct Prediction {
  std::string label;                  // kRejectLabel when rejected
  std::vector<std::string> accepted;  // every location whose ensemble accepted
};

inline const std::string kRejectLabel = "REJECT";

class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual Prediction predict(const FingerprintedTrace& trace) const = 0;
};

using PredictorFactory = std::function<std::unique_ptr<Predictor>(
    std::span<const FingerprintedTrace> training, std::uint64_t seed)>;

PredictorFactory ensemble_factory(const ClassifierConfig& cfg);
// Harness sanity stubs: one returns the true label, one rejects everything.
PredictorFactory oracle_factory();
PredictorFactory reject_factory();

struct LocationMetrics {
  std::string label;
  double tpr = 0.0;              // own ensemble accepted a trace of this location
  double fpr = 0.0;              // this ensemble accepted a trace from elsewhere
  double detection_rate = 0.0;   // final label correct
  std::size_t tests = 0;         // summed over folds
};

struct FoldMetrics {
  double tpr = 0.0;
  double fpr = 0.0;
  double detection_rate = 0.0;
  double reject_rate = 0.0;
  std::size_t positive_tests = 0;
  std::size_t negative_opportunities = 0;
  std::size_t tests = 0;
};

struct EvaluationReport {
  std::vector<std::string> locations;   // trained locations, sorted
  std::vector<LocationMetrics> per_location;
  std::vector<FoldMetrics> folds;
  // Fold averages.
  double tpr = 0.0;
  double fpr = 0.0;
  double detection_rate = 0.0;
  double reject_rate = 0.0;
  // confusion[true label][predicted label or kRejectLabel], summed over folds.
  std::map<std::string, std::map<std::string, std::size_t>> confusion;
  std::size_t tests = 0;
  std::size_t unfingerprinted = 0;
  std::string config_echo;
  double wall_clock_s = 0.0;   // kept out of the deterministic report files
};

EvaluationReport evaluate(std::span<const FingerprintedTrace> data, const PredictorFactory& factory,
                          int k, std::uint64_t seed, bool inverted = true,
                          bool unlabelled_in_training = false);
EvaluationReport evaluate(const DatasetManifest& manifest, const PipelineConfig& cfg, int k,
                          std::uint64_t seed, bool inverted = true);

// report.csv (per-location and overall rows), confusion.csv and summary.txt
// are fully determined by the inputs; timing.txt holds the wall clock.
void write_report(const std::filesystem::path& dir, const EvaluationReport& report);
std::string report_csv(const EvaluationReport& report);
std::string confusion_csv(const EvaluationReport& report);
std::string report_summary(const EvaluationReport& report);

struct SeriesPoint {
  std::string name;     // what varied: loss rate, codec, fraction...
  std::string value;
  EvaluationReport report;
};

std::string series_csv(std::span<const SeriesPoint> series);

struct EvaluationConfig {
  int k = 5;
  bool inverted = true;
};

// Regenerates the corpus per loss rate with the same rooms, placements and
// speech, and evaluates each.
std::vector<SeriesPoint> experiment_packet_loss(const CorpusConfig& corpus, const PipelineConfig& pipeline,
                                                const EvaluationConfig& eval, std::span<const double> loss_rates,
                                                std::uint64_t seed);

// Same corpus through each codec.
std::vector<SeriesPoint> experiment_codec(const CorpusConfig& corpus, const PipelineConfig& pipeline,
                                          const EvaluationConfig& eval, std::span<const CodecMode> modes,
                                          std::uint64_t seed);

// Loss-free and lossy corpus at one rate under each concealment strategy.
std::vector<SeriesPoint> experiment_concealment(const CorpusConfig& corpus, const PipelineConfig& pipeline,
                                                const EvaluationConfig& eval, double loss_rate,
                                                std::span<const Concealment> strategies, std::uint64_t seed);

// Strips the labels of a seeded share of locations (room_id is kept). In the
// open-world experiment their training-fold traces join the negative pool as
// unlabelled samples and their test traces should be rejected.
std::vector<FingerprintedTrace> hide_locations(std::span<const FingerprintedTrace> data, double fraction,
                                               std::uint64_t seed);

std::vector<SeriesPoint> experiment_open_world(const CorpusConfig& corpus, const PipelineConfig& pipeline,
                                               const EvaluationConfig& eval, std::span<const double> fractions,
                                               std::uint64_t seed);

// Bagged ensemble against a single classifier per location.
std::vector<SeriesPoint> experiment_bagging(const CorpusConfig& corpus, const PipelineConfig& pipeline,
                                            const EvaluationConfig& eval, std::uint64_t seed);

}  // namespace echoprint
