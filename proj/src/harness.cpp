#include "echoprint/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "echoprint/config.hpp"
#include "echoprint/error.hpp"

namespace echoprint {
namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string fmt_pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
  return buf;
}

std::vector<std::string> labelled_locations(std::span<const ManifestEntry> entries) {
  std::set<std::string> s;
  for (const auto& e : entries) {
    if (e.labelled()) s.insert(e.label);
  }
  return {s.begin(), s.end()};
}

class EnsemblePredictor : public Predictor {
 public:
  explicit EnsemblePredictor(EnsembleModel model) : model_(std::move(model)) {}

  Prediction predict(const FingerprintedTrace& trace) const override {
    Prediction p;
    p.label = kRejectLabel;
    if (!trace.fingerprint) return p;
    const auto c = classify(model_, *trace.fingerprint);
    for (const auto& v : c.votes) {
      if (v.accepted) p.accepted.push_back(v.label);
    }
    if (!c.rejected) p.label = c.label;
    return p;
  }

 private:
  EnsembleModel model_;
};

class OraclePredictor : public Predictor {
 public:
  explicit OraclePredictor(std::set<std::string> known) : known_(std::move(known)) {}

  Prediction predict(const FingerprintedTrace& trace) const override {
    Prediction p;
    p.label = kRejectLabel;
    if (known_.count(trace.entry.label) != 0) {
      p.label = trace.entry.label;
      p.accepted.push_back(p.label);
    }
    return p;
  }

 private:
  std::set<std::string> known_;
};

class RejectPredictor : public Predictor {
 public:
  Prediction predict(const FingerprintedTrace&) const override { return {kRejectLabel, {}}; }
};

EvaluationReport evaluate_corpus(const CorpusConfig& corpus, const PipelineConfig& pipeline,
                                 const EvaluationConfig& eval, std::uint64_t seed) {
  const auto items = simulate_corpus(corpus, seed);
  const auto data = fingerprint_corpus(items, pipeline);
  auto report = evaluate(data, ensemble_factory(pipeline.classifier), eval.k, seed, eval.inverted);
  Config echo;
  echo.corpus = corpus;
  echo.pipeline = pipeline;
  echo.evaluation = eval;
  report.config_echo = config_to_json(echo);
  return report;
}

}  // namespace

CorpusSpec make_corpus_spec(const CorpusConfig& cfg, std::uint64_t seed) {
  CorpusSpec spec;
  if (!cfg.room_specs.empty()) {
    spec.rooms = cfg.room_specs;
  } else {
    if (cfg.rooms < 2) throw ConfigError("corpus: need at least two rooms");
    const MaterialTable materials = cfg.materials ? MaterialTable::load(*cfg.materials) : MaterialTable::defaults();
    spec.rooms = preset_rooms(cfg.rooms, materials);
    for (auto& r : spec.rooms) r.max_order = cfg.max_order;
  }
  spec.positions = cfg.positions;
  spec.position_jitter = cfg.position_jitter;
  spec.source_distance = cfg.source_distance;
  spec.channel = cfg.channel;
  spec.seed = seed;
  return spec;
}

std::vector<AudioTrace> make_dry_bank(const CorpusConfig& cfg, std::uint64_t seed) {
  if (cfg.traces_per_position < 1) throw ConfigError("corpus: traces_per_position must be >= 1");
  if (!(cfg.trace_seconds > 0.0)) throw ConfigError("corpus: trace_seconds must be positive");
  const std::uint64_t bank_seed = mix_seed(seed, 0xBA4C);
  return cfg.single_speaker
             ? speaker_dry_bank(cfg.speaker, cfg.traces_per_position, cfg.trace_seconds, bank_seed)
             : default_dry_bank(cfg.traces_per_position, cfg.trace_seconds, bank_seed);
}

std::vector<CorpusItem> simulate_corpus(const CorpusConfig& cfg, std::uint64_t seed,
                                        const std::optional<std::filesystem::path>& out_dir) {
  const auto bank = make_dry_bank(cfg, seed);
  return generate_corpus(make_corpus_spec(cfg, seed), bank, out_dir);
}

FingerprintedTrace fingerprint_trace(const ManifestEntry& entry, const AudioTrace& trace,
                                     const PipelineConfig& cfg) {
  FingerprintedTrace out;
  out.entry = entry;
  const AudioTrace x = trace.sample_rate == kCanonicalRate ? trace : resample(trace, kCanonicalRate);
  const auto utterances = segment(x, cfg.segmenter);
  if (utterances.empty()) {
    out.failure = "no utterances";
    return out;
  }
  try {
    FingerprintVector fp = fingerprint_utterances(utterances, cfg.fingerprint);
    fp.label = entry.label;
    out.fingerprint = std::move(fp);
  } catch (const NoFingerprintError& e) {
    out.failure = e.what();
  } catch (const TooShortError& e) {
    out.failure = e.what();
  }
  return out;
}

std::vector<FingerprintedTrace> fingerprint_corpus(std::span<const CorpusItem> items,
                                                   const PipelineConfig& cfg) {
  std::vector<FingerprintedTrace> out;
  out.reserve(items.size());
  for (const auto& it : items) out.push_back(fingerprint_trace(it.entry, it.trace, cfg));
  return out;
}

std::vector<FingerprintedTrace> fingerprint_manifest(const DatasetManifest& manifest,
                                                     const PipelineConfig& cfg) {
  std::vector<FingerprintedTrace> out;
  out.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) {
    try {
      out.push_back(fingerprint_trace(e, read_wav(e.path), cfg));
    } catch (const DataError& err) {
      throw DataError(e.path + ": " + err.what());
    }
  }
  return out;
}

std::vector<Fold> kfold_split(std::span<const ManifestEntry> entries, int k, std::uint64_t seed,
                              bool inverted, bool unlabelled_in_training) {
  if (k < 2) throw ProtocolError("kfold_split: k must be at least 2");
  std::map<std::string, std::vector<std::size_t>> by_location;
  std::map<std::string, std::vector<std::size_t>> by_room;  // unlabelled, when folded
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].labelled()) {
      by_location[entries[i].label].push_back(i);
    } else if (unlabelled_in_training) {
      by_room[entries[i].room_id].push_back(i);
    }
  }
  if (by_location.empty()) throw ProtocolError("kfold_split: no labelled locations");

  std::vector<int> fold_of(entries.size(), -1);
  std::mt19937_64 rng(seed);
  const auto deal = [&](std::vector<std::size_t>& idx) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t j = 0; j < idx.size(); ++j) fold_of[idx[j]] = static_cast<int>(j % static_cast<std::size_t>(k));
  };
  for (auto& [label, idx] : by_location) {
    if (idx.size() < static_cast<std::size_t>(k)) {
      throw ProtocolError("kfold_split: location '" + label + "' has " + std::to_string(idx.size()) +
                          " traces, fewer than k = " + std::to_string(k));
    }
    deal(idx);
  }
  for (auto& [room, idx] : by_room) deal(idx);

  std::vector<Fold> folds(static_cast<std::size_t>(k));
  for (int f = 0; f < k; ++f) {
    auto& fold = folds[static_cast<std::size_t>(f)];
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (fold_of[i] < 0) {
        fold.test.push_back(i);
      } else if ((fold_of[i] == f) == inverted) {
        fold.train.push_back(i);
      } else {
        fold.test.push_back(i);
      }
    }
  }
  return folds;
}

PredictorFactory ensemble_factory(const ClassifierConfig& cfg) {
  return [cfg](std::span<const FingerprintedTrace> training, std::uint64_t seed) -> std::unique_ptr<Predictor> {
    std::vector<FingerprintVector> rows;
    for (const auto& t : training) {
      if (t.fingerprint) rows.push_back(*t.fingerprint);
    }
    if (rows.empty()) throw TrainingError("no fingerprinted training traces");
    return std::make_unique<EnsemblePredictor>(train_ensemble(rows, cfg, seed));
  };
}

PredictorFactory oracle_factory() {
  return [](std::span<const FingerprintedTrace> training, std::uint64_t) -> std::unique_ptr<Predictor> {
    std::set<std::string> known;
    for (const auto& t : training) {
      if (t.entry.labelled()) known.insert(t.entry.label);
    }
    return std::make_unique<OraclePredictor>(std::move(known));
  };
}

PredictorFactory reject_factory() {
  return [](std::span<const FingerprintedTrace>, std::uint64_t) -> std::unique_ptr<Predictor> {
    return std::make_unique<RejectPredictor>();
  };
}

EvaluationReport evaluate(std::span<const FingerprintedTrace> data, const PredictorFactory& factory, int k,
                          std::uint64_t seed, bool inverted, bool unlabelled_in_training) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<ManifestEntry> entries;
  entries.reserve(data.size());
  for (const auto& d : data) entries.push_back(d.entry);
  const auto folds = kfold_split(entries, k, seed, inverted, unlabelled_in_training);

  EvaluationReport report;
  report.locations = labelled_locations(entries);
  const std::size_t L = report.locations.size();
  std::map<std::string, std::size_t> loc_index;
  for (std::size_t l = 0; l < L; ++l) loc_index[report.locations[l]] = l;

  std::vector<double> tpr_sum(L, 0.0), fpr_sum(L, 0.0), det_sum(L, 0.0);
  std::vector<std::size_t> test_count(L, 0);
  for (const auto& d : data) {
    if (!d.fingerprint) ++report.unfingerprinted;
  }

  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<FingerprintedTrace> training;
    for (std::size_t i : folds[f].train) training.push_back(data[i]);
    std::unique_ptr<Predictor> predictor;
    try {
      predictor = factory(training, mix_seed(seed, 0xF01D, f));
    } catch (const Error& e) {
      throw DataError("fold " + std::to_string(f) + ": " + e.what());
    }

    std::vector<std::size_t> pos(L, 0), tp(L, 0), correct(L, 0), opp(L, 0), fp(L, 0);
    std::size_t rejects = 0;
    for (std::size_t i : folds[f].test) {
      const auto& t = data[i];
      const Prediction p = predictor->predict(t);
      const std::set<std::string> accepted(p.accepted.begin(), p.accepted.end());
      report.confusion[t.entry.label][p.label] += 1;
      if (p.label == kRejectLabel) ++rejects;
      const auto own = loc_index.find(t.entry.label);
      if (own != loc_index.end()) {
        const std::size_t l = own->second;
        ++pos[l];
        if (accepted.count(t.entry.label) != 0) ++tp[l];
        if (p.label == t.entry.label) ++correct[l];
      }
      for (std::size_t l = 0; l < L; ++l) {
        if (own != loc_index.end() && own->second == l) continue;
        ++opp[l];
        if (accepted.count(report.locations[l]) != 0) ++fp[l];
      }
    }

    FoldMetrics m;
    m.tests = folds[f].test.size();
    std::size_t tp_all = 0, correct_all = 0, fp_all = 0;
    for (std::size_t l = 0; l < L; ++l) {
      m.positive_tests += pos[l];
      m.negative_opportunities += opp[l];
      tp_all += tp[l];
      correct_all += correct[l];
      fp_all += fp[l];
      test_count[l] += pos[l];
      if (pos[l] > 0) {
        tpr_sum[l] += static_cast<double>(tp[l]) / static_cast<double>(pos[l]);
        det_sum[l] += static_cast<double>(correct[l]) / static_cast<double>(pos[l]);
      }
      if (opp[l] > 0) fpr_sum[l] += static_cast<double>(fp[l]) / static_cast<double>(opp[l]);
    }
    if (m.positive_tests > 0) {
      m.tpr = static_cast<double>(tp_all) / static_cast<double>(m.positive_tests);
      m.detection_rate = static_cast<double>(correct_all) / static_cast<double>(m.positive_tests);
    }
    if (m.negative_opportunities > 0) {
      m.fpr = static_cast<double>(fp_all) / static_cast<double>(m.negative_opportunities);
    }
    if (m.tests > 0) m.reject_rate = static_cast<double>(rejects) / static_cast<double>(m.tests);
    report.tests += m.tests;
    report.folds.push_back(m);
  }

  const double nf = static_cast<double>(folds.size());
  for (const auto& m : report.folds) {
    report.tpr += m.tpr / nf;
    report.fpr += m.fpr / nf;
    report.detection_rate += m.detection_rate / nf;
    report.reject_rate += m.reject_rate / nf;
  }
  for (std::size_t l = 0; l < L; ++l) {
    LocationMetrics lm;
    lm.label = report.locations[l];
    lm.tpr = tpr_sum[l] / nf;
    lm.fpr = fpr_sum[l] / nf;
    lm.detection_rate = det_sum[l] / nf;
    lm.tests = test_count[l];
    report.per_location.push_back(lm);
  }
  report.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

EvaluationReport evaluate(const DatasetManifest& manifest, const PipelineConfig& cfg, int k, std::uint64_t seed,
                          bool inverted) {
  const auto start = std::chrono::steady_clock::now();
  const auto data = fingerprint_manifest(manifest, cfg);
  auto report = evaluate(data, ensemble_factory(cfg.classifier), k, seed, inverted);
  report.config_echo = pipeline_to_json(cfg);
  report.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::string report_csv(const EvaluationReport& r) {
  std::ostringstream out;
  out << "scope,label,tests,tpr,fpr,detection_rate,reject_rate\n";
  for (const auto& l : r.per_location) {
    out << "location," << l.label << ',' << l.tests << ',' << fmt(l.tpr) << ',' << fmt(l.fpr) << ','
        << fmt(l.detection_rate) << ",\n";
  }
  for (std::size_t f = 0; f < r.folds.size(); ++f) {
    const auto& m = r.folds[f];
    out << "fold," << f << ',' << m.tests << ',' << fmt(m.tpr) << ',' << fmt(m.fpr) << ','
        << fmt(m.detection_rate) << ',' << fmt(m.reject_rate) << '\n';
  }
  out << "overall,," << r.tests << ',' << fmt(r.tpr) << ',' << fmt(r.fpr) << ',' << fmt(r.detection_rate) << ','
      << fmt(r.reject_rate) << '\n';
  return out.str();
}

std::string confusion_csv(const EvaluationReport& r) {
  std::ostringstream out;
  out << "true_label,predicted_label,count\n";
  for (const auto& [truth, row] : r.confusion) {
    for (const auto& [pred, n] : row) out << truth << ',' << pred << ',' << n << '\n';
  }
  return out.str();
}

std::string report_summary(const EvaluationReport& r) {
  std::ostringstream out;
  out << "folds: " << r.folds.size() << "\n"
      << "locations: " << r.locations.size() << "\n"
      << "tests: " << r.tests << "\n"
      << "unfingerprinted traces: " << r.unfingerprinted << "\n"
      << "detection rate: " << fmt_pct(r.detection_rate) << "\n"
      << "TPR: " << fmt_pct(r.tpr) << "\n"
      << "FPR: " << fmt_pct(r.fpr) << "\n"
      << "reject rate: " << fmt_pct(r.reject_rate) << "\n\n"
      << "location            TPR      FPR      detected\n";
  for (const auto& l : r.per_location) {
    char line[160];
    std::snprintf(line, sizeof line, "%-18s %7s  %7s  %7s\n", l.label.c_str(), fmt_pct(l.tpr).c_str(),
                  fmt_pct(l.fpr).c_str(), fmt_pct(l.detection_rate).c_str());
    out << line;
  }
  if (!r.config_echo.empty()) out << "\nconfig:\n" << r.config_echo << "\n";
  return out.str();
}

void write_report(const std::filesystem::path& dir, const EvaluationReport& r) {
  std::filesystem::create_directories(dir);
  const auto put = [&](const char* name, const std::string& text) {
    std::ofstream out(dir / name);
    if (!out) throw DataError("cannot write " + (dir / name).string());
    out << text;
  };
  put("report.csv", report_csv(r));
  put("confusion.csv", confusion_csv(r));
  put("summary.txt", report_summary(r));
  put("timing.txt", "wall_clock_s," + fmt(r.wall_clock_s) + "\n");
}

std::string series_csv(std::span<const SeriesPoint> series) {
  std::ostringstream out;
  out << "parameter,value,tests,unfingerprinted,tpr,fpr,detection_rate,reject_rate\n";
  for (const auto& p : series) {
    const auto& r = p.report;
    out << p.name << ',' << p.value << ',' << r.tests << ',' << r.unfingerprinted << ',' << fmt(r.tpr) << ','
        << fmt(r.fpr) << ',' << fmt(r.detection_rate) << ',' << fmt(r.reject_rate) << '\n';
  }
  return out.str();
}

std::vector<SeriesPoint> experiment_packet_loss(const CorpusConfig& corpus, const PipelineConfig& pipeline,
                                                const EvaluationConfig& eval, std::span<const double> loss_rates,
                                                std::uint64_t seed) {
  if (!std::is_sorted(loss_rates.begin(), loss_rates.end())) {
    throw ConfigError("experiment_packet_loss: loss rates must be ascending");
  }
  std::vector<SeriesPoint> out;
  for (double rate : loss_rates) {
    CorpusConfig c = corpus;
    c.channel.loss.loss_rate = rate;
    out.push_back({"loss_rate", fmt(rate), evaluate_corpus(c, pipeline, eval, seed)});
  }
  return out;
}

std::vector<SeriesPoint> experiment_codec(const CorpusConfig& corpus, const PipelineConfig& pipeline,
                                          const EvaluationConfig& eval, std::span<const CodecMode> modes,
                                          std::uint64_t seed) {
  std::vector<SeriesPoint> out;
  for (CodecMode mode : modes) {
    CorpusConfig c = corpus;
    c.channel.codec = mode;
    out.push_back({"codec", to_string(mode), evaluate_corpus(c, pipeline, eval, seed)});
  }
  return out;
}

std::vector<SeriesPoint> experiment_concealment(const CorpusConfig& corpus, const PipelineConfig& pipeline,
                                                const EvaluationConfig& eval, double loss_rate,
                                                std::span<const Concealment> strategies, std::uint64_t seed) {
  std::vector<SeriesPoint> out;
  for (Concealment s : strategies) {
    CorpusConfig c = corpus;
    c.channel.loss.loss_rate = loss_rate;
    c.channel.loss.concealment = s;
    out.push_back({"concealment", to_string(s), evaluate_corpus(c, pipeline, eval, seed)});
  }
  return out;
}

std::vector<FingerprintedTrace> hide_locations(std::span<const FingerprintedTrace> data, double fraction,
                                               std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw ConfigError("unlabelled fraction must be in [0, 1)");
  std::vector<ManifestEntry> entries;
  for (const auto& d : data) entries.push_back(d.entry);
  auto locations = labelled_locations(entries);
  const auto hidden_count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(locations.size())));
  std::mt19937_64 rng(mix_seed(seed, 0x0BE4));
  std::shuffle(locations.begin(), locations.end(), rng);
  const std::set<std::string> hidden(locations.begin(), locations.begin() + static_cast<std::ptrdiff_t>(hidden_count));

  std::vector<FingerprintedTrace> out(data.begin(), data.end());
  for (auto& t : out) {
    if (hidden.count(t.entry.label) == 0) continue;
    t.entry.label = kUnlabelled;
    if (t.fingerprint) t.fingerprint->label = kUnlabelled;
  }
  return out;
}

std::vector<SeriesPoint> experiment_open_world(const CorpusConfig& corpus, const PipelineConfig& pipeline,
                                               const EvaluationConfig& eval, std::span<const double> fractions,
                                               std::uint64_t seed) {
  const auto items = simulate_corpus(corpus, seed);
  const auto data = fingerprint_corpus(items, pipeline);
  Config echo;
  echo.corpus = corpus;
  echo.pipeline = pipeline;
  echo.evaluation = eval;
  std::vector<SeriesPoint> out;
  for (double f : fractions) {
    const auto view = hide_locations(data, f, seed);
    auto report = evaluate(view, ensemble_factory(pipeline.classifier), eval.k, seed, eval.inverted, true);
    report.config_echo = config_to_json(echo);
    out.push_back({"unlabelled_fraction", fmt(f), std::move(report)});
  }
  return out;
}

std::vector<SeriesPoint> experiment_bagging(const CorpusConfig& corpus, const PipelineConfig& pipeline,
                                            const EvaluationConfig& eval, std::uint64_t seed) {
  const auto items = simulate_corpus(corpus, seed);
  const auto data = fingerprint_corpus(items, pipeline);
  std::vector<SeriesPoint> out;
  for (bool bagging : {true, false}) {
    ClassifierConfig c = pipeline.classifier;
    c.bagging = bagging;
    out.push_back({"bagging", bagging ? "on" : "off",
                   evaluate(data, ensemble_factory(c), eval.k, seed, eval.inverted)});
  }
  return out;
}

}  // namespace echoprint
