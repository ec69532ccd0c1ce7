#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "echoprint/config.hpp"
#include "echoprint/error.hpp"
#include "echoprint/harness.hpp"

namespace fs = std::filesystem;
using namespace echoprint;

namespace {

struct Options {
  fs::path config;
  std::uint64_t seed = 1;
  fs::path out = "out";
  std::string manifest, fingerprints, model, input;
  bool debug_layers = false;
};

Config load(const Options& o) {
  Config cfg = o.config.empty() ? Config{} : load_config(o.config);
  if (!o.manifest.empty()) cfg.inputs.manifest = o.manifest;
  if (!o.fingerprints.empty()) cfg.inputs.fingerprints = o.fingerprints;
  if (!o.model.empty()) cfg.inputs.model = o.model;
  if (!o.input.empty()) cfg.inputs.wav = o.input;
  cfg.debug_layers = cfg.debug_layers || o.debug_layers;
  return cfg;
}

template <typename T>
const T& need(const std::optional<T>& v, const char* what) {
  if (!v) throw ConfigError(std::string("missing input: ") + what);
  return *v;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

void write_matrix(const fs::path& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  char buf[32];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      out << (j ? "," : "") << buf;
    }
    out << '\n';
  }
}

int cmd_simulate(const Options& o) {
  const Config cfg = load(o);
  const auto items = simulate_corpus(cfg.corpus, o.seed, o.out);
  std::cout << "wrote " << items.size() << " traces and manifest.csv to " << o.out.string() << "\n";
  return 0;
}

int cmd_segment(const Options& o) {
  const Config cfg = load(o);
  std::vector<fs::path> inputs;
  if (cfg.inputs.wav) {
    inputs.push_back(*cfg.inputs.wav);
  } else {
    for (const auto& e : DatasetManifest::load(need(cfg.inputs.manifest, "--input or --manifest")).entries) {
      inputs.push_back(e.path);
    }
  }
  fs::create_directories(o.out);
  std::ofstream index(o.out / "segments.csv");
  if (!index) throw DataError("cannot write segments index");
  index << "path,parent,start_sample,duration_samples,start_s,duration_s\n";
  std::size_t total = 0;
  for (const auto& in : inputs) {
    AudioTrace trace = read_wav(in);
    if (trace.sample_rate != kCanonicalRate) trace = resample(trace, kCanonicalRate);
    const auto utterances = segment(trace, cfg.pipeline.segmenter);
    for (std::size_t u = 0; u < utterances.size(); ++u) {
      const auto& utt = utterances[u];
      char name[32];
      std::snprintf(name, sizeof name, "_u%03zu.wav", u);
      const std::string file = in.stem().string() + name;
      AudioTrace piece;
      piece.samples = utt.samples;
      piece.sample_rate = utt.sample_rate;
      write_wav(o.out / file, piece);
      char row[160];
      std::snprintf(row, sizeof row, ",%zu,%zu,%.6f,%.6f\n", utt.start_offset, utt.samples.size(),
                    static_cast<double>(utt.start_offset) / utt.sample_rate, utt.duration);
      index << file << ',' << in.string() << row;
      ++total;
    }
  }
  std::cout << "wrote " << total << " utterances from " << inputs.size() << " traces\n";
  return 0;
}

int cmd_fingerprint(const Options& o) {
  const Config cfg = load(o);
  const auto manifest = DatasetManifest::load(need(cfg.inputs.manifest, "--manifest"));
  fs::create_directories(o.out);
  std::vector<FingerprintVector> rows;
  std::ofstream failures(o.out / "failures.csv");
  failures << "path,reason\n";
  for (const auto& e : manifest.entries) {
    AudioTrace trace = read_wav(e.path);
    if (trace.sample_rate != kCanonicalRate) trace = resample(trace, kCanonicalRate);
    const auto utterances = segment(trace, cfg.pipeline.segmenter);
    try {
      if (utterances.empty()) throw NoFingerprintError("no utterances");
      FingerprintDetails details;
      FingerprintVector fp = fingerprint_utterances(utterances, cfg.pipeline.fingerprint, &details);
      fp.label = e.label;
      rows.push_back(std::move(fp));
      if (cfg.debug_layers) {
        const fs::path dir = o.out / "layers";
        fs::create_directories(dir);
        const auto dec = details.decomposition.layers.empty()
                             ? deep_decompose(details.trace_matrix, cfg.pipeline.fingerprint.decomposition)
                             : details.decomposition;
        const std::string stem = fs::path(e.path).stem().string();
        for (std::size_t k = 0; k < dec.layers.size(); ++k) {
          const std::string base = stem + "_layer" + std::to_string(k + 1);
          write_matrix(dir / (base + "_H.csv"), dec.layers[k].H);
          write_matrix(dir / (base + "_W.csv"), dec.layers[k].W);
        }
      }
    } catch (const NoFingerprintError& err) {
      failures << e.path << ',' << err.what() << '\n';
    } catch (const TooShortError& err) {
      failures << e.path << ',' << err.what() << '\n';
    }
  }
  write_fingerprints(o.out / "fingerprints.csv", rows);
  std::cout << "fingerprinted " << rows.size() << " of " << manifest.entries.size() << " traces\n";
  return 0;
}

int cmd_train(const Options& o) {
  const Config cfg = load(o);
  const auto rows = read_fingerprints(need(cfg.inputs.fingerprints, "--fingerprints"));
  const EnsembleModel model = train_ensemble(rows, cfg.pipeline.classifier, o.seed);
  fs::create_directories(o.out);
  save_model(o.out / "model.json", model);
  for (const auto& w : model.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "trained " << model.per_location.size() << " locations, " << model.member_count()
            << " members\n";
  return 0;
}

int cmd_classify(const Options& o) {
  const Config cfg = load(o);
  const EnsembleModel model = load_model(need(cfg.inputs.model, "--model"));
  const auto rows = read_fingerprints(need(cfg.inputs.fingerprints, "--fingerprints"));
  fs::create_directories(o.out);
  std::ofstream out(o.out / "classifications.csv");
  if (!out) throw DataError("cannot write classifications");
  out << "true_label,predicted_label,rejected";
  for (const auto& loc : model.per_location) out << ",votes_" << loc.location_label;
  out << '\n';
  for (const auto& fp : rows) {
    const auto c = classify(model, fp);
    out << fp.label << ',' << c.label << ',' << (c.rejected ? 1 : 0);
    for (const auto& v : c.votes) out << ',' << v.votes;
    out << '\n';
  }
  std::cout << "classified " << rows.size() << " fingerprints\n";
  return 0;
}

int cmd_evaluate(const Options& o) {
  Config cfg = load(o);
  EvaluationReport report;
  if (cfg.inputs.manifest) {
    report = evaluate(DatasetManifest::load(*cfg.inputs.manifest), cfg.pipeline, cfg.evaluation.k, o.seed,
                      cfg.evaluation.inverted);
  } else {
    const auto start = std::chrono::steady_clock::now();
    const auto data = fingerprint_corpus(simulate_corpus(cfg.corpus, o.seed), cfg.pipeline);
    report = evaluate(data, ensemble_factory(cfg.pipeline.classifier), cfg.evaluation.k, o.seed,
                      cfg.evaluation.inverted);
    report.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  report.config_echo = config_to_json(cfg);
  write_report(o.out, report);
  std::cout << report_summary(report).substr(0, report_summary(report).find("\n\n")) << "\n";
  return 0;
}

int cmd_experiment(const Options& o) {
  const Config cfg = load(o);
  const auto& e = cfg.experiment;
  std::vector<SeriesPoint> series;
  if (e.kind == "packet_loss") {
    series = experiment_packet_loss(cfg.corpus, cfg.pipeline, cfg.evaluation, e.loss_rates, o.seed);
  } else if (e.kind == "codec") {
    series = experiment_codec(cfg.corpus, cfg.pipeline, cfg.evaluation, e.codecs, o.seed);
  } else if (e.kind == "concealment") {
    series = experiment_concealment(cfg.corpus, cfg.pipeline, cfg.evaluation, e.concealment_loss_rate,
                                    e.concealments, o.seed);
  } else if (e.kind == "open_world") {
    series = experiment_open_world(cfg.corpus, cfg.pipeline, cfg.evaluation, e.unlabelled_fractions, o.seed);
  } else {
    series = experiment_bagging(cfg.corpus, cfg.pipeline, cfg.evaluation, o.seed);
  }
  fs::create_directories(o.out);
  write_text(o.out / "series.csv", series_csv(series));
  for (const auto& p : series) write_report(o.out / (p.name + "_" + p.value), p.report);
  std::cout << series_csv(series);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"echoprint: room fingerprinting from reverberation in speech"};
  app.require_subcommand(1);
  Options o;
  std::string config;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "settings file (JSON, comments allowed)");
    sub->add_option("--seed", o.seed, "master seed");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--manifest", o.manifest, "manifest.csv (overrides inputs.manifest)");
    sub->add_option("--fingerprints", o.fingerprints, "fingerprints.csv (overrides inputs.fingerprints)");
    sub->add_option("--model", o.model, "model file (overrides inputs.model)");
    sub->add_option("--input", o.input, "single WAV (overrides inputs.wav)");
  };

  struct Command {
    const char* name;
    const char* help;
    int (*run)(const Options&);
  };
  const Command commands[] = {
      {"simulate", "generate a synthetic corpus (WAVs + manifest.csv)", cmd_simulate},
      {"segment", "split traces into utterance WAVs with a segments.csv index", cmd_segment},
      {"fingerprint", "fingerprint every trace of a manifest", cmd_fingerprint},
      {"train", "train a location model from fingerprints", cmd_train},
      {"classify", "classify fingerprints with a trained model", cmd_classify},
      {"evaluate", "k-fold evaluation of a manifest or simulated corpus", cmd_evaluate},
      {"experiment", "run the experiment named in the config", cmd_experiment},
  };
  int (*selected)(const Options&) = nullptr;
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    add_common(sub);
    if (std::string(c.name) == "fingerprint") {
      sub->add_flag("--debug-layers", o.debug_layers, "dump per-layer H and W of the decomposition");
    }
    sub->callback([&selected, run = c.run] { selected = run; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::kConfig);
  }

  try {
    o.config = config;
    return selected(o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kData);
  }
}
