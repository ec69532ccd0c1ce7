// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "echoprint/config.hpp"
#include "echoprint/decomposition.hpp"
#include "echoprint/error.hpp"
#include "echoprint/harness.hpp"

namespace fs = std::filesystem;
using namespace echoprint;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct Outcome {
  int id;
  bool pass;
  std::string detail;
};

std::vector<Outcome> outcomes;

void record(int id, bool pass, const std::string& detail) {
  outcomes.push_back({id, pass, detail});
  std::printf("criterion %2d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
}

std::string f3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Eigen::MatrixXd uniform(int rows, int cols, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(0.0, scale);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = u(rng);
  }
  return m;
}

// ---------------------------------------------------------------- 1
void criterion_nmf() {
  const auto start = Clock::now();
  std::mt19937_64 rng(101);
  int monotone = 0, nonneg = 0;
  for (int t = 0; t < 100; ++t) {
    const int rows = 1 + static_cast<int>(rng() % 64);
    const int cols = 1 + static_cast<int>(rng() % 512);
    const Eigen::MatrixXd O = uniform(rows, cols, rng);
    const int rank = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(std::min(rows, cols)));
    NmfOptions opts;
    opts.tol = 1e-6;
    opts.max_iter = 300;
    opts.seed = rng();
    const NmfLayer layer = nmf_layer(O, rank, opts);
    bool ok = true;
    for (std::size_t k = 1; k < layer.objective.size(); ++k) {
      ok = ok && layer.objective[k] <= layer.objective[k - 1] * (1.0 + 1e-12);
    }
    monotone += ok ? 1 : 0;
    nonneg += (layer.H.array() >= 0.0).all() && (layer.W.array() >= 0.0).all() ? 1 : 0;
  }
  double worst_rank1 = 0.0;
  for (int t = 0; t < 10; ++t) {
    const int rows = 2 + static_cast<int>(rng() % 63);
    const int cols = 2 + static_cast<int>(rng() % 511);
    const Eigen::MatrixXd u = uniform(rows, 1, rng).array() + 0.05;
    const Eigen::MatrixXd v = uniform(1, cols, rng).array() + 0.05;
    const Eigen::MatrixXd O = u * v;
    NmfOptions opts;
    opts.tol = 1e-14;
    opts.max_iter = 5000;
    opts.seed = rng();
    const NmfLayer layer = nmf_layer(O, 1, opts);
    worst_rank1 = std::max(worst_rank1, (O - layer.H * layer.W).norm() / O.norm());
  }
  const double elapsed = seconds_since(start);
  record(1, monotone == 100 && nonneg == 100 && worst_rank1 < 1e-4 && elapsed < 60.0,
         "NMF: monotone " + std::to_string(monotone) + "/100, non-negative " + std::to_string(nonneg) +
             "/100, worst rank-1 rel. error " + std::to_string(worst_rank1) + ", " + f3(elapsed) + " s");
}

// ---------------------------------------------------------------- 2
void criterion_pool_and_regeneration() {
  std::mt19937_64 rng(202);
  const Eigen::MatrixXd W = uniform(1000, 512, rng);
  const int c = 20;
  const Eigen::MatrixXd fast = max_pool(W, c);
  std::size_t mismatches = 0;
  for (Eigen::Index i = 0; i < W.rows(); ++i) {
    for (Eigen::Index j = 0; j < W.cols(); ++j) {
      double m = -1.0;
      for (Eigen::Index k = std::max<Eigen::Index>(0, j - c); k <= std::min<Eigen::Index>(W.cols() - 1, j + c); ++k) {
        m = std::max(m, W(i, k));
      }
      mismatches += fast(i, j) == m ? 0 : 1;
    }
  }
  double worst = 0.0;
  for (int t = 0; t < 10; ++t) {
    const int rows = 2 + static_cast<int>(rng() % 63);
    const Eigen::MatrixXd O = uniform(rows, 512, rng, 120.0);
    DecompositionConfig cfg;
    cfg.direct_threshold = 0.3 + 0.06 * t;
    cfg.direct_rule = t % 2 == 0 ? DirectRule::kCumulativeShare : DirectRule::kRowShare;
    const auto r = deep_decompose(O, cfg);
    const Eigen::MatrixXd full = r.layers.front().H * r.WX;
    const double scale = std::max(1.0, full.cwiseAbs().maxCoeff());
    worst = std::max(worst, (r.direct + r.reverberant - full).cwiseAbs().maxCoeff() / scale);
  }
  record(2, mismatches == 0 && worst <= 1e-10,
         "max_pool mismatches " + std::to_string(mismatches) + " of 1000x512; worst regeneration gap " +
             std::to_string(worst));
}

// ---------------------------------------------------------------- 3
void criterion_cqt() {
  const int rate = kCanonicalRate;
  const auto tone = [&](double f) {
    AudioTrace t;
    for (int i = 0; i < rate; ++i) t.samples.push_back(0.5 * std::sin(2.0 * M_PI * f * i / rate));
    return t;
  };
  const CqtSpectrum ref = cqt(tone(440.0), 50.0, 2000.0, 24);
  double q_min = 1e300, q_max = 0.0;
  for (std::size_t k = 0; k < ref.bins.size(); ++k) {
    const double q = ref.center_freqs[k] / ref.bandwidths[k];
    q_min = std::min(q_min, q);
    q_max = std::max(q_max, q);
  }
  const double q_spread = (q_max - q_min) / q_min;
  int hits = 0;
  for (int i = 0; i < 20; ++i) {
    const double f = 60.0 * std::pow(1900.0 / 60.0, i / 19.0);
    const CqtSpectrum s = cqt(tone(f), 50.0, 2000.0, 24);
    // Nearest centre in units of bin bandwidth.
    std::size_t nearest = 0;
    for (std::size_t k = 1; k < s.center_freqs.size(); ++k) {
      if (std::abs(f - s.center_freqs[k]) / s.bandwidths[k] <
          std::abs(f - s.center_freqs[nearest]) / s.bandwidths[nearest]) {
        nearest = k;
      }
    }
    const auto argmax = static_cast<std::size_t>(std::max_element(s.bins.begin(), s.bins.end()) - s.bins.begin());
    hits += argmax == nearest ? 1 : 0;
  }
  record(3, q_spread < 0.01 && hits == 20,
         "CQT: Q spread " + std::to_string(100.0 * q_spread) + "%, tone argmax in nearest bin " +
             std::to_string(hits) + "/20");
}

// ---------------------------------------------------------------- 4
void criterion_kernel_and_blobs() {
  std::mt19937_64 rng(404);
  std::normal_distribution<double> g(0.0, 1.0);
  int good = 0;
  double min_eig = 1e300;
  for (int s = 0; s < 50; ++s) {
    const int n = 10 + static_cast<int>(rng() % 90);
    const int d = 1 + static_cast<int>(rng() % 100);
    Eigen::MatrixXd X(n, d);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < d; ++k) X(i, k) = g(rng);
    }
    const Eigen::MatrixXd K = rbf_gram(X, 1.0 / d);
    const bool symmetric = (K - K.transpose()).cwiseAbs().maxCoeff() == 0.0;
    const double e = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(K).eigenvalues().minCoeff();
    min_eig = std::min(min_eig, e);
    good += symmetric && e >= -1e-8 ? 1 : 0;
  }

  // Separable blobs: 3 locations, 30 points each, 8 dimensions.
  std::vector<LabelledVector> data;
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < 30; ++i) {
      LabelledVector v;
      v.label = "blob" + std::to_string(c);
      for (int k = 0; k < 8; ++k) v.x.push_back(0.3 * g(rng) + (k == c ? 8.0 : 0.0));
      data.push_back(std::move(v));
    }
  }
  ClassifierConfig cfg;
  cfg.features = FeatureMap::kRaw;
  const EnsembleModel model = train_ensemble(data, cfg, 4);
  int perfect = 0, total = 0;
  for (const auto& loc : model.per_location) {
    for (const auto& m : loc.members) {
      bool ok = true;
      for (const auto& v : data) ok = ok && (m.decision(model.standardize(v.x)) > 0.0) == (v.label == loc.location_label);
      perfect += ok ? 1 : 0;
      ++total;
    }
  }
  record(4, good == 50 && perfect == total && total == 30,
         "Gram symmetric and PSD on " + std::to_string(good) + "/50 sets (min eigenvalue " + std::to_string(min_eig) +
             "); members with zero training error " + std::to_string(perfect) + "/" + std::to_string(total));
}

// ---------------------------------------------------------------- corpora
struct Run {
  std::vector<FingerprintedTrace> data;
  EvaluationReport report;
  double seconds = 0.0;
};

Run run_corpus(const CorpusConfig& corpus, const PipelineConfig& pipeline, std::uint64_t seed, bool bagging = true) {
  const auto start = Clock::now();
  Run r;
  r.data = fingerprint_corpus(simulate_corpus(corpus, seed), pipeline);
  ClassifierConfig cls = pipeline.classifier;
  cls.bagging = bagging;
  r.report = evaluate(r.data, ensemble_factory(cls), 5, seed, true);
  Config echo;
  echo.corpus = corpus;
  echo.pipeline = pipeline;
  r.report.config_echo = config_to_json(echo);
  r.seconds = seconds_since(start);
  r.report.wall_clock_s = r.seconds;
  return r;
}

std::string metrics(const EvaluationReport& r) {
  return "det " + f3(r.detection_rate) + " TPR " + f3(r.tpr) + " FPR " + f3(r.fpr) + " reject " + f3(r.reject_rate);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance suite"};
  fs::path out = "acceptance_out";
  std::uint64_t seed = 1;
  std::vector<int> only;
  app.add_option("--out", out, "directory for reports");
  app.add_option("--seed", seed, "master seed of the closed-world corpus");
  app.add_option("--only", only, "run only these criteria");
  CLI11_PARSE(app, argc, argv);
  const auto want = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };
  fs::create_directories(out);
  const auto start = Clock::now();

  try {
    if (want(1)) criterion_nmf();
    if (want(2)) criterion_pool_and_regeneration();
    if (want(3)) criterion_cqt();
    if (want(4)) criterion_kernel_and_blobs();

    const CorpusConfig base;   // 10 preset rooms, 5 positions, 60 traces per room, wideband, no loss
    const PipelineConfig pipeline;

    Run closed;
    const bool need_closed = want(5) || want(7) || want(8) || want(9) || want(10);
    if (need_closed) {
      closed = run_corpus(base, pipeline, seed);
      write_report(out / "closed_world_run1", closed.report);
      std::printf("  closed world: %zu traces, %zu unfingerprinted, %s (%.1f s)\n", closed.data.size(),
                  closed.report.unfingerprinted, metrics(closed.report).c_str(), closed.seconds);
    }
    if (want(5)) {
      const auto& r = closed.report;
      record(5, r.detection_rate >= 0.60 && r.fpr <= 0.05 && closed.seconds < 900.0,
             "closed world: detection " + f3(r.detection_rate) + " (>= 0.600), FPR " + f3(r.fpr) +
                 " (<= 0.050), " + f3(closed.seconds) + " s (< 900)");
      const Run single = [&] {
        const auto t = Clock::now();
        Run s;
        ClassifierConfig c = pipeline.classifier;
        c.bagging = false;
        s.report = evaluate(closed.data, ensemble_factory(c), 5, seed, true);
        s.seconds = seconds_since(t);
        return s;
      }();
      std::printf("  bagging on: %s; single classifier: %s\n", metrics(closed.report).c_str(),
                  metrics(single.report).c_str());
    }

    if (want(6)) {
      std::vector<double> gaps;
      std::string per_seed;
      for (std::uint64_t s : {1ULL, 2ULL, 3ULL}) {
        CorpusConfig nb = base, swb = base;
        nb.channel.codec = CodecMode::kNarrowband;
        swb.channel.codec = CodecMode::kSuperwideband;
        const Run a = run_corpus(nb, pipeline, s);
        const Run b = run_corpus(swb, pipeline, s);
        write_report(out / ("codec_narrowband_seed" + std::to_string(s)), a.report);
        write_report(out / ("codec_superwideband_seed" + std::to_string(s)), b.report);
        gaps.push_back(b.report.detection_rate - a.report.detection_rate);
        per_seed += " seed " + std::to_string(s) + ": NB " + f3(a.report.detection_rate) + " SWB " +
                    f3(b.report.detection_rate) + ";";
      }
      double mean = 0.0;
      for (double g : gaps) mean += g / static_cast<double>(gaps.size());
      record(6, mean >= 0.05, "codec: mean SWB - NB detection gap " + f3(mean) + " (>= 0.050) over" + per_seed);
    }

    if (want(7)) {
      std::vector<double> tpr = {closed.report.tpr};
      for (double rate : {0.1, 0.2, 0.3}) {
        CorpusConfig c = base;
        c.channel.loss.loss_rate = rate;
        c.channel.loss.concealment = Concealment::kRepeatSpectrum;
        const Run r = run_corpus(c, pipeline, seed);
        write_report(out / ("loss_" + f3(rate)), r.report);
        tpr.push_back(r.report.tpr);
      }
      CorpusConfig sil = base;
      sil.channel.loss.loss_rate = 0.1;
      sil.channel.loss.concealment = Concealment::kSilence;
      const Run silence = run_corpus(sil, pipeline, seed);
      write_report(out / "loss_0.100_silence", silence.report);
      bool monotone = true;
      for (std::size_t i = 1; i < tpr.size(); ++i) monotone = monotone && tpr[i] <= tpr[i - 1];
      const bool strict = tpr[3] < tpr[1];
      const bool concealment = tpr[1] >= silence.report.tpr;
      record(7, monotone && strict && concealment,
             "loss TPR 0/.1/.2/.3: " + f3(tpr[0]) + " / " + f3(tpr[1]) + " / " + f3(tpr[2]) + " / " + f3(tpr[3]) +
                 "; repeat-spectrum " + f3(tpr[1]) + " vs silence " + f3(silence.report.tpr) + " at 10%");
    }

    if (want(8)) {
      const auto view = hide_locations(closed.data, 0.5, seed);
      auto r = evaluate(view, ensemble_factory(pipeline.classifier), 5, seed, true, true);
      write_report(out / "open_world", r);
      record(8, r.fpr <= 0.05 && r.reject_rate > closed.report.reject_rate,
             "open world (50% unlabelled): FPR " + f3(r.fpr) + " (<= 0.050), reject rate " + f3(r.reject_rate) +
                 " vs closed " + f3(closed.report.reject_rate));
    }

    if (want(9)) {
      const Run again = run_corpus(base, pipeline, seed);
      write_report(out / "closed_world_run2", again.report);
      bool same = true;
      for (const char* f : {"report.csv", "confusion.csv", "summary.txt"}) {
        same = same && slurp(out / "closed_world_run1" / f) == slurp(out / "closed_world_run2" / f);
      }
      record(9, same, std::string("closed world reports of two runs are ") + (same ? "byte-identical" : "different"));
    }

    if (want(10)) {
      const auto items = simulate_corpus(base, seed);
      double worst = 0.0;
      int compared = 0;
      for (std::size_t i = 0; i < items.size(); i += items.size() / 10) {
        AudioTrace doubled = items[i].trace;
        for (double& v : doubled.samples) v *= 2.0;
        const auto a = fingerprint_trace(items[i].entry, items[i].trace, pipeline);
        const auto b = fingerprint_trace(items[i].entry, doubled, pipeline);
        if (!a.fingerprint || !b.fingerprint) {
          worst = 1e300;
          continue;
        }
        for (std::size_t j = 0; j < a.fingerprint->p.size(); ++j) {
          const double x = a.fingerprint->p[j], y = b.fingerprint->p[j];
          if (x != 0.0 || y != 0.0) worst = std::max(worst, std::abs(x - y) / std::max(std::abs(x), std::abs(y)));
        }
        ++compared;
      }
      record(10, worst <= 1e-6 && compared > 0,
             "gain: worst per-band relative difference " + std::to_string(worst) + " over " + std::to_string(compared) +
                 " traces and their 2x copies");
    }
  } catch (const std::exception& e) {
    std::printf("acceptance aborted: %s\n", e.what());
    return 1;
  }

  int failed = 0;
  for (const auto& o : outcomes) failed += o.pass ? 0 : 1;
  std::printf("%zu criteria run, %d failed, %.1f s\n", outcomes.size(), failed, seconds_since(start));
  return failed == 0 ? 0 : 1;
}
