#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include <json.hpp>

#include "echoprint/classifier.hpp"
#include "echoprint/error.hpp"
#include "echoprint/manifest.hpp"

namespace echoprint {
namespace {

constexpr int kModelVersion = 1;

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& X, std::span<const std::size_t> idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), X.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

double median_pairwise_sq_distance(const Eigen::MatrixXd& X) {
  std::vector<double> d;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < X.rows(); ++j) d.push_back((X.row(i) - X.row(j)).squaredNorm());
  }
  if (d.empty()) return 0.0;
  const std::size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
  return d[mid];
}

KernelClassifier train_member(const Eigen::MatrixXd& pos, const Eigen::MatrixXd& neg, double gamma,
                              const SvmOptions& opts) {
  Eigen::MatrixXd X(pos.rows() + neg.rows(), pos.cols());
  X << pos, neg;
  std::vector<int> y(static_cast<std::size_t>(X.rows()), -1);
  std::fill(y.begin(), y.begin() + pos.rows(), 1);
  return train_svm(X, y, gamma, opts);
}

}  // namespace

std::string to_string(FeatureMap f) { return f == FeatureMap::kRaw ? "raw" : "log_mean"; }

FeatureMap feature_map_from_string(const std::string& s) {
  if (s == "raw") return FeatureMap::kRaw;
  if (s == "log_mean") return FeatureMap::kLogMean;
  throw ConfigError("unknown feature map '" + s + "'");
}

std::vector<double> feature_vector(const FingerprintVector& fp, FeatureMap map) {
  if (map == FeatureMap::kRaw) return fp.p;
  if (fp.n_segments <= 0) throw ShapeError("feature_vector: fingerprint without segments");
  std::vector<double> x(fp.p.size());
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = std::log(fp.p[j] / fp.n_segments + 1e-9);
  return x;
}

std::string to_string(PositiveSplit p) { return p == PositiveSplit::kShared ? "shared" : "partitioned"; }

PositiveSplit positive_split_from_string(const std::string& s) {
  if (s == "shared") return PositiveSplit::kShared;
  if (s == "partitioned") return PositiveSplit::kPartitioned;
  throw ConfigError("unknown positive split '" + s + "'");
}

std::size_t negatives_per_member(std::size_t pool, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("negative_fraction must be in (0, 1]");
  const auto n = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(pool) - 1e-9));
  return std::clamp<std::size_t>(n, 1, pool);
}

std::vector<double> EnsembleModel::standardize(std::span<const double> x) const {
  if (x.size() != mean.size()) throw ShapeError("classify: fingerprint dimension mismatch");
  std::vector<double> z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = (x[i] - mean[i]) / scale[i];
  return z;
}

std::size_t EnsembleModel::member_count() const {
  std::size_t n = 0;
  for (const auto& l : per_location) n += l.members.size();
  return n;
}

LocationModel train_location(const std::string& label, const Eigen::MatrixXd& positives,
                             const Eigen::MatrixXd& pool, double gamma, const ClassifierConfig& cfg,
                             std::uint64_t seed, std::vector<std::string>* warnings) {
  if (positives.rows() == 0) throw TrainingError("train_location: no positives for " + label);
  if (pool.rows() == 0) throw TrainingError("train_location: empty negative pool for " + label);
  LocationModel model;
  model.location_label = label;
  std::mt19937_64 rng(seed);

  if (!cfg.bagging) {
    model.members.push_back(train_member(positives, pool, gamma, cfg.svm));
    model.min_votes = 1;
  } else {
    const int m = std::max(1, cfg.members);
    const auto n_pos = static_cast<std::size_t>(positives.rows());
    const auto n_pool = static_cast<std::size_t>(pool.rows());
    std::vector<std::size_t> order(n_pos);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const bool shared = cfg.positive_split == PositiveSplit::kShared;
    const bool resample = !shared && n_pos < static_cast<std::size_t>(m);
    if (resample && warnings != nullptr) {
      warnings->push_back(label + ": " + std::to_string(n_pos) + " positives for " + std::to_string(m) +
                          " members; members share resampled positives");
    }
    const std::size_t neg_take = negatives_per_member(n_pool, cfg.negative_fraction);
    for (int k = 0; k < m; ++k) {
      std::vector<std::size_t> pos_idx;
      if (shared) {
        pos_idx = order;
      } else if (!resample) {
        // Disjoint tenths.
        const std::size_t a = n_pos * static_cast<std::size_t>(k) / static_cast<std::size_t>(m);
        const std::size_t b = n_pos * static_cast<std::size_t>(k + 1) / static_cast<std::size_t>(m);
        pos_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(a), order.begin() + static_cast<std::ptrdiff_t>(b));
      } else {
        std::uniform_int_distribution<std::size_t> pick(0, n_pos - 1);
        for (std::size_t i = 0; i < n_pos; ++i) pos_idx.push_back(pick(rng));
        std::sort(pos_idx.begin(), pos_idx.end());
        pos_idx.erase(std::unique(pos_idx.begin(), pos_idx.end()), pos_idx.end());
      }
      std::vector<std::size_t> neg_idx(n_pool);
      std::iota(neg_idx.begin(), neg_idx.end(), 0);
      std::shuffle(neg_idx.begin(), neg_idx.end(), rng);
      neg_idx.resize(neg_take);
      std::sort(neg_idx.begin(), neg_idx.end());
      model.members.push_back(
          train_member(rows_of(positives, pos_idx), rows_of(pool, neg_idx), gamma, cfg.svm));
    }
    model.min_votes = static_cast<int>(std::ceil(cfg.accept_fraction * m - 1e-9));
  }

  // Low confidence: members barely separate their own training data.
  double spread = 0.0;
  for (const auto& mem : model.members) {
    for (Eigen::Index i = 0; i < positives.rows(); ++i) {
      const Eigen::VectorXd row = positives.row(i).transpose();
      spread += std::abs(mem.decision(std::span<const double>(row.data(), static_cast<std::size_t>(row.size()))));
    }
  }
  spread /= static_cast<double>(model.members.size() * static_cast<std::size_t>(positives.rows()));
  model.low_confidence = spread < 0.1;
  return model;
}

EnsembleModel train_ensemble(std::span<const LabelledVector> training, const ClassifierConfig& cfg,
                             std::uint64_t seed) {
  if (training.empty()) throw TrainingError("train_ensemble: empty training set");
  const std::size_t d = training.front().x.size();
  EnsembleModel model;
  model.config = cfg;
  Eigen::MatrixXd X(static_cast<Eigen::Index>(training.size()), static_cast<Eigen::Index>(d));
  std::set<std::string> labels;
  for (std::size_t i = 0; i < training.size(); ++i) {
    if (training[i].x.size() != d) throw ShapeError("train_ensemble: fingerprint dimension mismatch");
    for (std::size_t k = 0; k < d; ++k) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = training[i].x[k];
    if (training[i].label != kUnlabelled) labels.insert(training[i].label);
  }
  if (labels.empty()) throw TrainingError("train_ensemble: no labelled samples");

  model.mean.assign(d, 0.0);
  model.scale.assign(d, 1.0);
  if (cfg.standardize) {
    for (std::size_t k = 0; k < d; ++k) {
      const auto col = X.col(static_cast<Eigen::Index>(k));
      const double mu = col.mean();
      const double var = (col.array() - mu).square().mean();
      model.mean[k] = mu;
      model.scale[k] = var > 1e-24 ? std::sqrt(var) : 1.0;
    }
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      for (Eigen::Index k = 0; k < X.cols(); ++k) {
        X(i, k) = (X(i, k) - model.mean[static_cast<std::size_t>(k)]) / model.scale[static_cast<std::size_t>(k)];
      }
    }
  }
  if (cfg.gamma > 0.0) {
    model.gamma = cfg.gamma;
  } else {
    const double med = median_pairwise_sq_distance(X);
    model.gamma = cfg.gamma_scale * (med > 0.0 ? 1.0 / med : 1.0);
  }

  std::uint64_t loc_index = 0;
  for (const auto& label : labels) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < training.size(); ++i) {
      (training[i].label == label ? pos : neg).push_back(i);
    }
    if (neg.empty()) throw TrainingError("train_ensemble: no negatives for " + label);
    const Eigen::MatrixXd P = rows_of(X, pos);
    Eigen::MatrixXd N = rows_of(X, neg);
    const std::uint64_t loc_seed = seed ^ (0x9E3779B97F4A7C15ULL * (++loc_index));
    if (cfg.prefilter) {
      try {
        const auto kept = prefilter_negatives(N, P, loc_seed);
        if (kept.kept.size() != neg.size()) N = rows_of(N, kept.kept);
      } catch (const EmptyNegativesError&) {
        model.warnings.push_back(label + ": prefilter removed every negative; using the unfiltered pool");
      }
    }
    model.per_location.push_back(train_location(label, P, N, model.gamma, cfg, loc_seed, &model.warnings));
  }
  return model;
}

EnsembleModel train_ensemble(std::span<const FingerprintVector> training, const ClassifierConfig& cfg,
                             std::uint64_t seed) {
  std::vector<LabelledVector> rows;
  rows.reserve(training.size());
  for (const auto& f : training) {
    rows.push_back({f.label.empty() ? kUnlabelled : f.label, feature_vector(f, cfg.features)});
  }
  return train_ensemble(rows, cfg, seed);
}

Classification classify(const EnsembleModel& model, std::span<const double> x) {
  const auto z = model.standardize(x);
  Classification out;
  int best = -1;
  int best_count = 0;
  for (const auto& loc : model.per_location) {
    LocationVote v;
    v.label = loc.location_label;
    v.members = static_cast<int>(loc.members.size());
    for (const auto& m : loc.members) v.votes += m.decision(z) > 0.0 ? 1 : 0;
    v.accepted = v.votes >= loc.min_votes;
    if (v.accepted) {
      if (v.votes > best) {
        best = v.votes;
        best_count = 1;
        out.label = v.label;
      } else if (v.votes == best) {
        ++best_count;
      }
    }
    out.votes.push_back(std::move(v));
  }
  out.rejected = best < 0 || best_count > 1;
  if (out.rejected) out.label = model.reject_label;
  return out;
}

void save_model(const std::filesystem::path& path, const EnsembleModel& model) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["version"] = kModelVersion;
  const auto& c = model.config;
  j["config"] = {{"members", c.members},
                 {"accept_fraction", c.accept_fraction},
                 {"positive_split", to_string(c.positive_split)},
                 {"negative_fraction", c.negative_fraction},
                 {"features", to_string(c.features)},
                 {"C", c.svm.C},               {"tol", c.svm.tol},
                 {"max_iter", c.svm.max_iter}, {"gamma", c.gamma}, {"gamma_scale", c.gamma_scale},
                 {"bagging", c.bagging},       {"prefilter", c.prefilter},
                 {"standardize", c.standardize}};
  j["standardization"] = {{"mean", model.mean}, {"scale", model.scale}};
  j["gamma"] = model.gamma;
  j["reject_label"] = model.reject_label;
  ordered_json locs = ordered_json::array();
  for (const auto& loc : model.per_location) {
    ordered_json l;
    l["label"] = loc.location_label;
    l["min_votes"] = loc.min_votes;
    l["low_confidence"] = loc.low_confidence;
    ordered_json members = ordered_json::array();
    for (const auto& m : loc.members) {
      ordered_json mj;
      mj["bias"] = m.bias;
      mj["gamma"] = m.gamma;
      mj["kkt_gap"] = m.kkt_gap;
      mj["alphas"] = m.alphas;
      ordered_json svs = ordered_json::array();
      for (Eigen::Index i = 0; i < m.support_vectors.rows(); ++i) {
        std::vector<double> row(static_cast<std::size_t>(m.support_vectors.cols()));
        for (Eigen::Index k = 0; k < m.support_vectors.cols(); ++k) row[static_cast<std::size_t>(k)] = m.support_vectors(i, k);
        svs.push_back(row);
      }
      mj["support_vectors"] = svs;
      members.push_back(mj);
    }
    l["members"] = members;
    locs.push_back(l);
  }
  j["locations"] = locs;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write model " + path.string());
  out << j.dump(1) << '\n';
}

EnsembleModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model " + path.string());
  EnsembleModel model;
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("version").get<int>() != kModelVersion) throw DataError("unsupported model version in " + path.string());
    const auto& c = j.at("config");
    model.config.members = c.at("members").get<int>();
    model.config.accept_fraction = c.at("accept_fraction").get<double>();
    model.config.positive_split = positive_split_from_string(c.at("positive_split").get<std::string>());
    model.config.negative_fraction = c.at("negative_fraction").get<double>();
    model.config.features = feature_map_from_string(c.at("features").get<std::string>());
    model.config.svm.C = c.at("C").get<double>();
    model.config.svm.tol = c.at("tol").get<double>();
    model.config.svm.max_iter = c.at("max_iter").get<int>();
    model.config.gamma = c.at("gamma").get<double>();
    model.config.gamma_scale = c.at("gamma_scale").get<double>();
    model.config.bagging = c.at("bagging").get<bool>();
    model.config.prefilter = c.at("prefilter").get<bool>();
    model.config.standardize = c.at("standardize").get<bool>();
    model.mean = j.at("standardization").at("mean").get<std::vector<double>>();
    model.scale = j.at("standardization").at("scale").get<std::vector<double>>();
    if (model.mean.size() != model.scale.size()) throw DataError("standardization size mismatch");
    model.gamma = j.at("gamma").get<double>();
    model.reject_label = j.at("reject_label").get<std::string>();
    for (const auto& l : j.at("locations")) {
      LocationModel loc;
      loc.location_label = l.at("label").get<std::string>();
      loc.min_votes = l.at("min_votes").get<int>();
      loc.low_confidence = l.at("low_confidence").get<bool>();
      for (const auto& mj : l.at("members")) {
        KernelClassifier m;
        m.bias = mj.at("bias").get<double>();
        m.gamma = mj.at("gamma").get<double>();
        m.kkt_gap = mj.at("kkt_gap").get<double>();
        m.alphas = mj.at("alphas").get<std::vector<double>>();
        const auto svs = mj.at("support_vectors").get<std::vector<std::vector<double>>>();
        if (svs.size() != m.alphas.size()) throw DataError("alpha/support vector count mismatch");
        m.support_vectors.resize(static_cast<Eigen::Index>(svs.size()), static_cast<Eigen::Index>(model.mean.size()));
        for (std::size_t i = 0; i < svs.size(); ++i) {
          if (svs[i].size() != model.mean.size()) throw DataError("support vector dimension mismatch");
          for (std::size_t k = 0; k < svs[i].size(); ++k) {
            m.support_vectors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = svs[i][k];
          }
        }
        loc.members.push_back(std::move(m));
      }
      model.per_location.push_back(std::move(loc));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed model " + path.string() + ": " + e.what());
  }
  return model;
}

}  // namespace echoprint
