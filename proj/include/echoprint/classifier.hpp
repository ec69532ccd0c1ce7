#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "echoprint/fingerprint.hpp"

namespace echoprint {

double rbf_kernel(std::span<const double> x, std::span<const double> y, double gamma);

// Gram matrix of the rows of X.
Eigen::MatrixXd rbf_gram(const Eigen::MatrixXd& X, double gamma);

struct SvmOptions {
  double C = 10.0;
  double tol = 1e-3;
  int max_iter = 100000;
};

// Soft-margin RBF machine: decision(x) = sum_i alpha_i K(sv_i, x) + bias,
// with alpha_i already carrying the label sign.
struct KernelClassifier {
  Eigen::MatrixXd support_vectors;  // one row per vector
  std::vector<double> alphas;
  double bias = 0.0;
  double gamma = 1.0;
  double kkt_gap = 0.0;             // max violating-pair gap at exit
  int iterations = 0;

  double decision(std::span<const double> x) const;
};

// Sequential minimal optimisation with second-order working-set selection.
// Labels are +1 / -1.
KernelClassifier train_svm(const Eigen::MatrixXd& X, std::span<const int> y, double gamma,
                           const SvmOptions& opts = {});

struct XMeansResult {
  std::vector<int> assignment;   // cluster index per point
  Eigen::MatrixXd centroids;     // one row per cluster
};

// k-means with BIC-driven splitting between 1 and k_max clusters.
XMeansResult xmeans(const Eigen::MatrixXd& X, int k_max, std::uint64_t seed);

struct PrefilterResult {
  std::vector<std::size_t> kept;   // indices into the negative set
  int clusters = 0;
  int removed_clusters = 0;
};

// Clusters the negatives (k_max = ceil(sqrt(n))) and drops every cluster that
// holds a vector within delta_rel * max(1, |p|) of some positive p.
PrefilterResult prefilter_negatives(const Eigen::MatrixXd& negatives,
                                    const Eigen::MatrixXd& positives, std::uint64_t seed,
                                    double delta_rel = 1e-6);

// Fingerprint to classifier input. kLogMean uses log(p_j / n_segments + 1e-9),
// which takes out the trace length and compresses the band dynamic range.
enum class FeatureMap { kRaw, kLogMean };

std::string to_string(FeatureMap f);
FeatureMap feature_map_from_string(const std::string& s);
std::vector<double> feature_vector(const FingerprintVector& fp, FeatureMap map);

// How the bagged members of a location draw their positives.
enum class PositiveSplit {
  kShared,       // every member sees all positives
  kPartitioned,  // disjoint shares (bootstrap draws when there are fewer than members)
};

std::string to_string(PositiveSplit p);
PositiveSplit positive_split_from_string(const std::string& s);

struct ClassifierConfig {
  int members = 10;
  double accept_fraction = 0.6;  // 6 of 10 votes
  PositiveSplit positive_split = PositiveSplit::kShared;
  double negative_fraction = 0.5;  // share of the negative pool drawn per member
  FeatureMap features = FeatureMap::kLogMean;
  SvmOptions svm;
  double gamma = 0.0;            // 0 selects gamma_scale / median pairwise squared distance
  double gamma_scale = 1.0;
  bool bagging = true;           // false: one classifier on all data per location
  bool prefilter = true;
  bool standardize = true;
};

struct LocationModel {
  std::string location_label;
  std::vector<KernelClassifier> members;
  int min_votes = 6;
  bool low_confidence = false;
};

struct EnsembleModel {
  ClassifierConfig config;
  std::vector<double> mean;     // per-band standardisation
  std::vector<double> scale;
  double gamma = 1.0;
  std::vector<LocationModel> per_location;
  std::string reject_label = "unknown";
  std::vector<std::string> warnings;

  std::size_t dims() const { return mean.size(); }
  std::vector<double> standardize(std::span<const double> x) const;
  std::size_t member_count() const;
};

struct LabelledVector {
  std::string label;  // kUnlabelled for unlabelled samples
  std::vector<double> x;
};

// Rows of the negative pool drawn for one bagged member.
std::size_t negatives_per_member(std::size_t pool, double fraction);

// Members of one location; `positives` and `pool` are standardised rows.
LocationModel train_location(const std::string& label, const Eigen::MatrixXd& positives,
                             const Eigen::MatrixXd& pool, double gamma,
                             const ClassifierConfig& cfg, std::uint64_t seed,
                             std::vector<std::string>* warnings = nullptr);

EnsembleModel train_ensemble(std::span<const LabelledVector> training, const ClassifierConfig& cfg,
                             std::uint64_t seed);
EnsembleModel train_ensemble(std::span<const FingerprintVector> training, const ClassifierConfig& cfg,
                             std::uint64_t seed);

struct LocationVote {
  std::string label;
  int votes = 0;
  int members = 0;
  bool accepted = false;
};

struct Classification {
  std::string label;
  std::vector<LocationVote> votes;  // in model location order
  bool rejected = true;
};

// Accepts a location with at least min_votes positive members; the single
// best-voted accepted location wins, ties and no acceptance give reject_label.
Classification classify(const EnsembleModel& model, std::span<const double> x);
inline Classification classify(const EnsembleModel& model, const FingerprintVector& x) {
  return classify(model, feature_vector(x, model.config.features));
}

// Versioned JSON; field order: version, config, standardization, gamma,
// reject_label, locations (label, min_votes, members with bias, gamma,
// alphas and support vectors).
void save_model(const std::filesystem::path& path, const EnsembleModel& model);
EnsembleModel load_model(const std::filesystem::path& path);

}  // namespace echoprint
