#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "echoprint/audio.hpp"

namespace echoprint {

// One factorisation O ~ H W with non-negative factors.
struct NmfLayer {
  Eigen::MatrixXd H;
  Eigen::MatrixXd W;
  int rank = 0;
  double residual = 0.0;           // final ||O - HW||_F
  std::vector<double> objective;   // ||O - HW||_F after each update
  int iterations = 0;
};

struct NmfOptions {
  double tol = 0.05;   // stop when the relative objective change drops below this
  int max_iter = 500;
  std::uint64_t seed = 1;
  // Re-checks non-negativity after every update and throws if violated.
  bool check_invariants = false;
};

// How columns of H1 are classified as direct sound from the rows of WX.
enum class DirectRule {
  // A row is direct when its share of the total weight exceeds the threshold.
  kRowShare,
  // The heaviest rows, taken in descending order, until their combined share
  // exceeds the threshold. Identical to kRowShare when one row dominates.
  kCumulativeShare,
};

struct DecompositionConfig {
  int layers = 3;
  std::vector<int> ranks = {100, 50, 25};
  int pool_half_window = 20;
  double direct_threshold = 0.9;
  DirectRule direct_rule = DirectRule::kCumulativeShare;
  NmfOptions nmf;
};

struct DecompositionResult {
  std::vector<NmfLayer> layers;
  Eigen::MatrixXd WX;                // H2 ... HK WK (W1 when K == 1)
  std::vector<bool> direct_mask;     // per column of H1
  std::vector<double> row_share;     // normalised weight of each WX row
  Eigen::MatrixXd reverberant;       // H1 with direct columns zeroed, times WX
  Eigen::MatrixXd direct;            // complementary regeneration
};

NmfLayer nmf_layer(const Eigen::MatrixXd& O, int rank, const NmfOptions& opts = {});

// Sliding maximum over each row; window [j - c, j + c] clamped to the row.
Eigen::MatrixXd max_pool(const Eigen::MatrixXd& W, int half_window);

std::vector<bool> direct_columns(const Eigen::MatrixXd& WX, double threshold, DirectRule rule,
                                 std::vector<double>* shares = nullptr);

DecompositionResult deep_decompose(const Eigen::MatrixXd& O, const DecompositionConfig& cfg);

inline DecompositionResult deep_decompose(const TraceMatrix& O, const DecompositionConfig& cfg) {
  return deep_decompose(O.values, cfg);
}

}  // namespace echoprint
