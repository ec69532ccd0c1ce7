#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "echoprint/decomposition.hpp"
#include "echoprint/error.hpp"

using namespace echoprint;

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = u(rng);
  }
  return m;
}

// Window max written the obvious way.
Eigen::MatrixXd brute_pool(const Eigen::MatrixXd& W, int c) {
  Eigen::MatrixXd out(W.rows(), W.cols());
  for (Eigen::Index i = 0; i < W.rows(); ++i) {
    for (Eigen::Index j = 0; j < W.cols(); ++j) {
      double m = W(i, j);
      for (Eigen::Index k = std::max<Eigen::Index>(0, j - c); k <= std::min<Eigen::Index>(W.cols() - 1, j + c); ++k) {
        m = std::max(m, W(i, k));
      }
      out(i, j) = m;
    }
  }
  return out;
}

}  // namespace

TEST(Nmf, ObjectiveNeverIncreasesAndFactorsStayNonNegative) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const int rows = 2 + static_cast<int>(rng() % 40);
    const int cols = 2 + static_cast<int>(rng() % 300);
    const Eigen::MatrixXd O = random_matrix(rows, cols, rng());
    NmfOptions opts;
    opts.tol = 1e-6;
    opts.max_iter = 200;
    opts.check_invariants = true;
    opts.seed = rng();
    const int rank = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(std::min(rows, cols)));
    const NmfLayer layer = nmf_layer(O, rank, opts);
    ASSERT_FALSE(layer.objective.empty());
    for (std::size_t k = 1; k < layer.objective.size(); ++k) {
      ASSERT_LE(layer.objective[k], layer.objective[k - 1] * (1.0 + 1e-12)) << "trial " << trial << " step " << k;
    }
    EXPECT_TRUE((layer.H.array() >= 0.0).all());
    EXPECT_TRUE((layer.W.array() >= 0.0).all());
    EXPECT_EQ(layer.H.rows(), rows);
    EXPECT_EQ(layer.W.cols(), cols);
    EXPECT_NEAR(layer.residual, (O - layer.H * layer.W).norm(), 1e-9);
  }
}

TEST(Nmf, RecoversARankOneProduct) {
  const Eigen::VectorXd u = random_matrix(30, 1, 3).col(0).array() + 0.1;
  const Eigen::RowVectorXd v = random_matrix(1, 200, 4).row(0).array() + 0.1;
  const Eigen::MatrixXd O = u * v;
  NmfOptions opts;
  opts.tol = 1e-14;
  opts.max_iter = 5000;
  const NmfLayer layer = nmf_layer(O, 1, opts);
  EXPECT_LT((O - layer.H * layer.W).norm() / O.norm(), 1e-4);
}

TEST(Nmf, InputChecks) {
  Eigen::MatrixXd O = random_matrix(4, 6, 1);
  EXPECT_THROW(nmf_layer(O, 0), ConfigError);
  EXPECT_THROW(nmf_layer(O, 5), ConfigError);
  O(1, 1) = -0.5;
  EXPECT_THROW(nmf_layer(O, 2), DomainError);
  const NmfLayer zero = nmf_layer(Eigen::MatrixXd::Zero(3, 5), 2);
  EXPECT_TRUE(zero.H.isZero(0.0));
  EXPECT_TRUE(zero.W.isZero(0.0));
}

TEST(Nmf, SameSeedSameFactors) {
  const Eigen::MatrixXd O = random_matrix(8, 40, 9);
  const NmfLayer a = nmf_layer(O, 3);
  const NmfLayer b = nmf_layer(O, 3);
  EXPECT_TRUE(a.H == b.H);
  EXPECT_TRUE(a.W == b.W);
}

TEST(MaxPool, MatchesBruteForce) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::MatrixXd W = random_matrix(1 + static_cast<int>(rng() % 5), 1 + static_cast<int>(rng() % 120), rng());
    const int c = static_cast<int>(rng() % 30);
    EXPECT_TRUE(max_pool(W, c) == brute_pool(W, c)) << "trial " << trial;
  }
  const Eigen::MatrixXd W = random_matrix(2, 10, 1);
  EXPECT_TRUE(max_pool(W, 0) == W);
  EXPECT_THROW(max_pool(W, -1), ConfigError);
}

TEST(DirectColumns, RowShareAndCumulativeRules) {
  Eigen::MatrixXd WX(3, 2);
  WX << 9.5, 9.5,  // share 0.95
      0.5, 0.0,    // 0.025
      0.5, 0.0;    // 0.025
  std::vector<double> shares;
  auto mask = direct_columns(WX, 0.9, DirectRule::kRowShare, &shares);
  EXPECT_EQ(mask, (std::vector<bool>{true, false, false}));
  EXPECT_NEAR(shares[0], 0.95, 1e-12);
  mask = direct_columns(WX, 0.9, DirectRule::kCumulativeShare);
  EXPECT_EQ(mask, (std::vector<bool>{true, false, false}));

  Eigen::MatrixXd even(4, 1);
  even << 1, 1, 1, 1;
  EXPECT_EQ(direct_columns(even, 0.9, DirectRule::kRowShare), std::vector<bool>(4, false));
  // 0.25 + 0.25 + 0.25 + 0.25 only passes 0.9 with all four rows.
  EXPECT_EQ(direct_columns(even, 0.9, DirectRule::kCumulativeShare), std::vector<bool>(4, true));
  EXPECT_EQ(direct_columns(even, 0.6, DirectRule::kCumulativeShare),
            (std::vector<bool>{true, true, true, false}));
}

TEST(DeepDecompose, RegenerationsPartitionH1TimesWX) {
  const Eigen::MatrixXd O = random_matrix(6, 512, 21) * 100.0;
  DecompositionConfig cfg;
  cfg.direct_threshold = 0.5;
  const auto r = deep_decompose(O, cfg);
  ASSERT_EQ(r.layers.size(), 3u);
  // Ranks capped by each layer's input.
  EXPECT_EQ(r.layers[0].rank, 6);
  EXPECT_EQ(r.layers[1].rank, 6);
  EXPECT_EQ(r.layers[2].rank, 6);
  // WX = H2 H3 W3, computed independently.
  const Eigen::MatrixXd wx = r.layers[1].H * (r.layers[2].H * r.layers[2].W);
  EXPECT_LT((r.WX - wx).cwiseAbs().maxCoeff(), 1e-9 * std::max(1.0, wx.cwiseAbs().maxCoeff()));
  const Eigen::MatrixXd full = r.layers[0].H * r.WX;
  EXPECT_LT((r.reverberant + r.direct - full).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, full.cwiseAbs().maxCoeff()));
  EXPECT_TRUE((r.reverberant.array() >= 0.0).all());
  EXPECT_TRUE((r.direct.array() >= 0.0).all());
}

TEST(DeepDecompose, SecondLayerSeesThePooledWeights) {
  const Eigen::MatrixXd O = random_matrix(4, 64, 2);
  DecompositionConfig cfg;
  cfg.layers = 2;
  cfg.ranks = {4, 2};
  cfg.pool_half_window = 3;
  const auto r = deep_decompose(O, cfg);
  const Eigen::MatrixXd pooled = max_pool(r.layers[0].W, 3);
  NmfOptions opts = cfg.nmf;
  opts.seed = cfg.nmf.seed + 0x9E3779B97F4A7C15ULL;
  const NmfLayer second = nmf_layer(pooled, 2, opts);
  EXPECT_TRUE(second.H == r.layers[1].H);
}

TEST(DeepDecompose, ConfigChecks) {
  const Eigen::MatrixXd O = random_matrix(3, 10, 1);
  DecompositionConfig cfg;
  cfg.ranks = {3, 2};
  EXPECT_THROW(deep_decompose(O, cfg), ConfigError);
  cfg.layers = 0;
  EXPECT_THROW(deep_decompose(O, cfg), ConfigError);
}
