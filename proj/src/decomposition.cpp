#include "echoprint/decomposition.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <random>

#include "echoprint/error.hpp"

namespace echoprint {
namespace {

constexpr double kDenominatorGuard = 1e-9;

Eigen::MatrixXd random_positive(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  // Uniform on (0, 1].
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = 1.0 - dist(rng);
  }
  return m;
}

void require_non_negative(const Eigen::MatrixXd& m, const char* what) {
  if ((m.array() < 0.0).any() || !m.allFinite()) {
    throw DomainError(std::string("nmf: ") + what + " left the non-negative orthant");
  }
}

}  // namespace

NmfLayer nmf_layer(const Eigen::MatrixXd& O, int rank, const NmfOptions& opts) {
  if (!O.allFinite() || (O.array() < 0.0).any()) {
    throw DomainError("nmf_layer: input has negative or non-finite entries");
  }
  if (rank < 1 || rank > std::min(O.rows(), O.cols())) {
    throw ConfigError("nmf_layer: rank must be in [1, min(rows, cols)]");
  }
  NmfLayer layer;
  layer.rank = rank;
  if (O.isZero(0.0)) {
    layer.H = Eigen::MatrixXd::Zero(O.rows(), rank);
    layer.W = Eigen::MatrixXd::Zero(rank, O.cols());
    layer.residual = 0.0;
    return layer;
  }

  std::mt19937_64 rng(opts.seed);
  Eigen::MatrixXd H = random_positive(O.rows(), rank, rng);
  Eigen::MatrixXd W = random_positive(rank, O.cols(), rng);

  double prev = (O - H * W).norm();
  for (int it = 0; it < opts.max_iter; ++it) {
    // Lee-Seung multiplicative updates for the Frobenius objective.
    const Eigen::MatrixXd Wt = W.transpose();
    H.array() *= (O * Wt).array() / ((H * (W * Wt)).array() + kDenominatorGuard);
    const Eigen::MatrixXd Ht = H.transpose();
    W.array() *= (Ht * O).array() / (((Ht * H) * W).array() + kDenominatorGuard);
    if (opts.check_invariants) {
      require_non_negative(H, "H");
      require_non_negative(W, "W");
    }
    const double obj = (O - H * W).norm();
    layer.objective.push_back(obj);
    layer.iterations = it + 1;
    const double change = prev > 0.0 ? (prev - obj) / prev : 0.0;
    prev = obj;
    if (std::abs(change) < opts.tol) break;
  }
  layer.H = std::move(H);
  layer.W = std::move(W);
  layer.residual = prev;
  return layer;
}

Eigen::MatrixXd max_pool(const Eigen::MatrixXd& W, int half_window) {
  if (half_window < 0) throw ConfigError("max_pool: half window must be >= 0");
  if (half_window == 0) return W;
  const Eigen::Index n = W.cols();
  const Eigen::Index c = half_window;
  Eigen::MatrixXd out(W.rows(), n);
  std::deque<Eigen::Index> window;  // column indices, values decreasing
  for (Eigen::Index i = 0; i < W.rows(); ++i) {
    window.clear();
    Eigen::Index next = 0;  // next column to enter the window
    for (Eigen::Index j = 0; j < n; ++j) {
      const Eigen::Index hi = std::min(n - 1, j + c);
      for (; next <= hi; ++next) {
        while (!window.empty() && W(i, window.back()) <= W(i, next)) window.pop_back();
        window.push_back(next);
      }
      while (window.front() < j - c) window.pop_front();
      out(i, j) = W(i, window.front());
    }
  }
  return out;
}

std::vector<bool> direct_columns(const Eigen::MatrixXd& WX, double threshold, DirectRule rule,
                                 std::vector<double>* shares) {
  const auto r = static_cast<std::size_t>(WX.rows());
  std::vector<double> share(r, 0.0);
  const double total = WX.sum();
  if (total > 0.0) {
    for (std::size_t k = 0; k < r; ++k) {
      share[k] = WX.row(static_cast<Eigen::Index>(k)).sum() / total;
    }
  }
  std::vector<bool> mask(r, false);
  if (rule == DirectRule::kRowShare) {
    for (std::size_t k = 0; k < r; ++k) mask[k] = share[k] > threshold;
  } else if (total > 0.0) {
    std::vector<std::size_t> order(r);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return share[a] > share[b]; });
    double acc = 0.0;
    for (std::size_t k : order) {
      mask[k] = true;
      acc += share[k];
      if (acc > threshold) break;
    }
  }
  if (shares != nullptr) *shares = std::move(share);
  return mask;
}

DecompositionResult deep_decompose(const Eigen::MatrixXd& O, const DecompositionConfig& cfg) {
  if (cfg.layers < 1) throw ConfigError("deep_decompose: need at least one layer");
  if (static_cast<int>(cfg.ranks.size()) != cfg.layers) {
    throw ConfigError("deep_decompose: one rank per layer is required");
  }
  DecompositionResult result;
  Eigen::MatrixXd input = O;
  for (int k = 0; k < cfg.layers; ++k) {
    // Ranks are capped by the layer's input shape; short calls have few rows.
    const int cap = static_cast<int>(std::min(input.rows(), input.cols()));
    const int rank = std::max(1, std::min(cfg.ranks[static_cast<std::size_t>(k)], cap));
    NmfOptions opts = cfg.nmf;
    opts.seed = cfg.nmf.seed + static_cast<std::uint64_t>(k) * 0x9E3779B97F4A7C15ULL;
    NmfLayer layer = nmf_layer(input, rank, opts);
    if (k + 1 < cfg.layers) input = max_pool(layer.W, cfg.pool_half_window);
    result.layers.push_back(std::move(layer));
  }

  // WX = H2 H3 ... HK WK.
  Eigen::MatrixXd wx = result.layers.back().W;
  for (int k = cfg.layers - 1; k >= 1; --k) wx = result.layers[static_cast<std::size_t>(k)].H * wx;
  result.WX = std::move(wx);

  result.direct_mask =
      direct_columns(result.WX, cfg.direct_threshold, cfg.direct_rule, &result.row_share);

  const Eigen::MatrixXd& H1 = result.layers.front().H;
  Eigen::MatrixXd h_rev = H1, h_dir = H1;
  for (Eigen::Index k = 0; k < H1.cols(); ++k) {
    if (result.direct_mask[static_cast<std::size_t>(k)]) {
      h_rev.col(k).setZero();
    } else {
      h_dir.col(k).setZero();
    }
  }
  result.reverberant = h_rev * result.WX;
  result.direct = h_dir * result.WX;
  return result;
}

}  // namespace echoprint
