#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "echoprint/classifier.hpp"
#include "echoprint/error.hpp"

namespace echoprint {
namespace {

using Rows = std::vector<Eigen::Index>;

// Lloyd iterations from the given centroids; returns within-cluster SSE.
double lloyd(const Eigen::MatrixXd& X, const Rows& rows, Eigen::MatrixXd& centroids,
             std::vector<int>& assign, int max_iter = 100) {
  const Eigen::Index k = centroids.rows();
  assign.assign(rows.size(), 0);
  double sse = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    bool changed = it == 0;
    sse = 0.0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      double best = std::numeric_limits<double>::infinity();
      int arg = 0;
      for (Eigen::Index c = 0; c < k; ++c) {
        const double d = (X.row(rows[r]) - centroids.row(c)).squaredNorm();
        if (d < best) { best = d; arg = static_cast<int>(c); }
      }
      if (assign[r] != arg) { assign[r] = arg; changed = true; }
      sse += best;
    }
    if (!changed) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, X.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      sums.row(assign[r]) += X.row(rows[r]);
      ++counts[static_cast<std::size_t>(assign[r])];
    }
    for (Eigen::Index c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        centroids.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
      }
    }
  }
  return sse;
}

// Spherical-Gaussian BIC of a clustering of `n` points in `d` dimensions.
double bic(const std::vector<int>& sizes, double sse, double n, double d) {
  const auto k = static_cast<double>(sizes.size());
  if (n - k <= 0.0) return -std::numeric_limits<double>::infinity();
  const double variance = std::max(sse / ((n - k) * d), 1e-12);
  double loglik = -0.5 * n * d * std::log(2.0 * std::numbers::pi * variance) - 0.5 * (n - k) * d;
  for (int s : sizes) {
    if (s > 0) loglik += s * std::log(static_cast<double>(s) / n);
  }
  const double params = k * (d + 1.0);
  return loglik - 0.5 * params * std::log(n);
}

}  // namespace

XMeansResult xmeans(const Eigen::MatrixXd& X, int k_max, std::uint64_t seed) {
  const Eigen::Index n = X.rows();
  XMeansResult result;
  if (n == 0) return result;
  k_max = std::max(1, k_max);
  std::mt19937_64 rng(seed);
  const double d = static_cast<double>(X.cols());

  Rows all(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
  Eigen::MatrixXd centroids = X.colwise().mean();
  std::vector<int> assign;
  lloyd(X, all, centroids, assign);

  while (centroids.rows() < k_max) {
    std::vector<Eigen::RowVectorXd> next;
    bool split_any = false;
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
      Rows members;
      for (std::size_t r = 0; r < all.size(); ++r) {
        if (assign[r] == c) members.push_back(all[r]);
      }
      const bool room_left = static_cast<Eigen::Index>(next.size()) + (centroids.rows() - c) < k_max;
      if (members.size() < 2 || !room_left) {
        next.emplace_back(centroids.row(c));
        continue;
      }
      // Two children seeded from two distinct random members.
      std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
      const std::size_t a = pick(rng);
      std::size_t b = pick(rng);
      for (int tries = 0; b == a && tries < 8; ++tries) b = pick(rng);
      if (b == a) b = (a + 1) % members.size();
      Eigen::MatrixXd child(2, X.cols());
      child.row(0) = X.row(members[a]);
      child.row(1) = X.row(members[b]);
      std::vector<int> child_assign;
      const double child_sse = lloyd(X, members, child, child_assign);

      Eigen::MatrixXd parent = centroids.row(c);
      std::vector<int> parent_assign;
      const double parent_sse = lloyd(X, members, parent, parent_assign, 1);

      std::vector<int> sizes(2, 0);
      for (int v : child_assign) ++sizes[static_cast<std::size_t>(v)];
      const double m = static_cast<double>(members.size());
      const bool accept = sizes[0] > 0 && sizes[1] > 0 &&
                          bic(sizes, child_sse, m, d) > bic({static_cast<int>(members.size())}, parent_sse, m, d);
      if (accept) {
        next.emplace_back(child.row(0));
        next.emplace_back(child.row(1));
        split_any = true;
      } else {
        next.emplace_back(centroids.row(c));
      }
    }
    if (!split_any) break;
    centroids.resize(static_cast<Eigen::Index>(next.size()), X.cols());
    for (std::size_t c = 0; c < next.size(); ++c) centroids.row(static_cast<Eigen::Index>(c)) = next[c];
    lloyd(X, all, centroids, assign);
  }

  // Drop clusters that ended up empty and renumber.
  std::vector<int> remap(static_cast<std::size_t>(centroids.rows()), -1);
  int used = 0;
  for (int a : assign) {
    if (remap[static_cast<std::size_t>(a)] < 0) remap[static_cast<std::size_t>(a)] = used++;
  }
  result.centroids.resize(used, X.cols());
  for (std::size_t c = 0; c < remap.size(); ++c) {
    if (remap[c] >= 0) result.centroids.row(remap[c]) = centroids.row(static_cast<Eigen::Index>(c));
  }
  result.assignment.resize(assign.size());
  for (std::size_t r = 0; r < assign.size(); ++r) result.assignment[r] = remap[static_cast<std::size_t>(assign[r])];
  return result;
}

PrefilterResult prefilter_negatives(const Eigen::MatrixXd& negatives, const Eigen::MatrixXd& positives,
                                    std::uint64_t seed, double delta_rel) {
  if (negatives.rows() == 0 || positives.rows() == 0) {
    throw EmptyInputError("prefilter_negatives: both sets must be nonempty");
  }
  if (negatives.cols() != positives.cols()) throw ShapeError("prefilter_negatives: dimension mismatch");
  const int k_max = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(negatives.rows()))));
  const XMeansResult clusters = xmeans(negatives, k_max, seed);

  PrefilterResult out;
  out.clusters = static_cast<int>(clusters.centroids.rows());
  std::vector<bool> contaminated(static_cast<std::size_t>(out.clusters), false);
  for (Eigen::Index i = 0; i < negatives.rows(); ++i) {
    for (Eigen::Index p = 0; p < positives.rows(); ++p) {
      const double tol = delta_rel * std::max(1.0, positives.row(p).norm());
      if ((negatives.row(i) - positives.row(p)).norm() <= tol) {
        contaminated[static_cast<std::size_t>(clusters.assignment[static_cast<std::size_t>(i)])] = true;
        break;
      }
    }
  }
  for (bool c : contaminated) out.removed_clusters += c ? 1 : 0;
  for (Eigen::Index i = 0; i < negatives.rows(); ++i) {
    if (!contaminated[static_cast<std::size_t>(clusters.assignment[static_cast<std::size_t>(i)])]) {
      out.kept.push_back(static_cast<std::size_t>(i));
    }
  }
  if (out.kept.empty()) throw EmptyNegativesError("prefilter_negatives: every negative cluster was contaminated");
  return out;
}

}  // namespace echoprint
