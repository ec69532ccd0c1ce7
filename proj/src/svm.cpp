#include <algorithm>
#include <cmath>
#include <limits>

#include "echoprint/classifier.hpp"
#include "echoprint/error.hpp"

namespace echoprint {
namespace {

constexpr double kTau = 1e-12;

}  // namespace

double rbf_kernel(std::span<const double> x, std::span<const double> y, double gamma) {
  if (x.size() != y.size()) throw ShapeError("rbf_kernel: dimension mismatch");
  if (!(gamma > 0.0)) throw ConfigError("rbf_kernel: gamma must be positive");
  double d2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

Eigen::MatrixXd rbf_gram(const Eigen::MatrixXd& X, double gamma) {
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd K(n, n);
  const Eigen::VectorXd sq = X.rowwise().squaredNorm();
  const Eigen::MatrixXd dots = X * X.transpose();
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d2 = std::max(0.0, sq(i) + sq(j) - 2.0 * dots(i, j));
      K(i, j) = K(j, i) = std::exp(-gamma * d2);
    }
  }
  return K;
}

double KernelClassifier::decision(std::span<const double> x) const {
  if (support_vectors.rows() > 0 && static_cast<Eigen::Index>(x.size()) != support_vectors.cols()) {
    throw ShapeError("decision: dimension mismatch");
  }
  double f = bias;
  for (Eigen::Index i = 0; i < support_vectors.rows(); ++i) {
    double d2 = 0.0;
    for (Eigen::Index k = 0; k < support_vectors.cols(); ++k) {
      const double d = support_vectors(i, k) - x[static_cast<std::size_t>(k)];
      d2 += d * d;
    }
    f += alphas[static_cast<std::size_t>(i)] * std::exp(-gamma * d2);
  }
  return f;
}

KernelClassifier train_svm(const Eigen::MatrixXd& X, std::span<const int> y, double gamma,
                           const SvmOptions& opts) {
  const auto n = static_cast<std::size_t>(X.rows());
  if (y.size() != n) throw ShapeError("train_svm: label count differs from sample count");
  if (n == 0) throw TrainingError("train_svm: no samples");
  if (!(gamma > 0.0)) throw ConfigError("train_svm: gamma must be positive");
  KernelClassifier model;
  model.gamma = gamma;
  model.support_vectors.resize(0, X.cols());

  const bool has_pos = std::find(y.begin(), y.end(), 1) != y.end();
  const bool has_neg = std::find(y.begin(), y.end(), -1) != y.end();
  if (!has_pos || !has_neg) {
    // One class only: a constant decision of that class's sign.
    model.bias = has_pos ? 1.0 : -1.0;
    return model;
  }

  const Eigen::MatrixXd K = rbf_gram(X, gamma);
  const double C = opts.C;
  std::vector<double> alpha(n, 0.0), G(n, -1.0);
  auto yd = [&](std::size_t t) { return static_cast<double>(y[t]); };
  auto upper = [&](std::size_t t) { return alpha[t] >= C; };
  auto lower = [&](std::size_t t) { return alpha[t] <= 0.0; };

  int iter = 0;
  double gap = 0.0;
  for (; iter < opts.max_iter; ++iter) {
    double gmax = -std::numeric_limits<double>::infinity();
    std::size_t i = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] == 1) {
        if (!upper(t) && -G[t] >= gmax) { gmax = -G[t]; i = t; }
      } else {
        if (!lower(t) && G[t] >= gmax) { gmax = G[t]; i = t; }
      }
    }
    double gmax2 = -std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    std::size_t j = n;
    for (std::size_t t = 0; t < n && i < n; ++t) {
      const double quad = std::max(K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) +
                                       K(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(t)) -
                                       2.0 * K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)),
                                   kTau);
      double grad_diff = 0.0;
      if (y[t] == 1) {
        if (lower(t)) continue;
        gmax2 = std::max(gmax2, G[t]);
        grad_diff = gmax + G[t];
      } else {
        if (upper(t)) continue;
        gmax2 = std::max(gmax2, -G[t]);
        grad_diff = gmax - G[t];
      }
      if (grad_diff > 0.0) {
        const double obj = -(grad_diff * grad_diff) / quad;
        if (obj <= best) { best = obj; j = t; }
      }
    }
    gap = gmax + gmax2;
    if (i == n || j == n || gap < opts.tol) break;

    const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
    const double old_i = alpha[i], old_j = alpha[j];
    if (y[i] != y[j]) {
      const double quad = std::max(K(ii, ii) + K(jj, jj) - 2.0 * K(ii, jj), kTau);
      const double delta = (-G[i] - G[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) { alpha[j] = 0.0; alpha[i] = diff; }
      } else {
        if (alpha[i] < 0.0) { alpha[i] = 0.0; alpha[j] = -diff; }
      }
      if (diff > 0.0) {
        if (alpha[i] > C) { alpha[i] = C; alpha[j] = C - diff; }
      } else {
        if (alpha[j] > C) { alpha[j] = C; alpha[i] = C + diff; }
      }
    } else {
      const double quad = std::max(K(ii, ii) + K(jj, jj) - 2.0 * K(ii, jj), kTau);
      const double delta = (G[i] - G[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) { alpha[i] = C; alpha[j] = sum - C; }
      } else {
        if (alpha[j] < 0.0) { alpha[j] = 0.0; alpha[i] = sum; }
      }
      if (sum > C) {
        if (alpha[j] > C) { alpha[j] = C; alpha[i] = sum - C; }
      } else {
        if (alpha[i] < 0.0) { alpha[i] = 0.0; alpha[j] = sum; }
      }
    }
    const double di = alpha[i] - old_i, dj = alpha[j] - old_j;
    for (std::size_t t = 0; t < n; ++t) {
      const auto tt = static_cast<Eigen::Index>(t);
      G[t] += yd(t) * (yd(i) * K(ii, tt) * di + yd(j) * K(jj, tt) * dj);
    }
  }
  model.iterations = iter;
  model.kkt_gap = std::max(gap, 0.0);

  // Offset from free vectors, or the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity(), lb = -ub, free_sum = 0.0;
  int free_count = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = yd(t) * G[t];
    if (upper(t)) {
      if (y[t] == -1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (lower(t)) {
      if (y[t] == 1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++free_count;
      free_sum += yg;
    }
  }
  const double rho = free_count > 0 ? free_sum / free_count : 0.5 * (ub + lb);
  model.bias = -rho;

  std::vector<std::size_t> sv;
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] > 0.0) sv.push_back(t);
  }
  model.support_vectors.resize(static_cast<Eigen::Index>(sv.size()), X.cols());
  for (std::size_t s = 0; s < sv.size(); ++s) {
    model.support_vectors.row(static_cast<Eigen::Index>(s)) = X.row(static_cast<Eigen::Index>(sv[s]));
    model.alphas.push_back(alpha[sv[s]] * yd(sv[s]));
  }
  return model;
}

}  // namespace echoprint
