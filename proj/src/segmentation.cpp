#include "mbtrack/segmentation.hpp"

#include <algorithm>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace mbt {

Eigen::MatrixXd affinity_from_C(const Eigen::MatrixXd& C) {
  if (C.rows() != C.cols()) throw std::invalid_argument("affinity_from_C: C must be square");
  const auto n = C.rows();
  Eigen::MatrixXd S(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    S(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      S(i, j) = std::abs(C(i, j)) + std::abs(C(j, i));
      S(j, i) = S(i, j);
    }
  }
  return S;
}

namespace {

double sq_dist(const Eigen::MatrixXd& X, Eigen::Index row, const Eigen::MatrixXd& centers, Eigen::Index c) {
  return (X.row(row) - centers.row(c)).squaredNorm();
}

std::vector<int> lloyd(const Eigen::MatrixXd& X, int K, std::mt19937_64& rng, int max_iterations,
                       double& inertia) {
  const auto n = X.rows();
  Eigen::MatrixXd centers(K, X.cols());

  // k-means++ seeding
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  centers.row(0) = X.row(first(rng));
  Eigen::VectorXd d2(n);
  for (Eigen::Index i = 0; i < n; ++i) d2(i) = sq_dist(X, i, centers, 0);
  for (int c = 1; c < K; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double r = u(rng);
      for (pick = 0; pick < n - 1; ++pick) {
        r -= d2(pick);
        if (r <= 0.0) break;
      }
    } else {
      pick = first(rng);
    }
    centers.row(c) = X.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) d2(i) = std::min(d2(i), sq_dist(X, i, centers, c));
  }

  std::vector<int> labels(n, -1);
  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = sq_dist(X, i, centers, 0);
      for (int c = 1; c < K; ++c) {
        const double d = sq_dist(X, i, centers, c);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (labels[i] != best) {
        labels[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(K, X.cols());
    std::vector<int> counts(K, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(labels[i]) += X.row(i);
      ++counts[labels[i]];
    }
    for (int c = 0; c < K; ++c) {
      if (counts[c] > 0) centers.row(c) = sums.row(c) / counts[c];
    }
  }
  inertia = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) inertia += sq_dist(X, i, centers, labels[i]);
  return labels;
}

// Relabels clusters in order of first appearance so equal partitions compare equal.
std::vector<int> canonical(const std::vector<int>& labels) {
  std::map<int, int> ids;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto it = ids.try_emplace(labels[i], static_cast<int>(ids.size())).first;
    out[i] = it->second;
  }
  return out;
}

}  // namespace

std::vector<int> kmeans(const Eigen::MatrixXd& X, int K, const ClusteringOptions& options, double* inertia) {
  if (K < 1 || X.rows() < K) throw std::invalid_argument("kmeans: need 1 <= K <= number of points");
  std::mt19937_64 rng(options.seed);
  std::vector<int> best;
  double best_inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, options.restarts); ++r) {
    double value = 0.0;
    auto labels = lloyd(X, K, rng, options.max_iterations, value);
    if (value < best_inertia) {
      best_inertia = value;
      best = std::move(labels);
    }
  }
  if (inertia) *inertia = best_inertia;
  return canonical(best);
}

std::vector<int> spectral_cluster(const Eigen::MatrixXd& S, int K, const ClusteringOptions& options) {
  const auto n = S.rows();
  if (S.cols() != n) throw std::invalid_argument("spectral_cluster: affinity must be square");
  if (K < 1 || n < K) throw std::invalid_argument("spectral_cluster: need 1 <= K <= N");
  if (K == 1) return std::vector<int>(n, 0);

  const Eigen::VectorXd degree = S.rowwise().sum();
  if (degree.maxCoeff() <= 0.0) {
    std::cerr << "warning: spectral_cluster: affinity is all zero, labels are arbitrary\n";
    std::vector<int> labels(n);
    for (Eigen::Index i = 0; i < n; ++i) labels[i] = static_cast<int>(i % K);
    return labels;
  }
  Eigen::VectorXd inv_sqrt(n);
  for (Eigen::Index i = 0; i < n; ++i) inv_sqrt(i) = degree(i) > 0.0 ? 1.0 / std::sqrt(degree(i)) : 0.0;
  Eigen::MatrixXd L = -(inv_sqrt.asDiagonal() * S * inv_sqrt.asDiagonal());
  L.diagonal().array() += 1.0;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(L);
  if (eig.info() != Eigen::Success) throw std::runtime_error("spectral_cluster: eigendecomposition failed");
  Eigen::MatrixXd V = eig.eigenvectors().leftCols(K);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double norm = V.row(i).norm();
    if (norm > 0.0) V.row(i) /= norm;
  }
  return kmeans(V, K, options);
}

std::vector<int> hungarian(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw std::invalid_argument("hungarian: cost must be square");
  // Potentials formulation, 1-based with a virtual column 0.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> assignment(n, -1);
  for (int j = 1; j <= n; ++j) {
    if (match[j] > 0) assignment[match[j] - 1] = j - 1;
  }
  return assignment;
}

double segmentation_error(const std::vector<int>& labels, const std::vector<int>& truth) {
  if (labels.size() != truth.size()) throw std::invalid_argument("segmentation_error: label count mismatch");
  if (labels.empty()) return 0.0;
  const auto pred = canonical(labels);
  const auto gt = canonical(truth);
  const int kp = *std::max_element(pred.begin(), pred.end()) + 1;
  const int kt = *std::max_element(gt.begin(), gt.end()) + 1;
  const int k = std::max(kp, kt);
  Eigen::MatrixXi overlap = Eigen::MatrixXi::Zero(k, k);
  for (std::size_t i = 0; i < pred.size(); ++i) ++overlap(pred[i], gt[i]);

  int best = 0;
  if (k <= 6) {
    std::vector<int> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    do {
      int hits = 0;
      for (int c = 0; c < k; ++c) hits += overlap(c, perm[c]);
      best = std::max(best, hits);
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    const Eigen::MatrixXd cost = -overlap.cast<double>();
    const auto assignment = hungarian(cost);
    for (int c = 0; c < k; ++c) best += overlap(c, assignment[c]);
  }
  return 1.0 - static_cast<double>(best) / static_cast<double>(pred.size());
}

Eigen::MatrixXd fixed_w_self_expression(const Eigen::MatrixXd& W, double weight) {
  if (!(weight > 0.0)) throw std::invalid_argument("fixed_w_self_expression: weight must be positive");
  const auto n = W.cols();
  const Eigen::MatrixXd G = W.transpose() * W;
  Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(n, n) + weight * G;
  return lhs.llt().solve(weight * G);
}

}  // namespace mbt
