#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace mbt {

/// S = |C| + |C^T| with a zero diagonal.
Eigen::MatrixXd affinity_from_C(const Eigen::MatrixXd& C);

struct ClusteringOptions {
  int restarts = 20;
  int max_iterations = 300;
  std::uint64_t seed = 0;
};

/// Normalized-cut spectral clustering: bottom-K eigenvectors of I - D^{-1/2} S D^{-1/2},
/// row-normalized, then k-means (k-means++ seeding, best inertia over restarts).
/// An all-zero affinity yields the deterministic labeling i mod K and a warning on stderr.
std::vector<int> spectral_cluster(const Eigen::MatrixXd& S, int K, const ClusteringOptions& options = {});

/// Plain Lloyd k-means over the rows of X, best of `restarts` k-means++ seedings.
std::vector<int> kmeans(const Eigen::MatrixXd& X, int K, const ClusteringOptions& options,
                        double* inertia = nullptr);

/// Fraction of misclassified points under the best matching of predicted to true labels.
/// Exhaustive over permutations when both label sets have at most 6 ids, Hungarian otherwise.
double segmentation_error(const std::vector<int>& labels, const std::vector<int>& truth);

/// Minimum-cost perfect assignment for a square cost matrix; result[row] = column.
std::vector<int> hungarian(const Eigen::MatrixXd& cost);

/// Two-step baseline: self-expression of a fixed embedding matrix,
///   C = argmin 1/2 ||C||_F^2 + weight/2 ||W - W C||_F^2 = (I + weight W^T W)^{-1} weight W^T W.
Eigen::MatrixXd fixed_w_self_expression(const Eigen::MatrixXd& W, double weight);

}  // namespace mbt
