#pragma once

#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "mbtrack/imaging.hpp"

namespace mbt {

/// Tracked points: template centers and the square patch around each.
///
/// Displacements for N features are stacked as a 2N vector (u_1x, u_1y, u_2x, ...), which is the
/// column-major storage of a 2xN matrix.
struct FeatureSet {
  Eigen::Matrix2Xd centers;
  int half_size = 3;

  FeatureSet() = default;
  FeatureSet(Eigen::Matrix2Xd c, int h);

  int size() const { return static_cast<int>(centers.cols()); }
  int patch_side() const { return 2 * half_size + 1; }
  int patch_pixels() const { return patch_side() * patch_side(); }

  /// Offset of patch pixel j, row-major over the patch (dy outer, dx inner).
  Eigen::Vector2d offset(int j) const;

  /// Sub-set with the listed features, same patch size.
  FeatureSet select(const std::vector<int>& indices) const;
};

inline Eigen::Map<Eigen::Matrix2Xd> as_points(Eigen::VectorXd& u) {
  return {u.data(), 2, u.size() / 2};
}
inline Eigen::Map<const Eigen::Matrix2Xd> as_points(const Eigen::VectorXd& u) {
  return {u.data(), 2, u.size() / 2};
}

/// First-order model of I(x_ij + u_i) around u0:
///   I(x_ij + u_i) - T(x_ij) ~ grad_ij u_i - tau_ij,
///   tau_ij = grad_ij u0_i + T(x_ij) - I(x_ij + u0_i).
/// All matrices are N x patch_pixels, patch-major.
struct LinearizedModel {
  Eigen::MatrixXd grad_x;
  Eigen::MatrixXd grad_y;
  Eigen::MatrixXd tau;
  Eigen::MatrixXd weight;  // 1 for valid pixels, 0 where the template or shifted pixel left the frame
  Eigen::VectorXd u0;
  std::vector<bool> lost;  // every pixel of the patch masked

  int features() const { return static_cast<int>(tau.rows()); }
  int patch_pixels() const { return static_cast<int>(tau.cols()); }
};

/// Linearizes around u0. `grad_I` must be gradient(I). Pixel gradients are bilinear samples of the
/// precomputed gradient field at x_ij + u0_i.
LinearizedModel linearize(const GrayImage& I, const GradientField& grad_I, const GrayImage& T,
                          const FeatureSet& features, const Eigen::VectorXd& u0);

LinearizedModel linearize(const GrayImage& I, const GrayImage& T, const FeatureSet& features,
                          const Eigen::VectorXd& u0);

/// A_ij = grad_ij u_i - tau_ij.
Eigen::MatrixXd residual_map(const LinearizedModel& model, const Eigen::VectorXd& u);

/// Same model expressed for a displacement variable v = scale * u: gradients divide by `scale`,
/// the expansion point multiplies by it, tau is unchanged.
LinearizedModel rescaled(const LinearizedModel& model, double scale);

/// Restriction of the model to the listed features.
LinearizedModel select(const LinearizedModel& model, const std::vector<int>& indices);

/// Per-feature 2x2 blocks H_i = sum_j grad_ij^T grad_ij.
struct BlockDiagonal2 {
  std::vector<Eigen::Matrix2d> blocks;

  int size() const { return 2 * static_cast<int>(blocks.size()); }
  Eigen::SparseMatrix<double> to_sparse() const;
  Eigen::VectorXd operator*(const Eigen::VectorXd& v) const;
};

BlockDiagonal2 build_H(const LinearizedModel& model);

/// g_i = sum_j (Y2_ij + rho (tau_ij + Z_ij)) grad_ij^T.
Eigen::VectorXd build_g(const LinearizedModel& model, const Eigen::MatrixXd& Y2,
                        const Eigen::MatrixXd& Z, double rho);

struct HessianAndGradient {
  BlockDiagonal2 H;
  Eigen::VectorXd g;
};

HessianAndGradient build_H_g(const LinearizedModel& model, const Eigen::MatrixXd& Y2,
                             const Eigen::MatrixXd& Z, double rho);

}  // namespace mbt
