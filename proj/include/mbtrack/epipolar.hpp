#pragma once

#include <stdexcept>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "mbtrack/linearize.hpp"

namespace mbt {

/// Lifted correspondence w = vec(x' x^T), column-major, i.e. the Kronecker product x (x) x':
///   (x x', x y', x, y x', y y', y, x', y', 1).
/// `x` is the template point and `xp` its position in the current frame, both homogeneous.
template <typename Scalar>
Eigen::Matrix<Scalar, 9, 1> embed_point(const Eigen::Matrix<Scalar, 3, 1>& x,
                                        const Eigen::Matrix<Scalar, 3, 1>& xp) {
  Eigen::Matrix<Scalar, 9, 1> w;
  for (int k = 0; k < 3; ++k) w.template segment<3>(3 * k) = x(k) * xp;
  return w;
}

template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> homogeneous(const Eigen::Matrix<Scalar, 2, 1>& p) {
  return {p.x(), p.y(), Scalar(1)};
}

/// Column-major reshape of a 9N vector into its 9 x N matrix form.
template <typename Derived>
auto reshape_9xN(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  if (v.cols() != 1 || v.size() % 9 != 0) {
    throw std::invalid_argument("reshape_9xN: length must be a multiple of 9");
  }
  Eigen::Matrix<Scalar, 9, Eigen::Dynamic> M(9, v.size() / 9);
  Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(M.data(), M.size()) = v;
  return M;
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> vec(const Eigen::MatrixBase<Derived>& M) {
  Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> tmp = M;
  return Eigen::Map<Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>>(tmp.data(), tmp.size());
}

/// Isotropic similarity x -> scale (x - center) with mean 0 and RMS distance sqrt(2).
struct CoordinateNormalization {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double scale = 1.0;

  Eigen::Vector2d apply(const Eigen::Vector2d& x) const { return scale * (x - center); }
  Eigen::Vector2d invert(const Eigen::Vector2d& x) const { return x / scale + center; }
  Eigen::Matrix3d matrix() const;

  /// this applied after `first`.
  CoordinateNormalization compose(const CoordinateNormalization& first) const;
  CoordinateNormalization inverse() const;
};

struct NormalizedFeatures {
  CoordinateNormalization transform;
  FeatureSet features;
};

/// Coincident points (a single feature included) only translate: scale = 1. Throws on an empty set.
NormalizedFeatures normalize_coords(const FeatureSet& features);

/// Epipolar lifting of a feature set:
///   vec(W(u)) = b + P u,  b_i = vec(x_i x_i^T),
///   P = blockdiag(x_i (x) I3) with every third column dropped.
struct EpipolarEmbedding {
  Eigen::VectorXd b;
  Eigen::SparseMatrix<double> P;
  Eigen::Matrix3Xd points;  // homogeneous template points

  int size() const { return static_cast<int>(points.cols()); }

  /// W as a 9 x N matrix for the auxiliary variable m (vec(W) = b + m).
  Eigen::MatrixXd W(const Eigen::VectorXd& m) const;
  /// Matrix form B of b.
  Eigen::MatrixXd B() const;
};

/// Builds b and P from the feature centers as given (callers normalize first).
EpipolarEmbedding build_P_b(const FeatureSet& features);
EpipolarEmbedding build_P_b(const Eigen::Matrix2Xd& points);

/// Column-by-column lifting of tracked points: column i = embed_point(x_i, x_i + u_i).
Eigen::MatrixXd embedding_matrix(const Eigen::Matrix2Xd& template_points,
                                 const Eigen::Matrix2Xd& current_points);

/// Number of singular values above rel_tol times the largest.
int subspace_rank(const Eigen::MatrixXd& W, double rel_tol = 1e-8);

Eigen::VectorXd singular_values(const Eigen::MatrixXd& W);

/// Fundamental matrix for camera intrinsics K and relative motion X' = R X + t, scaled to unit
/// Frobenius norm. x'^T F x = 0 for every correspondence.
struct FundamentalMatrix {
  Eigen::Matrix3d F = Eigen::Matrix3d::Zero();

  /// Column-major vectorization, so that f^T embed_point(x, x') = x'^T F x.
  Eigen::Matrix<double, 9, 1> f() const {
    return Eigen::Map<const Eigen::Matrix<double, 9, 1>>(F.data());
  }
  double residual(const Eigen::Vector3d& x, const Eigen::Vector3d& xp) const { return xp.dot(F * x); }

  static FundamentalMatrix from_motion(const Eigen::Matrix3d& K, const Eigen::Matrix3d& R,
                                       const Eigen::Vector3d& t);
};

template <typename Scalar>
Eigen::Matrix<Scalar, 3, 3> skew(const Eigen::Matrix<Scalar, 3, 1>& v) {
  Eigen::Matrix<Scalar, 3, 3> S;
  S << Scalar(0), -v.z(), v.y(), v.z(), Scalar(0), -v.x(), -v.y(), v.x(), Scalar(0);
  return S;
}

}  // namespace mbt
