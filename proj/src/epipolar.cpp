#include "mbtrack/epipolar.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/LU>
#include <Eigen/SVD>

namespace mbt {

Eigen::Matrix3d CoordinateNormalization::matrix() const {
  Eigen::Matrix3d T;
  T << scale, 0, -scale * center.x(), 0, scale, -scale * center.y(), 0, 0, 1;
  return T;
}

CoordinateNormalization CoordinateNormalization::compose(const CoordinateNormalization& first) const {
  // s2 (s1 (x - c1) - c2) = s1 s2 (x - (c1 + c2 / s1))
  return {first.center + center / first.scale, first.scale * scale};
}

CoordinateNormalization CoordinateNormalization::inverse() const {
  // x / s + c = (1/s) (x - (-s c))
  return {-scale * center, 1.0 / scale};
}

NormalizedFeatures normalize_coords(const FeatureSet& features) {
  if (features.size() == 0) throw std::invalid_argument("normalize_coords: empty feature set");
  const Eigen::Vector2d c = features.centers.rowwise().mean();
  const double rms = std::sqrt((features.centers.colwise() - c).colwise().squaredNorm().mean());
  if (!std::isfinite(rms)) throw std::invalid_argument("normalize_coords: non-finite coordinates");
  NormalizedFeatures out{{c, rms > 0.0 ? std::sqrt(2.0) / rms : 1.0}, features};
  out.features.centers = (features.centers.colwise() - c) * out.transform.scale;
  return out;
}

Eigen::MatrixXd EpipolarEmbedding::W(const Eigen::VectorXd& m) const {
  if (m.size() != b.size()) throw std::invalid_argument("EpipolarEmbedding::W: bad m length");
  return reshape_9xN(Eigen::VectorXd(b + m));
}

Eigen::MatrixXd EpipolarEmbedding::B() const { return reshape_9xN(b); }

EpipolarEmbedding build_P_b(const Eigen::Matrix2Xd& points) {
  const auto n = points.cols();
  if (n < 1) throw std::invalid_argument("build_P_b: need at least one point");
  EpipolarEmbedding e;
  e.points.resize(3, n);
  e.b.resize(9 * n);
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(6 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector3d x = homogeneous<double>(points.col(i));
    e.points.col(i) = x;
    e.b.segment<9>(9 * i) = embed_point<double>(x, x);
    // x (x) I3 has column c equal to (x0 e_c, x1 e_c, x2 e_c); keep c = 0, 1.
    for (int c = 0; c < 2; ++c) {
      for (int k = 0; k < 3; ++k) {
        t.emplace_back(static_cast<int>(9 * i + 3 * k + c), static_cast<int>(2 * i + c), x(k));
      }
    }
  }
  e.P.resize(9 * n, 2 * n);
  e.P.setFromTriplets(t.begin(), t.end());
  e.P.makeCompressed();
  return e;
}

EpipolarEmbedding build_P_b(const FeatureSet& features) { return build_P_b(features.centers); }

Eigen::MatrixXd embedding_matrix(const Eigen::Matrix2Xd& template_points,
                                 const Eigen::Matrix2Xd& current_points) {
  if (template_points.cols() != current_points.cols()) {
    throw std::invalid_argument("embedding_matrix: point count mismatch");
  }
  Eigen::MatrixXd W(9, template_points.cols());
  for (Eigen::Index i = 0; i < W.cols(); ++i) {
    W.col(i) = embed_point<double>(homogeneous<double>(template_points.col(i)),
                                   homogeneous<double>(current_points.col(i)));
  }
  return W;
}

Eigen::VectorXd singular_values(const Eigen::MatrixXd& W) {
  return Eigen::JacobiSVD<Eigen::MatrixXd>(W).singularValues();
}

int subspace_rank(const Eigen::MatrixXd& W, double rel_tol) {
  if (W.size() == 0) return 0;
  const Eigen::VectorXd s = singular_values(W);
  if (s(0) == 0.0) return 0;
  return static_cast<int>((s.array() > rel_tol * s(0)).count());
}

FundamentalMatrix FundamentalMatrix::from_motion(const Eigen::Matrix3d& K, const Eigen::Matrix3d& R,
                                                 const Eigen::Vector3d& t) {
  if (t.norm() == 0.0) throw std::invalid_argument("FundamentalMatrix: zero baseline");
  const Eigen::Matrix3d Kinv = K.inverse();
  FundamentalMatrix out;
  out.F = Kinv.transpose() * skew<double>(t) * R * Kinv;
  out.F /= out.F.norm();
  return out;
}

}  // namespace mbt
