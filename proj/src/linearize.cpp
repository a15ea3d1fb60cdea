#include "mbtrack/linearize.hpp"

#include <stdexcept>

namespace mbt {

FeatureSet::FeatureSet(Eigen::Matrix2Xd c, int h) : centers(std::move(c)), half_size(h) {
  if (h < 0) throw std::invalid_argument("FeatureSet: negative patch half-size");
}

Eigen::Vector2d FeatureSet::offset(int j) const {
  const int side = patch_side();
  return {static_cast<double>(j % side - half_size), static_cast<double>(j / side - half_size)};
}

FeatureSet FeatureSet::select(const std::vector<int>& indices) const {
  Eigen::Matrix2Xd c(2, static_cast<Eigen::Index>(indices.size()));
  for (std::size_t k = 0; k < indices.size(); ++k) c.col(k) = centers.col(indices[k]);
  return {std::move(c), half_size};
}

LinearizedModel linearize(const GrayImage& I, const GradientField& grad_I, const GrayImage& T,
                          const FeatureSet& features, const Eigen::VectorXd& u0) {
  const int n = features.size();
  const int p = features.patch_pixels();
  if (u0.size() != 2 * n) throw std::invalid_argument("linearize: u0 must have length 2N");
  if (grad_I.gx.rows() != I.height() || grad_I.gx.cols() != I.width()) {
    throw std::invalid_argument("linearize: gradient field does not match image");
  }

  LinearizedModel m;
  m.grad_x = Eigen::MatrixXd::Zero(n, p);
  m.grad_y = Eigen::MatrixXd::Zero(n, p);
  m.tau = Eigen::MatrixXd::Zero(n, p);
  m.weight = Eigen::MatrixXd::Zero(n, p);
  m.u0 = u0;
  m.lost.assign(n, false);

  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d ui = u0.segment<2>(2 * i);
    int valid = 0;
    for (int j = 0; j < p; ++j) {
      const Eigen::Vector2d x = features.centers.col(i) + features.offset(j);
      const auto t = sample_bilinear(T, x.x(), x.y());
      const auto v = sample_bilinear(I, x.x() + ui.x(), x.y() + ui.y());
      if (t.clamped || v.clamped) continue;
      const double gx = sample_bilinear(grad_I.gx, x.x() + ui.x(), x.y() + ui.y()).value;
      const double gy = sample_bilinear(grad_I.gy, x.x() + ui.x(), x.y() + ui.y()).value;
      m.grad_x(i, j) = gx;
      m.grad_y(i, j) = gy;
      m.tau(i, j) = gx * ui.x() + gy * ui.y() + t.value - v.value;
      m.weight(i, j) = 1.0;
      ++valid;
    }
    m.lost[i] = valid == 0;
  }
  return m;
}

LinearizedModel linearize(const GrayImage& I, const GrayImage& T, const FeatureSet& features,
                          const Eigen::VectorXd& u0) {
  return linearize(I, gradient(I), T, features, u0);
}

Eigen::MatrixXd residual_map(const LinearizedModel& model, const Eigen::VectorXd& u) {
  if (u.size() != 2 * model.features()) throw std::invalid_argument("residual_map: bad u length");
  const auto pts = as_points(u);
  Eigen::MatrixXd A = model.grad_x.array().colwise() * pts.row(0).transpose().array() +
                      model.grad_y.array().colwise() * pts.row(1).transpose().array();
  A -= model.tau;
  return A;
}

LinearizedModel rescaled(const LinearizedModel& model, double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("rescaled: scale must be positive");
  LinearizedModel out = model;
  out.grad_x /= scale;
  out.grad_y /= scale;
  out.u0 *= scale;
  return out;
}

LinearizedModel select(const LinearizedModel& model, const std::vector<int>& indices) {
  const auto k = static_cast<Eigen::Index>(indices.size());
  const auto p = model.patch_pixels();
  LinearizedModel out;
  out.grad_x.resize(k, p);
  out.grad_y.resize(k, p);
  out.tau.resize(k, p);
  out.weight.resize(k, p);
  out.u0.resize(2 * k);
  for (Eigen::Index r = 0; r < k; ++r) {
    const int i = indices[r];
    out.grad_x.row(r) = model.grad_x.row(i);
    out.grad_y.row(r) = model.grad_y.row(i);
    out.tau.row(r) = model.tau.row(i);
    out.weight.row(r) = model.weight.row(i);
    out.u0.segment<2>(2 * r) = model.u0.segment<2>(2 * i);
    out.lost.push_back(model.lost[i]);
  }
  return out;
}

Eigen::SparseMatrix<double> BlockDiagonal2::to_sparse() const {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(blocks.size() * 4);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    for (int r = 0; r < 2; ++r) {
      for (int c = 0; c < 2; ++c) {
        t.emplace_back(static_cast<int>(2 * i) + r, static_cast<int>(2 * i) + c, blocks[i](r, c));
      }
    }
  }
  Eigen::SparseMatrix<double> H(size(), size());
  H.setFromTriplets(t.begin(), t.end());
  return H;
}

Eigen::VectorXd BlockDiagonal2::operator*(const Eigen::VectorXd& v) const {
  Eigen::VectorXd out(v.size());
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    out.segment<2>(2 * i) = blocks[i] * v.segment<2>(2 * i);
  }
  return out;
}

BlockDiagonal2 build_H(const LinearizedModel& model) {
  BlockDiagonal2 H;
  H.blocks.resize(model.features());
  for (int i = 0; i < model.features(); ++i) {
    const auto gx = model.grad_x.row(i);
    const auto gy = model.grad_y.row(i);
    const double xy = gx.dot(gy);
    H.blocks[i] << gx.squaredNorm(), xy, xy, gy.squaredNorm();
  }
  return H;
}

Eigen::VectorXd build_g(const LinearizedModel& model, const Eigen::MatrixXd& Y2,
                        const Eigen::MatrixXd& Z, double rho) {
  if (Y2.rows() != model.features() || Y2.cols() != model.patch_pixels() ||
      Z.rows() != Y2.rows() || Z.cols() != Y2.cols()) {
    throw std::invalid_argument("build_g: Y2 and Z must match the residual layout");
  }
  const Eigen::MatrixXd s = Y2 + rho * (model.tau + Z);
  Eigen::VectorXd g(2 * model.features());
  for (int i = 0; i < model.features(); ++i) {
    g(2 * i) = s.row(i).dot(model.grad_x.row(i));
    g(2 * i + 1) = s.row(i).dot(model.grad_y.row(i));
  }
  return g;
}

HessianAndGradient build_H_g(const LinearizedModel& model, const Eigen::MatrixXd& Y2,
                             const Eigen::MatrixXd& Z, double rho) {
  return {build_H(model), build_g(model, Y2, Z, rho)};
}

}  // namespace mbt
