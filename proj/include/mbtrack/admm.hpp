#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCholesky>

#include "mbtrack/epipolar.hpp"
#include "mbtrack/linearize.hpp"

namespace mbt {

/// Element-wise shrinkage sign(x) max(|x| - alpha, 0).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Derived::RowsAtCompileTime, Derived::ColsAtCompileTime>
soft_threshold(const Eigen::MatrixBase<Derived>& x, typename Derived::Scalar alpha) {
  using Scalar = typename Derived::Scalar;
  return (x.array().sign() * (x.array().abs() - alpha).max(Scalar(0))).matrix();
}

struct AdmmParams {
  double gamma = 1.8e4;   // data term weight
  double lambda = 1.0e4;  // sparse outlier weight
  double rho0 = 0.1;
  double rho_max = 1e10;
  double eta = 1.1;
  double tolerance = 1e-6;
  int max_iterations = 300;
  /// When false the self-expressiveness constraint and its variables (E, C, m) are removed,
  /// leaving the L1 data term alone.
  bool regularizer = true;

  void validate() const;
};

/// Primal and dual variables of one solve.
///   Z: N x p, E: 9 x N, C: N x N, u: 2N, m: 9N, Y1: 9 x N, Y2: N x p, y: 9N.
struct AdmmState {
  Eigen::MatrixXd Z, E, C;
  Eigen::VectorXd u, m;
  Eigen::MatrixXd Y1, Y2;
  Eigen::VectorXd y;
  double rho = 0.0;

  /// Algorithm start: C, E, multipliers zero; u = u0; m = P u0; Z = A(u0).
  static AdmmState initial(const LinearizedModel& model, const EpipolarEmbedding& embedding,
                           const Eigen::VectorXd& u0, double rho0);
};

struct ConstraintResiduals {
  double m = 0.0;  // ||m - P u||_inf
  double w = 0.0;  // ||W - W C - E||_inf
  double z = 0.0;  // ||Z - A(u)||_inf

  double max() const { return std::max(m, std::max(w, z)); }
};

struct AdmmIterate {
  int iteration = 0;
  ConstraintResiduals residuals;
  double objective = 0.0;  // problem objective plus rho/2 times squared violations
  double rho = 0.0;
};

struct AdmmResult {
  AdmmState state;
  std::vector<AdmmIterate> history;
  std::vector<bool> degenerate;  // features whose u block had no information
  bool converged = false;
  int iterations = 0;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Z = T_{gamma/rho}[A(u) - Y2/rho].
Eigen::MatrixXd update_Z(const AdmmState& s, const LinearizedModel& model, const AdmmParams& params);

/// E = T_{lambda/rho}[W - W C + Y1/rho].
Eigen::MatrixXd update_E(const AdmmState& s, const EpipolarEmbedding& embedding,
                         const AdmmParams& params);

/// Solves (I + rho W^T W) C = rho W^T (W - E + Y1/rho) by Cholesky.
Eigen::MatrixXd update_C(const AdmmState& s, const EpipolarEmbedding& embedding);

/// The C-update in factored form C = U V^T with U = W^T (N x 9), using
///   (I + rho W^T W)^{-1} W^T = W^T (I + rho W W^T)^{-1},
/// so only a 9 x 9 system is factored. With N <= 9 the dense solve is used and U = I.
struct LowRankCoefficients {
  Eigen::MatrixXd U;
  Eigen::MatrixXd V;

  Eigen::MatrixXd dense() const { return U * V.transpose(); }
};

LowRankCoefficients update_C_lowrank(const AdmmState& s, const EpipolarEmbedding& embedding);

/// Factorization of P^T P + H (or H alone without the regularizer). The factor is independent of
/// rho, so one instance serves a whole solve.
class DisplacementSolver {
 public:
  DisplacementSolver(const LinearizedModel& model, const EpipolarEmbedding& embedding,
                     bool regularizer);

  /// Solves (rho P^T P + rho H) u = rhs. Degenerate features keep `fallback`.
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs, double rho, const Eigen::VectorXd& fallback) const;

  const std::vector<bool>& degenerate() const { return degenerate_; }
  const BlockDiagonal2& H() const { return H_; }

 private:
  BlockDiagonal2 H_;
  std::vector<bool> degenerate_;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt_;
};

/// u = (rho P^T P + rho H)^{-1} (g + P^T y + rho P^T m).
Eigen::VectorXd update_u(const AdmmState& s, const LinearizedModel& model,
                         const EpipolarEmbedding& embedding, const AdmmParams& params);
Eigen::VectorXd update_u(const AdmmState& s, const LinearizedModel& model,
                         const EpipolarEmbedding& embedding, const AdmmParams& params,
                         const DisplacementSolver& solver);

/// Stationary point of the augmented Lagrangian in m:
///   M (Q + I) = -(G + B Q + T),  Q = (I - C)(I - C)^T,  T = (Y1/rho - E)(I - C^T),
/// with M, B, G the 9 x N forms of m, b and y/rho - P u.
Eigen::VectorXd update_m(const AdmmState& s, const EpipolarEmbedding& embedding);

/// Same update when s.C = C.dense(): Q + I = 2I + X K X^T with X = [U V] is inverted by Woodbury.
Eigen::VectorXd update_m(const AdmmState& s, const EpipolarEmbedding& embedding, const LowRankCoefficients& C);

/// Dual ascent on Y1, Y2, y followed by rho = min(eta rho, rho_max).
AdmmState update_multipliers(const AdmmState& s, const LinearizedModel& model,
                             const EpipolarEmbedding& embedding, const AdmmParams& params);

ConstraintResiduals constraint_residuals(const AdmmState& s, const LinearizedModel& model,
                                         const EpipolarEmbedding& embedding, bool regularizer = true);

/// gamma ||Z||_1 + 1/2 ||C||_F^2 + lambda ||E||_1 + rho/2 (sum of squared constraint violations).
double merit(const AdmmState& s, const LinearizedModel& model, const EpipolarEmbedding& embedding,
             const AdmmParams& params);

/// One sweep: Z, E, C, u, m, then the multipliers.
void admm_sweep(AdmmState& s, const LinearizedModel& model, const EpipolarEmbedding& embedding,
                const AdmmParams& params, const DisplacementSolver& solver);

AdmmResult run_admm(const LinearizedModel& model, const EpipolarEmbedding& embedding,
                    const AdmmParams& params, const Eigen::VectorXd& u0);

/// Continues from an explicit state instead of the standard initialization.
AdmmResult run_admm(const LinearizedModel& model, const EpipolarEmbedding& embedding,
                    const AdmmParams& params, AdmmState start);

}  // namespace mbt
