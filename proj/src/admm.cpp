#include "mbtrack/admm.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/LU>

namespace mbt {

void AdmmParams::validate() const {
  if (!(gamma > 0.0) || !(lambda > 0.0)) throw std::invalid_argument("AdmmParams: gamma and lambda must be positive");
  if (!(eta > 1.0)) throw std::invalid_argument("AdmmParams: eta must exceed 1");
  if (!(rho0 > 0.0) || !(rho0 <= rho_max)) throw std::invalid_argument("AdmmParams: need 0 < rho0 <= rho_max");
  if (!(tolerance > 0.0)) throw std::invalid_argument("AdmmParams: tolerance must be positive");
  if (max_iterations < 1) throw std::invalid_argument("AdmmParams: max_iterations must be >= 1");
}

AdmmState AdmmState::initial(const LinearizedModel& model, const EpipolarEmbedding& embedding,
                             const Eigen::VectorXd& u0, double rho0) {
  const int n = model.features();
  if (embedding.size() != n) throw std::invalid_argument("AdmmState: model and embedding sizes differ");
  if (u0.size() != 2 * n) throw std::invalid_argument("AdmmState: u0 must have length 2N");
  AdmmState s;
  s.u = u0;
  s.m = embedding.P * u0;
  s.Z = residual_map(model, u0);
  s.E = Eigen::MatrixXd::Zero(9, n);
  s.C = Eigen::MatrixXd::Zero(n, n);
  s.Y1 = Eigen::MatrixXd::Zero(9, n);
  s.Y2 = Eigen::MatrixXd::Zero(n, model.patch_pixels());
  s.y = Eigen::VectorXd::Zero(9 * n);
  s.rho = rho0;
  return s;
}

Eigen::MatrixXd update_Z(const AdmmState& s, const LinearizedModel& model, const AdmmParams& params) {
  return soft_threshold(residual_map(model, s.u) - s.Y2 / s.rho, params.gamma / s.rho);
}

Eigen::MatrixXd update_E(const AdmmState& s, const EpipolarEmbedding& embedding,
                         const AdmmParams& params) {
  const Eigen::MatrixXd W = embedding.W(s.m);
  return soft_threshold(W - W * s.C + s.Y1 / s.rho, params.lambda / s.rho);
}

Eigen::MatrixXd update_C(const AdmmState& s, const EpipolarEmbedding& embedding) {
  const Eigen::MatrixXd W = embedding.W(s.m);
  const auto n = W.cols();
  Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(n, n);
  lhs.selfadjointView<Eigen::Lower>().rankUpdate(W.transpose(), s.rho);
  const Eigen::MatrixXd rhs = W.transpose() * (s.rho * (W - s.E) + s.Y1);
  return lhs.selfadjointView<Eigen::Lower>().llt().solve(rhs);
}

LowRankCoefficients update_C_lowrank(const AdmmState& s, const EpipolarEmbedding& embedding) {
  const Eigen::MatrixXd W = embedding.W(s.m);
  LowRankCoefficients C;
  if (W.cols() <= W.rows()) {
    // Fewer features than rows of W: the N x N system is the smaller and better conditioned one.
    C.U = Eigen::MatrixXd::Identity(W.cols(), W.cols());
    C.V = update_C(s, embedding).transpose();
    return C;
  }
  Eigen::MatrixXd G = Eigen::MatrixXd::Identity(W.rows(), W.rows());
  G.selfadjointView<Eigen::Lower>().rankUpdate(W, s.rho);
  const Eigen::MatrixXd R = s.rho * (W - s.E) + s.Y1;
  C.U = W.transpose();
  C.V = G.selfadjointView<Eigen::Lower>().llt().solve(R).transpose();
  return C;
}

DisplacementSolver::DisplacementSolver(const LinearizedModel& model,
                                       const EpipolarEmbedding& embedding, bool regularizer)
    : H_(build_H(model)), degenerate_(model.features(), false) {
  const int n = model.features();
  Eigen::SparseMatrix<double> K = H_.to_sparse();
  if (regularizer) {
    if (embedding.size() != n) throw std::invalid_argument("DisplacementSolver: size mismatch");
    K += Eigen::SparseMatrix<double>(embedding.P.transpose() * embedding.P);
  } else {
    // Without the lifting term an all-zero block carries no information about u_i.
    double max_trace = 0.0;
    for (const auto& b : H_.blocks) max_trace = std::max(max_trace, b.trace());
    std::vector<Eigen::Triplet<double>> pin;
    for (int i = 0; i < n; ++i) {
      if (H_.blocks[i].trace() <= 1e-14 * max_trace || max_trace == 0.0) {
        degenerate_[i] = true;
        pin.emplace_back(2 * i, 2 * i, 1.0);
        pin.emplace_back(2 * i + 1, 2 * i + 1, 1.0);
      }
    }
    Eigen::SparseMatrix<double> I(2 * n, 2 * n);
    I.setFromTriplets(pin.begin(), pin.end());
    K += I;
  }
  const double shift = 1e-12 * K.diagonal().sum() / std::max(1, 2 * n);
  Eigen::SparseMatrix<double> I(2 * n, 2 * n);
  I.setIdentity();
  K += shift * I;
  llt_.compute(K);
  if (llt_.info() != Eigen::Success) throw NumericalError("u-update system is not positive definite");
}

Eigen::VectorXd DisplacementSolver::solve(const Eigen::VectorXd& rhs, double rho,
                                          const Eigen::VectorXd& fallback) const {
  Eigen::VectorXd u = llt_.solve(rhs / rho);
  for (std::size_t i = 0; i < degenerate_.size(); ++i) {
    if (degenerate_[i]) u.segment<2>(2 * i) = fallback.segment<2>(2 * i);
  }
  return u;
}

Eigen::VectorXd update_u(const AdmmState& s, const LinearizedModel& model,
                         const EpipolarEmbedding& embedding, const AdmmParams& params,
                         const DisplacementSolver& solver) {
  Eigen::VectorXd rhs = build_g(model, s.Y2, s.Z, s.rho);
  if (params.regularizer) rhs += embedding.P.transpose() * (s.y + s.rho * s.m);
  return solver.solve(rhs, s.rho, s.u);
}

Eigen::VectorXd update_u(const AdmmState& s, const LinearizedModel& model,
                         const EpipolarEmbedding& embedding, const AdmmParams& params) {
  return update_u(s, model, embedding, params, DisplacementSolver(model, embedding, params.regularizer));
}

namespace {

Eigen::VectorXd update_m_dense(const AdmmState& s, const EpipolarEmbedding& embedding, const Eigen::MatrixXd& C) {
  const auto n = C.rows();
  const Eigen::MatrixXd D = Eigen::MatrixXd::Identity(n, n) - C;
  const Eigen::MatrixXd G = reshape_9xN(Eigen::VectorXd(s.y / s.rho - embedding.P * s.u));
  // B Q + T = (B D + Y1/rho - E) D^T
  const Eigen::MatrixXd R = embedding.B() * D + s.Y1 / s.rho - s.E;
  const Eigen::MatrixXd rhs = -(G + R * D.transpose());
  Eigen::MatrixXd QI = Eigen::MatrixXd::Identity(n, n);
  QI.selfadjointView<Eigen::Lower>().rankUpdate(D);
  // M (Q + I) = rhs  <=>  (Q + I) M^T = rhs^T
  const Eigen::MatrixXd Mt = QI.selfadjointView<Eigen::Lower>().llt().solve(rhs.transpose());
  return vec(Mt.transpose());
}

}  // namespace

Eigen::VectorXd update_m(const AdmmState& s, const EpipolarEmbedding& embedding) {
  return update_m_dense(s, embedding, s.C);
}

Eigen::VectorXd update_m(const AdmmState& s, const EpipolarEmbedding& embedding, const LowRankCoefficients& C) {
  const auto n = C.U.rows();
  const auto r = C.U.cols();
  // Woodbury only pays off, and only stays well conditioned, when X = [U V] is tall.
  if (n <= 2 * r) return update_m_dense(s, embedding, C.dense());
  const Eigen::MatrixXd G = reshape_9xN(Eigen::VectorXd(s.y / s.rho - embedding.P * s.u));
  // R D^T with D = I - U V^T, without forming N x N products.
  const Eigen::MatrixXd B = embedding.B();
  const Eigen::MatrixXd BD = B - (B * C.U) * C.V.transpose();
  const Eigen::MatrixXd R = BD + s.Y1 / s.rho - s.E;
  const Eigen::MatrixXd rhs = -(G + R - (R * C.V) * C.U.transpose());

  // D D^T + I = 2I + X K X^T,  X = [U V],  K = [V^T V, -I; -I, 0],  K^{-1} = [0, -I; -I, -V^T V].
  Eigen::MatrixXd X(n, 2 * r);
  X << C.U, C.V;
  Eigen::MatrixXd S = 0.5 * X.transpose() * X;
  S.block(0, r, r, r) -= Eigen::MatrixXd::Identity(r, r);
  S.block(r, 0, r, r) -= Eigen::MatrixXd::Identity(r, r);
  S.block(r, r, r, r) -= C.V.transpose() * C.V;
  const Eigen::MatrixXd RX = rhs * X;
  const Eigen::MatrixXd M = 0.5 * rhs - 0.25 * S.fullPivLu().solve(RX.transpose()).transpose() * X.transpose();
  return vec(M);
}

AdmmState update_multipliers(const AdmmState& s, const LinearizedModel& model,
                             const EpipolarEmbedding& embedding, const AdmmParams& params) {
  AdmmState out = s;
  out.Y2 += s.rho * (s.Z - residual_map(model, s.u));
  if (params.regularizer) {
    const Eigen::MatrixXd W = embedding.W(s.m);
    out.Y1 += s.rho * (W - W * s.C - s.E);
    out.y += s.rho * (s.m - embedding.P * s.u);
  }
  out.rho = std::min(params.eta * s.rho, params.rho_max);
  return out;
}

ConstraintResiduals constraint_residuals(const AdmmState& s, const LinearizedModel& model,
                                         const EpipolarEmbedding& embedding, bool regularizer) {
  ConstraintResiduals r;
  r.z = (s.Z - residual_map(model, s.u)).lpNorm<Eigen::Infinity>();
  if (regularizer) {
    const Eigen::MatrixXd W = embedding.W(s.m);
    r.w = (W - W * s.C - s.E).lpNorm<Eigen::Infinity>();
    r.m = (s.m - embedding.P * s.u).lpNorm<Eigen::Infinity>();
  }
  return r;
}

double merit(const AdmmState& s, const LinearizedModel& model, const EpipolarEmbedding& embedding,
             const AdmmParams& params) {
  double value = params.gamma * s.Z.lpNorm<1>() + 0.5 * (s.Z - residual_map(model, s.u)).squaredNorm() * s.rho;
  if (params.regularizer) {
    const Eigen::MatrixXd W = embedding.W(s.m);
    value += 0.5 * s.C.squaredNorm() + params.lambda * s.E.lpNorm<1>();
    value += 0.5 * s.rho * ((W - W * s.C - s.E).squaredNorm() + (s.m - embedding.P * s.u).squaredNorm());
  }
  return value;
}

void admm_sweep(AdmmState& s, const LinearizedModel& model, const EpipolarEmbedding& embedding,
                const AdmmParams& params, const DisplacementSolver& solver) {
  s.Z = update_Z(s, model, params);
  LowRankCoefficients factors;
  if (params.regularizer) {
    s.E = update_E(s, embedding, params);
    factors = update_C_lowrank(s, embedding);
    s.C = factors.dense();
  }
  s.u = update_u(s, model, embedding, params, solver);
  if (params.regularizer) s.m = update_m(s, embedding, factors);
  s = update_multipliers(s, model, embedding, params);
}

namespace {

// admm_sweep with C held as U V^T, so every product with C is O(N) per row of W. Also fills the
// residuals and merit of the swept state at the pre-update rho, reusing the multiplier residuals.
void factored_sweep(AdmmState& s, LowRankCoefficients& factors, bool& have_factors, const LinearizedModel& model,
                    const EpipolarEmbedding& embedding, const AdmmParams& params, const DisplacementSolver& solver,
                    AdmmIterate& it) {
  const double rho = s.rho;
  s.Z = update_Z(s, model, params);
  if (params.regularizer) {
    const Eigen::MatrixXd W = embedding.W(s.m);
    const Eigen::MatrixXd WC = have_factors ? Eigen::MatrixXd((W * factors.U) * factors.V.transpose())
                                            : Eigen::MatrixXd(W * s.C);
    s.E = soft_threshold(W - WC + s.Y1 / rho, params.lambda / rho);
    factors = update_C_lowrank(s, embedding);
    have_factors = true;
  }
  s.u = update_u(s, model, embedding, params, solver);
  if (params.regularizer) s.m = update_m(s, embedding, factors);

  const Eigen::MatrixXd R2 = s.Z - residual_map(model, s.u);
  s.Y2 += rho * R2;
  it.residuals = {};
  it.residuals.z = R2.lpNorm<Eigen::Infinity>();
  it.objective = params.gamma * s.Z.lpNorm<1>() + 0.5 * rho * R2.squaredNorm();
  if (params.regularizer) {
    const Eigen::MatrixXd W = embedding.W(s.m);
    const Eigen::MatrixXd R1 = W - (W * factors.U) * factors.V.transpose() - s.E;
    const Eigen::VectorXd r3 = s.m - embedding.P * s.u;
    s.Y1 += rho * R1;
    s.y += rho * r3;
    it.residuals.w = R1.lpNorm<Eigen::Infinity>();
    it.residuals.m = r3.lpNorm<Eigen::Infinity>();
    // ||U V^T||_F^2 = <U^T U, V^T V>
    const double c2 = (factors.U.transpose() * factors.U).cwiseProduct(factors.V.transpose() * factors.V).sum();
    it.objective += 0.5 * c2 + params.lambda * s.E.lpNorm<1>() + 0.5 * rho * (R1.squaredNorm() + r3.squaredNorm());
  }
  s.rho = std::min(params.eta * rho, params.rho_max);
}

bool finite(const AdmmState& s, const LowRankCoefficients& factors) {
  return s.Z.allFinite() && s.E.allFinite() && factors.V.allFinite() && s.u.allFinite() &&
         s.m.allFinite() && s.Y1.allFinite() && s.Y2.allFinite() && s.y.allFinite();
}

}  // namespace

AdmmResult run_admm(const LinearizedModel& model, const EpipolarEmbedding& embedding,
                    const AdmmParams& params, AdmmState start) {
  params.validate();
  const DisplacementSolver solver(model, embedding, params.regularizer);
  AdmmResult result;
  result.degenerate = solver.degenerate();
  result.state = std::move(start);
  AdmmState& s = result.state;
  LowRankCoefficients factors;
  bool have_factors = false;
  result.history.reserve(params.max_iterations);
  for (int k = 1; k <= params.max_iterations; ++k) {
    const double rho = s.rho;
    AdmmIterate it;
    it.iteration = k;
    it.rho = rho;
    factored_sweep(s, factors, have_factors, model, embedding, params, solver, it);
    if (!finite(s, factors) || !std::isfinite(it.objective)) {
      throw NumericalError("ADMM produced a non-finite value at iteration " + std::to_string(k) +
                           " (rho = " + std::to_string(rho) + ")");
    }
    result.history.push_back(it);
    result.iterations = k;
    if (it.residuals.max() <= params.tolerance) {
      result.converged = true;
      break;
    }
  }
  if (have_factors) s.C = factors.dense();
  return result;
}

AdmmResult run_admm(const LinearizedModel& model, const EpipolarEmbedding& embedding,
                    const AdmmParams& params, const Eigen::VectorXd& u0) {
  return run_admm(model, embedding, params, AdmmState::initial(model, embedding, u0, params.rho0));
}

}  // namespace mbt
