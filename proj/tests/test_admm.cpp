#include <cmath>
#include <deque>
#include <random>

#include <Eigen/QR>

#include "doctest.h"
#include "mbtrack/admm.hpp"
#include "mbtrack/synthlab.hpp"

using namespace mbt;
using synth::Block;

namespace {

double max_abs(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a - b).cwiseAbs().maxCoeff(); }

Eigen::MatrixXd closed_form(const synth::RandomInstance& in, Block block) {
  const auto& s = in.state;
  const auto& pr = in.problem;
  switch (block) {
    case Block::Z: return update_Z(s, pr.model, pr.params);
    case Block::E: return update_E(s, in.embedding, pr.params);
    case Block::C: return update_C(s, in.embedding);
    case Block::u: return update_u(s, pr.model, in.embedding, pr.params);
    case Block::m: return update_m(s, in.embedding);
  }
  return {};
}

AdmmState with_block(AdmmState s, Block block, const Eigen::MatrixXd& value) {
  switch (block) {
    case Block::Z: s.Z = value; break;
    case Block::E: s.E = value; break;
    case Block::C: s.C = value; break;
    case Block::u: s.u = value; break;
    case Block::m: s.m = value; break;
  }
  return s;
}

}  // namespace

TEST_CASE("soft_threshold") {
  Eigen::Vector3d x(1.2, -0.3, -2.0);
  const Eigen::Vector3d t = soft_threshold(x, 0.5);
  CHECK(t(0) == doctest::Approx(0.7));
  CHECK(t(1) == 0.0);
  CHECK(t(2) == doctest::Approx(-1.5));
}

TEST_CASE("update_Z") {
  LinearizedModel m;
  m.grad_x = Eigen::MatrixXd::Zero(1, 2);
  m.grad_y = Eigen::MatrixXd::Zero(1, 2);
  m.tau = Eigen::RowVector2d(-1.2, -0.4);  // A(u) = -tau
  AdmmState s;
  s.u = Eigen::VectorXd::Zero(2);
  s.Y2 = Eigen::MatrixXd::Zero(1, 2);
  s.rho = 2.0;
  AdmmParams p;
  p.gamma = 1.0;
  const Eigen::MatrixXd Z = update_Z(s, m, p);
  CHECK(Z(0, 0) == doctest::Approx(0.7));
  CHECK(Z(0, 1) == 0.0);
}

TEST_CASE("update_E") {
  std::mt19937_64 rng(21);
  auto in = synth::random_instance(rng);
  in.state.C = Eigen::MatrixXd::Identity(6, 6);
  const auto& p = in.problem.params;
  CHECK(max_abs(update_E(in.state, in.embedding, p), soft_threshold(in.state.Y1 / in.state.rho, p.lambda / in.state.rho)) < 1e-15);
  AdmmParams huge = p;
  huge.lambda = 1e12;
  CHECK(update_E(in.state, in.embedding, huge).isZero(0));
}

TEST_CASE("update_C") {
  std::mt19937_64 rng(22);
  auto in = synth::random_instance(rng);
  auto& s = in.state;

  SUBCASE("W = 0") {
    s.m = -in.embedding.b;
    CHECK(update_C(s, in.embedding).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("stationary for large rho with E = Y1 = 0") {
    s.E.setZero();
    s.Y1.setZero();
    s.rho = 1e8;
    const Eigen::MatrixXd C = update_C(s, in.embedding);
    const Eigen::MatrixXd W = in.embedding.W(s.m);
    const Eigen::MatrixXd grad = C + s.rho * W.transpose() * (W * C - W);
    CHECK(grad.cwiseAbs().maxCoeff() < 1e-6 * s.rho * W.squaredNorm());
    // The limit is the row-space projector of W, whose rank is min(9, N) = 6 here.
    CHECK(max_abs(C, Eigen::MatrixXd::Identity(6, 6)) < 1e-4);
  }
  SUBCASE("matches a stacked least-squares solve") {
    const Eigen::MatrixXd W = in.embedding.W(s.m);
    const double r = std::sqrt(s.rho);
    Eigen::MatrixXd A(15, 6), rhs(15, 6);
    A << Eigen::MatrixXd::Identity(6, 6), r * W;
    rhs << Eigen::MatrixXd::Zero(6, 6), r * (W - s.E + s.Y1 / s.rho);
    const Eigen::MatrixXd reference = A.colPivHouseholderQr().solve(rhs);
    CHECK(max_abs(update_C(s, in.embedding), reference) < 1e-9);
  }
}

TEST_CASE("low-rank C and m updates agree with the dense ones") {
  std::mt19937_64 rng(23);
  for (int features : {6, 12, 40}) {
    for (int trial = 0; trial < 5; ++trial) {
      auto in = synth::random_instance(rng, features, 9);
      auto& s = in.state;
      if (trial == 4) s.rho = 1e8;
      const auto f = update_C_lowrank(s, in.embedding);
      const Eigen::MatrixXd dense = update_C(s, in.embedding);
      if (trial < 4) {
        CHECK(max_abs(f.dense(), dense) <= 1e-8 * std::max(1.0, dense.cwiseAbs().maxCoeff()));
      } else {
        // I + rho W^T W is too ill-conditioned for elementwise agreement; compare normal-equation residuals.
        const Eigen::MatrixXd W = in.embedding.W(s.m);
        const Eigen::MatrixXd target = s.rho * W.transpose() * (W - s.E + s.Y1 / s.rho);
        auto residual = [&](const Eigen::MatrixXd& C) {
          return (C + s.rho * W.transpose() * (W * C) - target).norm() / target.norm();
        };
        MESSAGE("N=" << features << " normal-equation residual low-rank " << residual(f.dense()) << ", dense "
                     << residual(dense));
        CHECK(residual(f.dense()) <= 1e-9);
      }
      s.C = f.dense();
      const Eigen::VectorXd m_dense = update_m(s, in.embedding);
      CHECK((update_m(s, in.embedding, f) - m_dense).cwiseAbs().maxCoeff() <=
            1e-8 * std::max(1.0, m_dense.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("update_u") {
  SUBCASE("single feature, H = k I") {
    LinearizedModel m;
    m.grad_x = Eigen::RowVector2d(2, 0);
    m.grad_y = Eigen::RowVector2d(0, 2);
    m.tau = Eigen::RowVector2d(1, -3);
    m.weight = Eigen::MatrixXd::Ones(1, 2);
    m.lost = {false};
    const Eigen::Vector2d x(0.5, -1.0);
    const auto e = build_P_b(Eigen::Matrix2Xd(x));
    AdmmState s;
    s.rho = 3.0;
    s.Z = Eigen::RowVector2d(0.2, 0.1);
    s.Y2 = Eigen::RowVector2d(-1.0, 0.5);
    s.y = Eigen::VectorXd::LinSpaced(9, -1, 1);
    s.m = Eigen::VectorXd::LinSpaced(9, 0.3, -0.2);
    s.u = Eigen::VectorXd::Zero(2);
    AdmmParams p;
    // H = 4 I; P^T P = (x^2 + y^2 + 1) I since P has columns x (x) e1, x (x) e2.
    const double k = 4.0 + x.squaredNorm() + 1.0;
    const Eigen::MatrixXd P = e.P;
    Eigen::Vector2d g;
    g << 2 * (s.Y2(0, 0) + s.rho * (m.tau(0, 0) + s.Z(0, 0))), 2 * (s.Y2(0, 1) + s.rho * (m.tau(0, 1) + s.Z(0, 1)));
    const Eigen::Vector2d expected = (g + P.transpose() * (s.y + s.rho * s.m)) / (s.rho * k);
    CHECK((update_u(s, m, e, p) - expected).norm() < 1e-10);
  }
  SUBCASE("zero right-hand side") {
    std::mt19937_64 rng(24);
    auto in = synth::random_instance(rng);
    auto& s = in.state;
    s.Y2.setZero();
    s.y.setZero();
    s.m.setZero();
    s.Z = -in.problem.model.tau;
    CHECK(update_u(s, in.problem.model, in.embedding, in.problem.params).norm() < 1e-14);
  }
  SUBCASE("degenerate features keep their value without the regularizer") {
    std::mt19937_64 rng(25);
    auto in = synth::random_instance(rng);
    in.problem.model.grad_x.row(2).setZero();
    in.problem.model.grad_y.row(2).setZero();
    in.problem.params.regularizer = false;
    const DisplacementSolver solver(in.problem.model, in.embedding, false);
    CHECK(solver.degenerate()[2]);
    CHECK_FALSE(solver.degenerate()[1]);
    const Eigen::VectorXd u = update_u(in.state, in.problem.model, in.embedding, in.problem.params, solver);
    CHECK(u.segment<2>(4) == in.state.u.segment<2>(4));
  }
}

TEST_CASE("update_m") {
  std::mt19937_64 rng(26);
  auto in = synth::random_instance(rng);
  auto& s = in.state;
  SUBCASE("C = I") {
    s.C = Eigen::MatrixXd::Identity(6, 6);
    const Eigen::VectorXd G = s.y / s.rho - in.embedding.P * s.u;
    CHECK((update_m(s, in.embedding) + G).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("M = -B when G = B") {
    // P u = -b has no solution (b has ones where P has zero rows), so G = B is reached through y.
    s.Y1.setZero();
    s.E.setZero();
    s.y = s.rho * (in.embedding.b + in.embedding.P * s.u);
    const Eigen::MatrixXd M = reshape_9xN(update_m(s, in.embedding));
    CHECK(max_abs(M, -in.embedding.B()) < 1e-12);
    CHECK(in.embedding.W(vec(M)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("update_multipliers") {
  std::mt19937_64 rng(27);
  auto in = synth::random_instance(rng);
  auto& s = in.state;
  const auto& model = in.problem.model;
  AdmmParams p = in.problem.params;

  SUBCASE("feasible state keeps its multipliers") {
    s.m = in.embedding.P * s.u;
    s.Z = residual_map(model, s.u);
    const Eigen::MatrixXd W = in.embedding.W(s.m);
    s.E = W - W * s.C;
    const auto out = update_multipliers(s, model, in.embedding, p);
    CHECK(max_abs(out.Y1, s.Y1) < 1e-13);
    CHECK(max_abs(out.Y2, s.Y2) < 1e-13);
    CHECK((out.y - s.y).cwiseAbs().maxCoeff() < 1e-13);
    CHECK(out.rho == doctest::Approx(p.eta * s.rho));
  }
  SUBCASE("cap") {
    p.rho_max = s.rho;
    CHECK(update_multipliers(s, model, in.embedding, p).rho == s.rho);
  }
  SUBCASE("dual ascent formula") {
    const auto out = update_multipliers(s, model, in.embedding, p);
    const Eigen::MatrixXd W = in.embedding.W(s.m);
    CHECK(max_abs(out.Y1, s.Y1 + s.rho * (W - W * s.C - s.E)) < 1e-12);
    CHECK(max_abs(out.Y2, s.Y2 + s.rho * (s.Z - residual_map(model, s.u))) < 1e-12);
    CHECK((out.y - s.y - s.rho * (s.m - in.embedding.P * s.u)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("closed-form updates match the generic block minimizer") {
  std::mt19937_64 rng(28);
  for (int trial = 0; trial < 10; ++trial) {
    const auto in = synth::random_instance(rng);
    for (Block b : {Block::Z, Block::E, Block::C, Block::u, Block::m}) {
      const Eigen::MatrixXd oracle = synth::oracle_minimize_block(in.problem, b, in.state);
      CHECK(max_abs(closed_form(in, b), oracle) <= 1e-8);
    }
  }
}

TEST_CASE("u and m updates are stationary points") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 5; ++trial) {
    const auto in = synth::random_instance(rng);
    for (Block b : {Block::u, Block::m}) {
      const auto before = synth::lagrangian_gradient(in.problem, b, in.state);
      const auto after =
          synth::lagrangian_gradient(in.problem, b, with_block(in.state, b, closed_form(in, b)));
      CHECK(after.norm() <= 1e-5 * before.norm());
    }
  }
}

TEST_CASE("Z and E satisfy the per-element subgradient condition") {
  std::mt19937_64 rng(30);
  const auto in = synth::random_instance(rng);
  const auto& s = in.state;
  const auto& p = in.problem.params;
  const Eigen::MatrixXd Z = update_Z(s, in.problem.model, p);
  const Eigen::MatrixXd A = residual_map(in.problem.model, s.u);
  for (Eigen::Index k = 0; k < Z.size(); ++k) {
    // 0 in gamma d|Z| + Y2 + rho (Z - A)
    const double smooth = s.Y2.data()[k] + s.rho * (Z.data()[k] - A.data()[k]);
    if (Z.data()[k] != 0.0)
      CHECK(std::abs(p.gamma * (Z.data()[k] > 0 ? 1 : -1) + smooth) < 1e-10);
    else
      CHECK(std::abs(smooth) <= p.gamma + 1e-12);
  }
  const Eigen::MatrixXd E = update_E(s, in.embedding, p);
  const Eigen::MatrixXd W = in.embedding.W(s.m);
  const Eigen::MatrixXd R = W - W * s.C;
  for (Eigen::Index k = 0; k < E.size(); ++k) {
    // 0 in lambda d|E| - Y1 - rho (R - E)
    const double smooth = -s.Y1.data()[k] - s.rho * (R.data()[k] - E.data()[k]);
    if (E.data()[k] != 0.0)
      CHECK(std::abs(p.lambda * (E.data()[k] > 0 ? 1 : -1) + smooth) < 1e-10);
    else
      CHECK(std::abs(smooth) <= p.lambda + 1e-12);
  }
}

TEST_CASE("run_admm recovers a shift when the data term dominates") {
  // A linear image makes the Taylor model exact: grad . u = tau at u = (0.7, -0.4).
  LinearizedModel m;
  m.grad_x = Eigen::RowVectorXd::LinSpaced(9, 0.2, 1.0);
  m.grad_y = Eigen::RowVectorXd::LinSpaced(9, 1.0, -0.5);
  m.tau = 0.7 * m.grad_x - 0.4 * m.grad_y;
  m.weight = Eigen::MatrixXd::Ones(1, 9);
  m.u0 = Eigen::VectorXd::Zero(2);
  m.lost = {false};
  const auto e = build_P_b(Eigen::Matrix2Xd(Eigen::Vector2d(0.3, 0.2)));
  AdmmParams p;
  p.gamma = 1.0;
  p.lambda = 1e12;
  const auto r = run_admm(m, e, p, Eigen::VectorXd::Zero(2));
  CHECK(r.converged);
  CHECK((r.state.u - Eigen::Vector2d(0.7, -0.4)).norm() < 1e-4);
}

TEST_CASE("one sweep leaves a fixed point unchanged") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> g;
  const int n = 6, p = 9;
  LinearizedModel model;
  model.grad_x = Eigen::MatrixXd::NullaryExpr(n, p, [&] { return g(rng); });
  model.grad_y = Eigen::MatrixXd::NullaryExpr(n, p, [&] { return g(rng); });
  model.weight = Eigen::MatrixXd::Ones(n, p);
  model.u0 = Eigen::VectorXd::Zero(2 * n);
  model.lost.assign(n, false);
  const Eigen::Matrix2Xd points = Eigen::Matrix2Xd::NullaryExpr(2, n, [&] { return g(rng); });
  const auto emb = build_P_b(points);

  AdmmParams params;
  params.lambda = 1e-3;
  params.rho0 = params.rho_max = 10.0;

  AdmmState s;
  s.rho = params.rho0;
  s.u = 0.3 * Eigen::VectorXd::NullaryExpr(2 * n, [&] { return g(rng); });
  // A(u) = 0 at the fixed point.
  model.tau = (model.grad_x.array().colwise() * as_points(s.u).row(0).transpose().array() +
               model.grad_y.array().colwise() * as_points(s.u).row(1).transpose().array()).matrix();
  s.m = emb.P * s.u;
  s.Z = Eigen::MatrixXd::Zero(n, p);
  const Eigen::MatrixXd W = emb.W(s.m);
  s.Y1 = params.lambda * W.array().sign().matrix();
  s.C = W.transpose() * s.Y1;
  s.E = W - W * s.C;
  REQUIRE((s.E.array().sign() == W.array().sign()).all());
  s.y = -vec(Eigen::MatrixXd(s.Y1 * (Eigen::MatrixXd::Identity(n, n) - s.C).transpose()));
  // Y2 balances the lifting multiplier in the u-block: sum_j Y2_ij grad_ij = -(P^T y)_i.
  const Eigen::VectorXd Pty = emb.P.transpose() * s.y;
  s.Y2.resize(n, p);
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXd Gi(2, p);
    Gi << model.grad_x.row(i), model.grad_y.row(i);
    s.Y2.row(i) = (Gi.transpose() * (Gi * Gi.transpose()).ldlt().solve(-Pty.segment<2>(2 * i))).transpose();
  }
  params.gamma = 10.0 * s.Y2.cwiseAbs().maxCoeff() + 1.0;

  AdmmState next = s;
  admm_sweep(next, model, emb, params, DisplacementSolver(model, emb, true));
  CHECK(max_abs(next.Z, s.Z) < 1e-10);
  CHECK(max_abs(next.E, s.E) < 1e-10);
  CHECK(max_abs(next.C, s.C) < 1e-10);
  CHECK((next.u - s.u).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((next.m - s.m).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(max_abs(next.Y1, s.Y1) < 1e-10);
  CHECK(max_abs(next.Y2, s.Y2) < 1e-10 * std::max(1.0, s.Y2.cwiseAbs().maxCoeff()));
  CHECK((next.y - s.y).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(next.rho == s.rho);
}

namespace {

// gamma ||A(u)||_1 + 1/2 ||C||^2 + lambda ||W(u) - W(u) C||_1 with |x| smoothed to sqrt(x^2 + mu^2).
struct EliminatedObjective {
  const LinearizedModel& model;
  const EpipolarEmbedding& emb;
  double gamma, lambda;
  int n;

  double value(const Eigen::VectorXd& x, double mu, Eigen::VectorXd* grad) const {
    const Eigen::VectorXd u = x.head(2 * n);
    const Eigen::Map<const Eigen::MatrixXd> C(x.data() + 2 * n, n, n);
    const Eigen::MatrixXd A = residual_map(model, u);
    const Eigen::MatrixXd W = emb.W(emb.P * u);
    const Eigen::MatrixXd D = Eigen::MatrixXd::Identity(n, n) - C;
    const Eigen::MatrixXd R = W * D;
    auto smooth = [mu](const Eigen::MatrixXd& M) { return (M.array().square() + mu * mu).sqrt(); };
    const double f = gamma * smooth(A).sum() + 0.5 * C.squaredNorm() + lambda * smooth(R).sum();
    if (grad) {
      const Eigen::MatrixXd dA = gamma * (A.array() / smooth(A)).matrix();
      const Eigen::MatrixXd dR = lambda * (R.array() / smooth(R)).matrix();
      Eigen::VectorXd gu(2 * n);
      for (int i = 0; i < n; ++i) {
        gu(2 * i) = dA.row(i).dot(model.grad_x.row(i));
        gu(2 * i + 1) = dA.row(i).dot(model.grad_y.row(i));
      }
      gu += emb.P.transpose() * vec(Eigen::MatrixXd(dR * D.transpose()));
      const Eigen::MatrixXd gC = C - W.transpose() * dR;
      grad->resize(x.size());
      *grad << gu, vec(gC);
    }
    return f;
  }
};

// Limited-memory BFGS with Armijo backtracking.
Eigen::VectorXd lbfgs(const EliminatedObjective& obj, Eigen::VectorXd x, double mu, int iterations) {
  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> mem;
  Eigen::VectorXd g;
  double f = obj.value(x, mu, &g);
  for (int it = 0; it < iterations && g.norm() > 1e-12; ++it) {
    Eigen::VectorXd q = g;
    std::vector<double> alpha(mem.size());
    for (int k = static_cast<int>(mem.size()) - 1; k >= 0; --k) {
      alpha[k] = mem[k].first.dot(q) / mem[k].second.dot(mem[k].first);
      q -= alpha[k] * mem[k].second;
    }
    if (!mem.empty()) q *= mem.back().first.dot(mem.back().second) / mem.back().second.squaredNorm();
    for (std::size_t k = 0; k < mem.size(); ++k) {
      const double beta = mem[k].second.dot(q) / mem[k].second.dot(mem[k].first);
      q += (alpha[k] - beta) * mem[k].first;
    }
    Eigen::VectorXd d = -q;
    if (d.dot(g) >= 0) {
      d = -g;
      mem.clear();
    }
    double t = 1.0;
    Eigen::VectorXd xn, gn;
    double fn = 0;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      xn = x + t * d;
      fn = obj.value(xn, mu, &gn);
      if (fn <= f + 1e-4 * t * d.dot(g)) break;
    }
    if (!(fn < f)) break;
    const Eigen::VectorXd sv = xn - x, yv = gn - g;
    if (sv.dot(yv) > 1e-16) {
      mem.emplace_back(sv, yv);
      if (mem.size() > 12) mem.pop_front();
    }
    x = xn;
    f = fn;
    g = gn;
  }
  return x;
}

}  // namespace

TEST_CASE("run_admm reaches the best objective of a generic multi-start solver") {
  std::mt19937_64 rng(32);
  std::normal_distribution<double> g;
  const int n = 6, p = 9;
  // Two affine motions of three points each, linear data term built around them.
  const Eigen::Matrix2Xd points = Eigen::Matrix2Xd::NullaryExpr(2, n, [&] { return g(rng); });
  Eigen::VectorXd u_true(2 * n);
  for (int i = 0; i < n; ++i) {
    const double side = i < 3 ? 1.0 : -1.0;
    const Eigen::Matrix2d A = Eigen::Matrix2d::Identity() + 0.05 * side * Eigen::Matrix2d{{1, 0.5}, {-0.5, 1}};
    const Eigen::Vector2d t(0.2 * side, -0.1 * side);
    u_true.segment<2>(2 * i) = A * points.col(i) + t - points.col(i);
  }
  LinearizedModel model;
  model.grad_x = Eigen::MatrixXd::NullaryExpr(n, p, [&] { return g(rng); });
  model.grad_y = Eigen::MatrixXd::NullaryExpr(n, p, [&] { return g(rng); });
  model.tau.setZero(n, p);
  model.tau = residual_map(model, u_true) + 0.01 * Eigen::MatrixXd::NullaryExpr(n, p, [&] { return g(rng); });
  model.weight = Eigen::MatrixXd::Ones(n, p);
  model.u0 = Eigen::VectorXd::Zero(2 * n);
  model.lost.assign(n, false);
  const auto emb = build_P_b(points);

  AdmmParams params;
  params.gamma = 2.0;
  params.lambda = 1.0;
  const auto result = run_admm(model, emb, params, Eigen::VectorXd::Zero(2 * n));
  CHECK(result.converged);

  const EliminatedObjective obj{model, emb, params.gamma, params.lambda, n};
  Eigen::VectorXd x_admm(2 * n + n * n);
  x_admm << result.state.u, vec(result.state.C);
  const double f_admm = obj.value(x_admm, 0.0, nullptr);

  double best = std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < 50; ++restart) {
    Eigen::VectorXd x(2 * n + n * n);
    x << 0.5 * Eigen::VectorXd::NullaryExpr(2 * n, [&] { return g(rng); }),
        0.3 * Eigen::VectorXd::NullaryExpr(n * n, [&] { return g(rng); });
    for (double mu : {1e-2, 1e-4, 1e-6, 1e-8}) x = lbfgs(obj, x, mu, 3000);
    best = std::min(best, obj.value(x, 0.0, nullptr));
  }
  MESSAGE("admm objective " << f_admm << ", best generic " << best);
  CHECK(f_admm <= 1.01 * best);
}

TEST_CASE("run_admm bookkeeping") {
  std::mt19937_64 rng(33);
  const auto in = synth::random_instance(rng, 8, 9);
  AdmmParams p = in.problem.params;
  p.rho0 = 0.1;
  const auto r = run_admm(in.problem.model, in.embedding, p, Eigen::VectorXd::Zero(16));
  REQUIRE(!r.history.empty());
  for (std::size_t k = 1; k < r.history.size(); ++k) {
    CHECK(r.history[k].rho >= r.history[k - 1].rho);
    CHECK(r.history[k].rho <= p.rho_max);
  }
  if (r.converged) {
    const auto res = constraint_residuals(r.state, in.problem.model, in.embedding);
    CHECK(res.max() <= p.tolerance);
  }
  CHECK(r.iterations == static_cast<int>(r.history.size()));

  LinearizedModel bad = in.problem.model;
  bad.tau(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(run_admm(bad, in.embedding, p, Eigen::VectorXd::Zero(16)), NumericalError);

  AdmmParams invalid = p;
  invalid.eta = 1.0;
  CHECK_THROWS_AS(run_admm(in.problem.model, in.embedding, invalid, Eigen::VectorXd::Zero(16)), std::invalid_argument);
}

TEST_CASE("run_admm follows the dense reference sweep") {
  std::mt19937_64 rng(37);
  for (int features : {5, 20}) {
    const auto in = synth::random_instance(rng, features, 9);
    AdmmParams p = in.problem.params;
    p.max_iterations = 40;
    p.tolerance = 1e-300;  // run all iterations
    const Eigen::VectorXd u0 = Eigen::VectorXd::Zero(2 * features);
    const auto r = run_admm(in.problem.model, in.embedding, p, u0);

    AdmmState s = AdmmState::initial(in.problem.model, in.embedding, u0, p.rho0);
    const DisplacementSolver solver(in.problem.model, in.embedding, true);
    for (int k = 0; k < p.max_iterations; ++k) {
      const double rho = s.rho;
      admm_sweep(s, in.problem.model, in.embedding, p, solver);
      AdmmState at_rho = s;
      at_rho.rho = rho;
      const auto& it = r.history[k];
      const auto res = constraint_residuals(s, in.problem.model, in.embedding);
      CHECK(it.residuals.max() == doctest::Approx(res.max()).epsilon(1e-6));
      CHECK(it.objective == doctest::Approx(merit(at_rho, in.problem.model, in.embedding, p)).epsilon(1e-9));
    }
    CAPTURE(features);
    CHECK(max_abs(r.state.u, s.u) <= 1e-8);
    CHECK(max_abs(r.state.C, s.C) <= 1e-8 * std::max(1.0, s.C.cwiseAbs().maxCoeff()));
    CHECK(max_abs(r.state.Y1, s.Y1) <= 1e-6 * std::max(1.0, s.Y1.cwiseAbs().maxCoeff()));
    CHECK(r.state.rho == s.rho);
  }
}
