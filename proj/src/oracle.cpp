#include <cmath>
#include <functional>
#include <stdexcept>

#include "mbtrack/synthlab.hpp"

namespace mbt::synth {

namespace {

// Everything here uses plain loops over the definitions.

Eigen::MatrixXd lifted(const LagrangianProblem& pr, const AdmmState& s) {
  const auto n = pr.points.cols();
  Eigen::MatrixXd W(9, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x[3] = {pr.points(0, i), pr.points(1, i), 1.0};
    for (int k = 0; k < 3; ++k) {
      for (int c = 0; c < 3; ++c) W(3 * k + c, i) = x[k] * x[c] + s.m(9 * i + 3 * k + c);
    }
  }
  return W;
}

Eigen::VectorXd lift_displacement(const LagrangianProblem& pr, const Eigen::VectorXd& u) {
  const auto n = pr.points.cols();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(9 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x[3] = {pr.points(0, i), pr.points(1, i), 1.0};
    for (int k = 0; k < 3; ++k) {
      out(9 * i + 3 * k + 0) = x[k] * u(2 * i);
      out(9 * i + 3 * k + 1) = x[k] * u(2 * i + 1);
    }
  }
  return out;
}

Eigen::MatrixXd data_residual(const LagrangianProblem& pr, const Eigen::VectorXd& u) {
  const auto& md = pr.model;
  Eigen::MatrixXd A(md.features(), md.patch_pixels());
  for (int i = 0; i < md.features(); ++i) {
    for (int j = 0; j < md.patch_pixels(); ++j) {
      A(i, j) = md.grad_x(i, j) * u(2 * i) + md.grad_y(i, j) * u(2 * i + 1) - md.tau(i, j);
    }
  }
  return A;
}

Eigen::MatrixXd self_expression_residual(const LagrangianProblem& pr, const AdmmState& s) {
  const Eigen::MatrixXd W = lifted(pr, s);
  Eigen::MatrixXd R = W - s.E;
  for (Eigen::Index r = 0; r < W.rows(); ++r) {
    for (Eigen::Index i = 0; i < W.cols(); ++i) {
      double acc = 0.0;
      for (Eigen::Index k = 0; k < W.cols(); ++k) acc += W(r, k) * s.C(k, i);
      R(r, i) -= acc;
    }
  }
  return R;
}

double abs_sum(const Eigen::MatrixXd& M) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k < M.size(); ++k) acc += std::abs(M.data()[k]);
  return acc;
}

double evaluate(const LagrangianProblem& pr, const AdmmState& s, bool with_multipliers) {
  const auto& p = pr.params;
  const Eigen::MatrixXd zr = s.Z - data_residual(pr, s.u);
  double value = p.gamma * abs_sum(s.Z) + 0.5 * s.rho * zr.squaredNorm();
  if (with_multipliers) value += (s.Y2.array() * zr.array()).sum();
  if (p.regularizer) {
    const Eigen::MatrixXd wr = self_expression_residual(pr, s);
    const Eigen::VectorXd mr = s.m - lift_displacement(pr, s.u);
    value += 0.5 * s.C.squaredNorm() + p.lambda * abs_sum(s.E);
    value += 0.5 * s.rho * (wr.squaredNorm() + mr.squaredNorm());
    if (with_multipliers) value += (s.Y1.array() * wr.array()).sum() + s.y.dot(mr);
  }
  return value;
}

// Minimizes a convex scalar function given the signed difference f(a) - f(b).
double ternary_minimize(const std::function<double(double, double)>& diff) {
  double hi = 1.0;
  while (diff(hi, 0.5 * hi) < 0.0) hi *= 2.0;
  double lo = -1.0;
  while (diff(lo, 0.5 * lo) < 0.0) lo *= 2.0;
  for (int it = 0; it < 400 && hi - lo > 0.0; ++it) {
    const double a = lo + (hi - lo) / 3.0;
    const double b = hi - (hi - lo) / 3.0;
    if (a <= lo || b >= hi) break;
    if (diff(a, b) <= 0.0) {
      hi = b;
    } else {
      lo = a;
    }
  }
  return 0.5 * (lo + hi);
}

Eigen::VectorXd& block_vector(AdmmState& s, Block block) {
  if (block == Block::u) return s.u;
  if (block == Block::m) return s.m;
  throw std::invalid_argument("block is not a vector");
}

// Minimizes the (quadratic) Lagrangian over one smooth block with conjugate gradients on the
// Hessian and gradient recovered from unit-step differences, exact for quadratics.
Eigen::VectorXd quadratic_block_minimum(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::Index d) {
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd g(d);
  Eigen::MatrixXd H(d, d);
  for (Eigen::Index k = 0; k < d; ++k) {
    Eigen::VectorXd e = zero;
    e(k) = 1.0;
    g(k) = 0.5 * (f(e) - f(-e));
    for (Eigen::Index l = 0; l <= k; ++l) {
      Eigen::VectorXd el = zero;
      el(l) = 1.0;
      H(k, l) = 0.25 * (f(e + el) - f(e - el) - f(el - e) + f(-e - el));
      H(l, k) = H(k, l);
    }
  }
  Eigen::VectorXd x = zero;
  Eigen::VectorXd r = -g;
  Eigen::VectorXd p = r;
  double rr = r.squaredNorm();
  const double stop = 1e-30 * std::max(1.0, g.squaredNorm());
  for (Eigen::Index it = 0; it < 20 * d && rr > stop; ++it) {
    const Eigen::VectorXd Hp = H * p;
    const double alpha = rr / p.dot(Hp);
    x += alpha * p;
    if ((it + 1) % d == 0) {
      r = -g - H * x;
    } else {
      r -= alpha * Hp;
    }
    const double rr_next = r.squaredNorm();
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  return x;
}

}  // namespace

double augmented_lagrangian(const LagrangianProblem& problem, const AdmmState& s) {
  return evaluate(problem, s, true);
}

double oracle_objective(const LagrangianProblem& problem, const AdmmState& s) {
  return evaluate(problem, s, false);
}

Eigen::MatrixXd oracle_minimize_block(const LagrangianProblem& problem, Block block, const AdmmState& s) {
  const auto& p = problem.params;
  const double rho = s.rho;
  switch (block) {
    case Block::Z: {
      const Eigen::MatrixXd A = data_residual(problem, s.u);
      Eigen::MatrixXd Z(A.rows(), A.cols());
      for (Eigen::Index k = 0; k < A.size(); ++k) {
        const double a0 = A.data()[k], y = s.Y2.data()[k];
        Z.data()[k] = ternary_minimize([&](double a, double b) {
          return p.gamma * (std::abs(a) - std::abs(b)) + y * (a - b) + 0.5 * rho * (a - b) * (a + b - 2.0 * a0);
        });
      }
      return Z;
    }
    case Block::E: {
      AdmmState t = s;
      t.E.setZero();
      const Eigen::MatrixXd R = self_expression_residual(problem, t);  // W - W C
      Eigen::MatrixXd E(R.rows(), R.cols());
      for (Eigen::Index k = 0; k < R.size(); ++k) {
        const double r0 = R.data()[k], y = s.Y1.data()[k];
        E.data()[k] = ternary_minimize([&](double a, double b) {
          return p.lambda * (std::abs(a) - std::abs(b)) - y * (a - b) + 0.5 * rho * (a - b) * (a + b - 2.0 * r0);
        });
      }
      return E;
    }
    case Block::C: {
      const auto n = s.C.rows();
      AdmmState t = s;
      auto f = [&](const Eigen::VectorXd& v) {
        t.C = Eigen::Map<const Eigen::MatrixXd>(v.data(), n, n);
        return augmented_lagrangian(problem, t);
      };
      const Eigen::VectorXd c = quadratic_block_minimum(f, n * n);
      return Eigen::Map<const Eigen::MatrixXd>(c.data(), n, n);
    }
    case Block::u:
    case Block::m: {
      AdmmState t = s;
      Eigen::VectorXd& target = block_vector(t, block);
      auto f = [&](const Eigen::VectorXd& v) {
        target = v;
        return augmented_lagrangian(problem, t);
      };
      return quadratic_block_minimum(f, target.size());
    }
  }
  throw std::invalid_argument("unknown block");
}

Eigen::VectorXd lagrangian_gradient(const LagrangianProblem& problem, Block block, const AdmmState& s,
                                    double step) {
  AdmmState t = s;
  Eigen::VectorXd& v = block_vector(t, block);
  const Eigen::VectorXd base = v;
  Eigen::VectorXd g(base.size());
  for (Eigen::Index k = 0; k < base.size(); ++k) {
    v = base;
    v(k) += step;
    const double plus = augmented_lagrangian(problem, t);
    v(k) = base(k) - step;
    const double minus = augmented_lagrangian(problem, t);
    g(k) = (plus - minus) / (2.0 * step);
  }
  return g;
}

RandomInstance random_instance(std::mt19937_64& rng, int features, int patch_pixels) {
  if (features < 1 || patch_pixels < 1) throw std::invalid_argument("random_instance: empty instance");
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto randn = [&](Eigen::Index r, Eigen::Index c, double sd) {
    Eigen::MatrixXd M(r, c);
    for (Eigen::Index k = 0; k < M.size(); ++k) M.data()[k] = sd * gauss(rng);
    return M;
  };

  RandomInstance inst;
  auto& pr = inst.problem;
  pr.points = (randn(2, features, 1.0)).array().max(-2.0).min(2.0).matrix();
  pr.model.grad_x = randn(features, patch_pixels, 1.0);
  pr.model.grad_y = randn(features, patch_pixels, 1.0);
  pr.model.tau = randn(features, patch_pixels, 1.0);
  pr.model.weight = Eigen::MatrixXd::Ones(features, patch_pixels);
  pr.model.u0 = randn(2 * features, 1, 0.5);
  pr.model.lost.assign(features, false);
  pr.params.gamma = 0.5 + 1.5 * unit(rng);
  pr.params.lambda = 0.2 + 0.8 * unit(rng);
  pr.params.regularizer = true;

  inst.embedding = build_P_b(pr.points);
  auto& s = inst.state;
  s.rho = 0.5 + 4.5 * unit(rng);
  s.u = randn(2 * features, 1, 0.5);
  s.m = inst.embedding.P * s.u + Eigen::VectorXd(randn(9 * features, 1, 0.05));
  s.Z = randn(features, patch_pixels, 1.0);
  s.E = randn(9, features, 0.1);
  s.C = randn(features, features, 0.1);
  s.Y1 = randn(9, features, 1.0);
  s.Y2 = randn(features, patch_pixels, 1.0);
  s.y = randn(9 * features, 1, 1.0);
  pr.params.rho0 = s.rho;
  return inst;
}

}  // namespace mbt::synth
