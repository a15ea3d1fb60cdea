#include <random>

#include <Eigen/LU>

#include "doctest.h"
#include "mbtrack/admm.hpp"
#include "mbtrack/synthlab.hpp"

using namespace mbt;
using namespace mbt::synth;

TEST_CASE("rotation and relative motion") {
  const Eigen::Matrix3d R = rotation(Eigen::Vector3d(0.3, -0.2, 0.5));
  CHECK((R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(R.determinant() == doctest::Approx(1.0));
  CHECK(rotation(Eigen::Vector3d::Zero()) == Eigen::Matrix3d::Identity());
  CHECK((rotation(Eigen::Vector3d(0, 0, M_PI / 2)) * Eigen::Vector3d::UnitX() - Eigen::Vector3d::UnitY()).norm() < 1e-12);

  Pose a{rotation(Eigen::Vector3d(0.1, 0, 0)), Eigen::Vector3d(1, 2, 3)};
  Pose b{rotation(Eigen::Vector3d(0, 0.2, 0.1)), Eigen::Vector3d(0, 1, 5)};
  const Pose rel = relative_motion(a, b);
  const Eigen::Vector3d X(0.4, -0.7, 1.1);
  CHECK((rel * (a * X) - b * X).norm() < 1e-12);
}

TEST_CASE("camera projection") {
  const Camera cam;
  CHECK(cam.project(Eigen::Vector3d(0, 0, 2)) == Eigen::Vector2d(cam.cx, cam.cy));
  CHECK_THROWS_AS(cam.project(Eigen::Vector3d(0, 0, -1)), std::domain_error);
}

TEST_CASE("texture stays in range") {
  std::mt19937_64 rng(2);
  const auto t = Texture::random(rng, 0.1, 0.4);
  const auto g = Texture::grid(rng, 0.2);
  for (double s = -2; s < 2; s += 0.037) {
    CHECK(t(s, 0.3 * s) >= 0.0);
    CHECK(t(s, 0.3 * s) <= 1.0);
    CHECK(g(s, -s) >= 0.0);
  }
}

TEST_CASE("presets satisfy their geometric contracts") {
  for (const auto& name : preset_names()) {
    CAPTURE(name);
    const auto seq = make_preset(name, 3);
    REQUIRE(seq.frames.size() == 10);
    REQUIRE(seq.tracks.size() == 10);
    CHECK(seq.frames[0].width() == seq.camera.width);
    CHECK(seq.repetitive == (name == "checkerboard"));
    const int bodies = *std::max_element(seq.labels.begin(), seq.labels.end()) + 1;
    for (std::size_t pair = 0; pair + 1 < seq.frames.size(); ++pair) {
      REQUIRE(static_cast<int>(seq.fundamentals[pair].size()) == bodies);
      for (int b = 0; b < bodies; ++b) {
        const auto& F = seq.fundamentals[pair][b];
        if (name == "static") {
          CHECK_FALSE(F.has_value());
          continue;
        }
        REQUIRE(F.has_value());
        for (int i = 0; i < seq.features(); ++i) {
          if (seq.labels[i] != b) continue;
          const double r = F->residual(homogeneous<double>(seq.tracks[pair].col(i)),
                                       homogeneous<double>(seq.tracks[pair + 1].col(i)));
          CHECK(std::abs(r) <= 1e-10);
        }
      }
    }
    if (name == "static") CHECK((seq.tracks.back() - seq.tracks.front()).norm() == 0.0);
  }
  CHECK_THROWS(make_preset("nope", 1));
}

TEST_CASE("two bodies span more than either alone") {
  const auto seq = make_preset("two-body", 5);
  auto lifted = [&](int body) {
    std::vector<int> idx;
    for (int i = 0; i < seq.features(); ++i)
      if (body < 0 || seq.labels[i] == body) idx.push_back(i);
    Eigen::Matrix2Xd a(2, idx.size()), b(2, idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      a.col(k) = seq.tracks[0].col(idx[k]) / 256.0;
      b.col(k) = seq.tracks[3].col(idx[k]) / 256.0;
    }
    return embedding_matrix(a, b);
  };
  const int r0 = subspace_rank(lifted(0)), r1 = subspace_rank(lifted(1)), all = subspace_rank(lifted(-1));
  CHECK(r0 <= 8);
  CHECK(r1 <= 8);
  CHECK(all > r0);
  CHECK(all > r1);
}

TEST_CASE("true displacement makes the linearized residual small") {
  const auto seq = make_preset("two-body", 6);
  const FeatureSet fs = seq.initial_features();
  int checked = 0;
  for (int t = 0; t + 1 < 4; ++t) {
    const FeatureSet at(seq.tracks[t], fs.half_size);
    const Eigen::Matrix2Xd d = seq.tracks[t + 1] - seq.tracks[t];
    const Eigen::VectorXd u = Eigen::Map<const Eigen::VectorXd>(d.data(), d.size());
    const auto model = linearize(seq.frames[t + 1], seq.frames[t], at, u);
    const Eigen::MatrixXd A = residual_map(model, u);
    for (int i = 0; i < seq.features(); ++i) {
      if (seq.occluded[t][i] || seq.occluded[t + 1][i]) continue;
      ++checked;
      // Row maximum over the patch: brightness constancy up to bilinear interpolation and patch warp.
      CHECK(A.row(i).cwiseAbs().maxCoeff() <= 0.03);
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("rendering is deterministic and noise is reproducible") {
  const auto a = make_preset("checkerboard", 7), b = make_preset("checkerboard", 7);
  CHECK(a.frames == b.frames);
  CHECK(a.tracks.back() == b.tracks.back());
  CHECK_FALSE(make_preset("checkerboard", 8).frames[0] == a.frames[0]);

  auto n1 = a, n2 = a;
  add_noise(n1, 0.02, 5);
  add_noise(n2, 0.02, 5);
  CHECK(n1.frames == n2.frames);
  CHECK_FALSE(n1.frames[0] == n1.frames[1]);
}

TEST_CASE("oracle objective examples") {
  LagrangianProblem pr;
  const int n = 2, p = 3;
  pr.model.grad_x = pr.model.grad_y = pr.model.tau = Eigen::MatrixXd::Zero(n, p);
  pr.model.weight = Eigen::MatrixXd::Ones(n, p);
  pr.points = Eigen::Matrix2Xd::Zero(2, n);
  pr.params.gamma = 3.0;
  // The lifting always has W = B != 0 at m = P u, so all-zero variables cannot satisfy W = W C + E;
  // both examples use the data term alone.
  pr.params.regularizer = false;
  const auto emb = build_P_b(pr.points);
  AdmmState s = AdmmState::initial(pr.model, emb, Eigen::VectorXd::Zero(2 * n), 1.0);
  CHECK(oracle_objective(pr, s) == 0.0);
  CHECK(augmented_lagrangian(pr, s) == 0.0);

  // Z = A(u) with a single entry 2.
  pr.model.tau(0, 0) = -2.0;
  s = AdmmState::initial(pr.model, emb, Eigen::VectorXd::Zero(2 * n), 1.0);
  REQUIRE(s.Z(0, 0) == 2.0);
  CHECK(oracle_objective(pr, s) == 6.0);
  CHECK(augmented_lagrangian(pr, s) == 6.0);
}

TEST_CASE("oracle objective matches term-by-term summation") {
  std::mt19937_64 rng(9);
  const auto in = random_instance(rng, 5, 4);
  const auto& s = in.state;
  const auto& pr = in.problem;
  const Eigen::MatrixXd W = in.embedding.W(s.m);
  const Eigen::MatrixXd A = residual_map(pr.model, s.u);
  const Eigen::MatrixXd R1 = W - W * s.C - s.E, R2 = s.Z - A;
  const Eigen::VectorXd r3 = s.m - in.embedding.P * s.u;
  const double base = pr.params.gamma * s.Z.cwiseAbs().sum() + 0.5 * s.C.squaredNorm() + pr.params.lambda * s.E.cwiseAbs().sum();
  const double penalty = 0.5 * s.rho * (R1.squaredNorm() + R2.squaredNorm() + r3.squaredNorm());
  const double multipliers = s.y.dot(r3) + (s.Y1.array() * R1.array()).sum() + (s.Y2.array() * R2.array()).sum();
  CHECK(oracle_objective(pr, s) == doctest::Approx(base + penalty).epsilon(1e-12));
  CHECK(augmented_lagrangian(pr, s) == doctest::Approx(base + penalty + multipliers).epsilon(1e-12));

  AdmmParams params = pr.params;
  CHECK(merit(s, pr.model, in.embedding, params) == doctest::Approx(base + penalty).epsilon(1e-12));
}

TEST_CASE("oracle block minimizer examples") {
  std::mt19937_64 rng(10);
  SUBCASE("one-element Z") {
    auto in = random_instance(rng, 1, 1);
    const auto& s = in.state;
    const double a = residual_map(in.problem.model, s.u)(0, 0) - s.Y2(0, 0) / s.rho;
    const double t = in.problem.params.gamma / s.rho;
    const double expected = a > t ? a - t : (a < -t ? a + t : 0.0);
    CHECK(std::abs(oracle_minimize_block(in.problem, Block::Z, s)(0, 0) - expected) <= 1e-8);
  }
  SUBCASE("C with W = 0") {
    auto in = random_instance(rng, 4, 3);
    in.state.m = -in.embedding.b;
    CHECK(oracle_minimize_block(in.problem, Block::C, in.state).cwiseAbs().maxCoeff() <= 1e-8);
  }
  SUBCASE("m on N = 5") {
    auto in = random_instance(rng, 5, 9);
    const Eigen::VectorXd m = oracle_minimize_block(in.problem, Block::m, in.state);
    CHECK((m - update_m(in.state, in.embedding)).cwiseAbs().maxCoeff() <= 1e-8);
  }
  SUBCASE("gradient vanishes at the block minimizer") {
    auto in = random_instance(rng, 3, 4);
    in.state.u = oracle_minimize_block(in.problem, Block::u, in.state);
    CHECK(lagrangian_gradient(in.problem, Block::u, in.state).norm() < 1e-5);
  }
  CHECK_THROWS(random_instance(rng, 0, 3));
}
