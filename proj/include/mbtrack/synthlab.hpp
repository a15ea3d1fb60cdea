#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mbtrack/admm.hpp"
#include "mbtrack/epipolar.hpp"
#include "mbtrack/imaging.hpp"
#include "mbtrack/linearize.hpp"

namespace mbt::synth {

struct Camera {
  double focal = 300.0;
  double cx = 127.5;
  double cy = 127.5;
  int width = 256;
  int height = 256;

  Eigen::Matrix3d K() const;
  /// Throws std::domain_error for points at or behind the camera plane.
  Eigen::Vector2d project(const Eigen::Vector3d& X) const;
};

/// Smooth procedural intensity over face coordinates: mean + sum of sinusoids, clamped to [0,1].
struct Texture {
  struct Wave {
    Eigen::Vector2d frequency;  // cycles per world unit
    double amplitude = 0.0;
    double phase = 0.0;
  };
  double mean = 0.5;
  std::vector<Wave> waves;

  double operator()(double s, double t) const;

  /// Random band-limited texture with wavelengths in [min_wavelength, max_wavelength].
  static Texture random(std::mt19937_64& rng, double min_wavelength, double max_wavelength,
                        int count = 6, double amplitude = 0.35);
  /// Checkerboard-like product of two sinusoids with the given period, plus a faint low-frequency
  /// component so coarse pyramid levels keep some structure.
  static Texture grid(std::mt19937_64& rng, double period, double amplitude = 0.3);
};

/// Textured rectangle in body coordinates: origin + s * axis_s + t * axis_t, (s,t) in extent.
struct Face {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  Eigen::Vector3d axis_s = Eigen::Vector3d::UnitX();
  Eigen::Vector3d axis_t = Eigen::Vector3d::UnitY();
  Eigen::Vector2d extent = Eigen::Vector2d::Ones();
  Texture texture;
};

/// Body-to-camera transform X_cam = R X_body + t.
struct Pose {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();

  Eigen::Vector3d operator*(const Eigen::Vector3d& X) const { return R * X + t; }
};

struct RigidBodySpec {
  std::vector<Face> faces;
  std::vector<Eigen::Vector3d> points;  // feature points in body coordinates
  std::vector<Pose> poses;              // one per frame
};

struct SyntheticSequence {
  std::string preset;
  bool repetitive = false;
  Camera camera;
  std::vector<GrayImage> frames;
  std::vector<Eigen::Matrix2Xd> tracks;        // per frame, 2 x N
  std::vector<int> labels;                     // per feature, index of its body
  std::vector<std::vector<bool>> occluded;     // [frame][feature]
  /// [pair][body]; empty when the body does not translate between the two frames.
  std::vector<std::vector<std::optional<FundamentalMatrix>>> fundamentals;

  int features() const { return static_cast<int>(labels.size()); }
  FeatureSet initial_features(int half_size = 3) const { return {tracks.front(), half_size}; }
};

/// Exponential map of a rotation vector.
Eigen::Matrix3d rotation(const Eigen::Vector3d& axis_angle);

/// Relative motion of a body between two frames in camera coordinates: X' = R X + t.
Pose relative_motion(const Pose& from, const Pose& to);

/// Ray-casts every frame (pixel centers at integer coordinates), records exact projected tracks,
/// occlusion flags and per-body fundamental matrices. Bodies without feature points (such as a
/// static backdrop) are rendered but carry no tracks.
SyntheticSequence render_scene(const std::vector<RigidBodySpec>& bodies, const Camera& camera, int frames);

struct PresetOptions {
  int frames = 10;
  int features_per_body = 30;
};

/// Known presets: "two-body", "checkerboard", "single-body", "pure-translation", "static".
std::vector<std::string> preset_names();
SyntheticSequence make_preset(const std::string& name, std::uint64_t seed, const PresetOptions& options = {});

/// Adds independent per-frame noise (seed derived per frame index).
void add_noise(SyntheticSequence& seq, double variance, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Oracles. Everything below evaluates the augmented Lagrangian from its definition and minimizes
// it generically; it shares no code with the closed-form updates it is used to check.

/// The fixed data of one augmented Lagrangian: linearized residuals, template points in the
/// coordinates used by the lifting, and the weights.
struct LagrangianProblem {
  LinearizedModel model;
  Eigen::Matrix2Xd points;
  AdmmParams params;
};

double augmented_lagrangian(const LagrangianProblem& problem, const AdmmState& s);

/// gamma ||Z||_1 + 1/2 ||C||^2 + lambda ||E||_1 + rho/2 (||W - W C - E||^2 + ||Z - A||^2 + ||m - P u||^2).
double oracle_objective(const LagrangianProblem& problem, const AdmmState& s);

enum class Block { Z, E, C, u, m };

/// Minimizes the augmented Lagrangian over one block with the others frozen: per-element ternary
/// search for Z and E, conjugate gradient for C, u and m. Vectors come back as one column.
Eigen::MatrixXd oracle_minimize_block(const LagrangianProblem& problem, Block block, const AdmmState& s);

/// Central-difference gradient of the augmented Lagrangian with respect to u or m.
Eigen::VectorXd lagrangian_gradient(const LagrangianProblem& problem, Block block, const AdmmState& s,
                                    double step = 1e-6);

/// Random small instance (features x patch_pixels) with every block populated.
struct RandomInstance {
  LagrangianProblem problem;
  EpipolarEmbedding embedding;
  AdmmState state;
};
RandomInstance random_instance(std::mt19937_64& rng, int features = 6, int patch_pixels = 9);

}  // namespace mbt::synth
