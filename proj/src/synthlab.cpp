#include "mbtrack/synthlab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <Eigen/Geometry>

namespace mbt::synth {

Eigen::Matrix3d Camera::K() const {
  Eigen::Matrix3d k;
  k << focal, 0, cx, 0, focal, cy, 0, 0, 1;
  return k;
}

Eigen::Vector2d Camera::project(const Eigen::Vector3d& X) const {
  if (!(X.z() > 1e-9)) throw std::domain_error("point behind the camera");
  return {focal * X.x() / X.z() + cx, focal * X.y() / X.z() + cy};
}

double Texture::operator()(double s, double t) const {
  double v = mean;
  for (const auto& w : waves) {
    v += w.amplitude * std::sin(2.0 * std::numbers::pi * (w.frequency.x() * s + w.frequency.y() * t) + w.phase);
  }
  return std::clamp(v, 0.0, 1.0);
}

Texture Texture::random(std::mt19937_64& rng, double min_wavelength, double max_wavelength, int count,
                        double amplitude) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Texture tex;
  tex.mean = 0.5;
  for (int k = 0; k < count; ++k) {
    const double angle = std::numbers::pi * (k + unit(rng)) / count;  // spread directions
    const double wavelength = min_wavelength + (max_wavelength - min_wavelength) * unit(rng);
    Wave w;
    w.frequency = Eigen::Vector2d(std::cos(angle), std::sin(angle)) / wavelength;
    w.amplitude = amplitude / std::sqrt(static_cast<double>(count)) * (0.6 + 0.4 * unit(rng));
    w.phase = 2.0 * std::numbers::pi * unit(rng);
    tex.waves.push_back(w);
  }
  return tex;
}

Texture Texture::grid(std::mt19937_64& rng, double period, double amplitude) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Texture tex;
  tex.mean = 0.5;
  // sin(a) sin(b) = (cos(a - b) - cos(a + b)) / 2, written as two diagonal waves.
  const double f = 1.0 / period;
  const double phase = 2.0 * std::numbers::pi * unit(rng);
  tex.waves.push_back({Eigen::Vector2d(f, -f), 0.5 * amplitude, phase + std::numbers::pi / 2});
  tex.waves.push_back({Eigen::Vector2d(f, f), 0.5 * amplitude, phase - std::numbers::pi / 2});
  for (int k = 0; k < 2; ++k) {
    const double angle = std::numbers::pi * (k + unit(rng)) / 2;
    tex.waves.push_back({Eigen::Vector2d(std::cos(angle), std::sin(angle)) / (6.0 * period), 0.08,
                         2.0 * std::numbers::pi * unit(rng)});
  }
  return tex;
}

Eigen::Matrix3d rotation(const Eigen::Vector3d& axis_angle) {
  const double theta = axis_angle.norm();
  if (theta < 1e-15) return Eigen::Matrix3d::Identity();
  const Eigen::Matrix3d k = skew<double>(Eigen::Vector3d(axis_angle / theta));
  return Eigen::Matrix3d::Identity() + std::sin(theta) * k + (1.0 - std::cos(theta)) * k * k;
}

Pose relative_motion(const Pose& from, const Pose& to) {
  Pose rel;
  rel.R = to.R * from.R.transpose();
  rel.t = to.t - rel.R * from.t;
  return rel;
}

namespace {

struct Hit {
  double depth = std::numeric_limits<double>::infinity();
  double value = 0.5;
  int body = -1;
  int face = -1;
};

// Nearest surface along the ray through pixel (x, y).
Hit cast(const std::vector<RigidBodySpec>& bodies, const Camera& cam, int frame, double x, double y) {
  const Eigen::Vector3d d((x - cam.cx) / cam.focal, (y - cam.cy) / cam.focal, 1.0);
  Hit best;
  for (std::size_t b = 0; b < bodies.size(); ++b) {
    const Pose& pose = bodies[b].poses[frame];
    for (std::size_t f = 0; f < bodies[b].faces.size(); ++f) {
      const Face& face = bodies[b].faces[f];
      const Eigen::Vector3d o = pose * face.origin;
      const Eigen::Vector3d as = pose.R * face.axis_s;
      const Eigen::Vector3d at = pose.R * face.axis_t;
      const Eigen::Vector3d n = as.cross(at);
      const double denom = n.dot(d);
      if (std::abs(denom) < 1e-12) continue;
      const double depth = n.dot(o) / denom;
      if (!(depth > 0.0) || depth >= best.depth) continue;
      const Eigen::Vector3d rel = depth * d - o;
      const double s = rel.dot(as) / as.squaredNorm();
      const double t = rel.dot(at) / at.squaredNorm();
      if (s < 0.0 || t < 0.0 || s > face.extent.x() || t > face.extent.y()) continue;
      best = {depth, face.texture(s, t), static_cast<int>(b), static_cast<int>(f)};
    }
  }
  return best;
}

}  // namespace

SyntheticSequence render_scene(const std::vector<RigidBodySpec>& bodies, const Camera& camera, int frames) {
  if (bodies.empty()) throw std::invalid_argument("render_scene: need at least one body");
  if (frames < 1) throw std::invalid_argument("render_scene: need at least one frame");
  for (const auto& b : bodies) {
    if (static_cast<int>(b.poses.size()) < frames) throw std::invalid_argument("render_scene: missing poses");
    for (const auto& p : b.poses) {
      if (!(p.R.transpose() * p.R).isIdentity(1e-12)) throw std::invalid_argument("render_scene: pose is not a rotation");
    }
  }

  SyntheticSequence seq;
  seq.camera = camera;
  for (std::size_t b = 0; b < bodies.size(); ++b) {
    for (std::size_t k = 0; k < bodies[b].points.size(); ++k) seq.labels.push_back(static_cast<int>(b));
  }
  const int n = seq.features();

  for (int t = 0; t < frames; ++t) {
    Raster px(camera.height, camera.width);
    for (int y = 0; y < camera.height; ++y) {
      for (int x = 0; x < camera.width; ++x) px(y, x) = cast(bodies, camera, t, x, y).value;
    }
    seq.frames.emplace_back(std::move(px));

    Eigen::Matrix2Xd track(2, n);
    std::vector<bool> occluded(n, false);
    int i = 0;
    for (const auto& body : bodies) {
      for (const auto& X : body.points) {
        const Eigen::Vector3d Xc = body.poses[t] * X;
        const Eigen::Vector2d x = camera.project(Xc);
        track.col(i) = x;
        const Hit h = cast(bodies, camera, t, x.x(), x.y());
        occluded[i] = h.depth < Xc.z() * (1.0 - 1e-9);
        if (x.x() < 0 || x.y() < 0 || x.x() > camera.width - 1 || x.y() > camera.height - 1) {
          throw std::invalid_argument("render_scene: feature projects outside the frame");
        }
        ++i;
      }
    }
    seq.tracks.push_back(std::move(track));
    seq.occluded.push_back(std::move(occluded));
  }

  const Eigen::Matrix3d K = camera.K();
  for (int t = 0; t + 1 < frames; ++t) {
    std::vector<std::optional<FundamentalMatrix>> per_body;
    for (const auto& body : bodies) {
      const Pose rel = relative_motion(body.poses[t], body.poses[t + 1]);
      if (body.points.empty() || rel.t.norm() < 1e-12) {
        per_body.emplace_back();
      } else {
        per_body.emplace_back(FundamentalMatrix::from_motion(K, rel.R, rel.t));
      }
    }
    seq.fundamentals.push_back(std::move(per_body));
  }
  return seq;
}

namespace {

struct Motion {
  Eigen::Vector3d center;
  Eigen::Vector3d velocity;
  Eigen::Vector3d spin;  // rotation vector per frame
};

std::vector<Pose> constant_motion(const Motion& m, int frames) {
  std::vector<Pose> poses;
  for (int t = 0; t < frames; ++t) {
    poses.push_back({rotation(m.spin * t), m.center + m.velocity * t});
  }
  return poses;
}

// Two rectangles meeting at a ridge that faces the camera, centered on the body origin.
std::vector<Face> folded_card(double side, double height, double fold, const Texture& a, const Texture& b) {
  const double c = std::cos(fold), s = std::sin(fold);
  const Eigen::Vector3d ridge(0.0, -height / 2, -side * s / 2);
  Face left{ridge, Eigen::Vector3d(-c, 0.0, s), Eigen::Vector3d::UnitY(), {side, height}, a};
  Face right{ridge, Eigen::Vector3d(c, 0.0, s), Eigen::Vector3d::UnitY(), {side, height}, b};
  return {left, right};
}

Face flat_card(double width, double height, const Texture& tex) {
  return {Eigen::Vector3d(-width / 2, -height / 2, 0.0), Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitY(),
          {width, height}, tex};
}

RigidBodySpec backdrop(std::mt19937_64& rng, int frames) {
  RigidBodySpec bg;
  bg.faces.push_back(flat_card(14.0, 14.0, Texture::random(rng, 0.6, 1.6, 6, 0.3)));
  bg.poses = constant_motion({Eigen::Vector3d(0, 0, 12.0), Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero()}, frames);
  return bg;
}

// Feature points on the faces, away from face borders and from each other in the first frame.
// Dense requests shrink the spacing after runs of rejected samples.
void place_features(RigidBodySpec& body, int count, double margin, double min_pixels, const Camera& cam,
                    std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Eigen::Vector2d> taken;
  int rejected = 0;
  while (static_cast<int>(body.points.size()) < count) {
    if (rejected > 20000) {
      min_pixels *= 0.8;
      rejected = 0;
      if (min_pixels < 1.0) throw std::runtime_error("place_features: could not place features");
    }
    const Face& f = body.faces[static_cast<std::size_t>(unit(rng) * body.faces.size()) % body.faces.size()];
    const double s = margin + (f.extent.x() - 2 * margin) * unit(rng);
    const double t = margin + (f.extent.y() - 2 * margin) * unit(rng);
    const Eigen::Vector3d X = f.origin + s * f.axis_s + t * f.axis_t;
    const Eigen::Vector2d x = cam.project(body.poses.front() * X);
    const bool crowded = std::any_of(taken.begin(), taken.end(),
                                     [&](const Eigen::Vector2d& p) { return (p - x).norm() < min_pixels; });
    if (crowded) {
      ++rejected;
      continue;
    }
    taken.push_back(x);
    body.points.push_back(X);
  }
}

Eigen::Vector3d jitter(std::mt19937_64& rng, double amount) {
  std::uniform_real_distribution<double> u(-amount, amount);
  return {u(rng), u(rng), u(rng)};
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"two-body", "checkerboard", "single-body", "pure-translation", "static"};
}

SyntheticSequence make_preset(const std::string& name, std::uint64_t seed, const PresetOptions& options) {
  const auto known = preset_names();
  if (std::find(known.begin(), known.end(), name) == known.end()) {
    throw std::invalid_argument("unknown preset '" + name + "'");
  }
  std::mt19937_64 rng(seed);
  const Camera cam;
  const int frames = options.frames;
  const int per_body = options.features_per_body;
  constexpr double kFold = 0.5;  // radians

  std::vector<RigidBodySpec> bodies;
  bool repetitive = false;

  if (name == "two-body" || name == "checkerboard") {
    repetitive = name == "checkerboard";
    auto tex = [&] {
      return repetitive ? Texture::grid(rng, 0.17) : Texture::random(rng, 0.15, 0.45, 10);
    };
    const Motion a{Eigen::Vector3d(-0.95, 0.0, 5.0) + jitter(rng, 0.05),
                   Eigen::Vector3d(0.025, -0.03, 0.02) + jitter(rng, 0.005),
                   Eigen::Vector3d(0.005, 0.012, 0.005) + jitter(rng, 0.002)};
    const Motion b{Eigen::Vector3d(0.95, 0.0, 5.4) + jitter(rng, 0.05),
                   Eigen::Vector3d(-0.025, 0.03, -0.025) + jitter(rng, 0.005),
                   Eigen::Vector3d(-0.008, -0.01, 0.0) + jitter(rng, 0.002)};
    for (const Motion& m : {a, b}) {
      RigidBodySpec body;
      const Texture t1 = tex();
      const Texture t2 = tex();
      body.faces = folded_card(0.62, 1.25, kFold, t1, t2);
      body.poses = constant_motion(m, frames);
      place_features(body, per_body, 0.13, 6.0, cam, rng);
      bodies.push_back(std::move(body));
    }
  } else if (name == "single-body") {
    RigidBodySpec body;
    const Texture t1 = Texture::random(rng, 0.15, 0.45, 10);
    const Texture t2 = Texture::random(rng, 0.15, 0.45, 10);
    body.faces = folded_card(0.9, 1.6, kFold, t1, t2);
    body.poses = constant_motion({Eigen::Vector3d(0.0, 0.0, 5.0) + jitter(rng, 0.05),
                                  Eigen::Vector3d(0.03, -0.02, 0.03) + jitter(rng, 0.005),
                                  Eigen::Vector3d(0.005, 0.012, -0.005) + jitter(rng, 0.002)},
                                 frames);
    place_features(body, per_body, 0.13, 6.0, cam, rng);
    bodies.push_back(std::move(body));
  } else if (name == "pure-translation") {
    RigidBodySpec body;
    body.faces.push_back(flat_card(1.8, 1.6, Texture::random(rng, 0.15, 0.45, 10)));
    body.poses = constant_motion({Eigen::Vector3d(0.0, 0.0, 5.0) + jitter(rng, 0.05),
                                  Eigen::Vector3d(0.03, 0.02, 0.03) + jitter(rng, 0.005),
                                  Eigen::Vector3d::Zero()},
                                 frames);
    place_features(body, per_body, 0.13, 6.0, cam, rng);
    bodies.push_back(std::move(body));
  } else {  // static
    RigidBodySpec body;
    const Texture t1 = Texture::random(rng, 0.15, 0.45, 10);
    const Texture t2 = Texture::random(rng, 0.15, 0.45, 10);
    body.faces = folded_card(0.9, 1.6, kFold, t1, t2);
    body.poses = constant_motion({Eigen::Vector3d(0.0, 0.0, 5.0), Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero()},
                                 frames);
    place_features(body, per_body, 0.13, 6.0, cam, rng);
    bodies.push_back(std::move(body));
  }
  bodies.push_back(backdrop(rng, frames));

  SyntheticSequence seq = render_scene(bodies, cam, frames);
  seq.preset = name;
  seq.repetitive = repetitive;
  // The backdrop carries no features; drop its (empty) fundamental slot.
  for (auto& pair : seq.fundamentals) pair.pop_back();
  return seq;
}

void add_noise(SyntheticSequence& seq, double variance, std::uint64_t seed) {
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    seq.frames[t] = add_gaussian_noise(seq.frames[t], variance, derive_seed(seed, t));
  }
}

}  // namespace mbt::synth
