#include "mbtrack/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/LU>

#include "mbtrack/epipolar.hpp"

namespace mbt {

std::string to_string(Method m) {
  switch (m) {
    case Method::klt: return "klt";
    case Method::l1klt: return "l1klt";
    case Method::multibody: return "multibody";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  if (name == "klt") return Method::klt;
  if (name == "l1klt") return Method::l1klt;
  if (name == "multibody") return Method::multibody;
  throw std::invalid_argument("unknown method '" + name + "' (expected klt, l1klt or multibody)");
}

std::string to_string(TrackStatus s) {
  switch (s) {
    case TrackStatus::tracked: return "tracked";
    case TrackStatus::lost: return "lost";
    case TrackStatus::degenerate: return "degenerate";
  }
  return "?";
}

void TrackerConfig::validate() const {
  if (levels < 1) throw std::invalid_argument("TrackerConfig: levels must be >= 1");
  if (max_taylor < 1) throw std::invalid_argument("TrackerConfig: max_taylor must be >= 1");
  if (!(outer_tolerance > 0.0)) throw std::invalid_argument("TrackerConfig: outer tolerance must be positive");
  if (half_size < 1) throw std::invalid_argument("TrackerConfig: patch half-size must be >= 1");
  admm.validate();
}

TrackerConfig TrackerConfig::large_patch() {
  TrackerConfig c;
  c.half_size = 6;
  return c;
}

bool TrackResult::all_lost() const {
  return std::all_of(status.begin(), status.end(), [](TrackStatus s) { return s == TrackStatus::lost; });
}

Eigen::VectorXd klt_baseline_solve(const LinearizedModel& model, std::vector<bool>* degenerate) {
  const int n = model.features();
  const BlockDiagonal2 H = build_H(model);
  Eigen::VectorXd u = model.u0;
  if (degenerate) degenerate->assign(n, false);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d rhs(model.tau.row(i).dot(model.grad_x.row(i)),
                              model.tau.row(i).dot(model.grad_y.row(i)));
    const Eigen::Matrix2d& h = H.blocks[i];
    const double det = h.determinant();
    if (!(det > 1e-12 * h.trace() * h.trace())) {
      if (degenerate) (*degenerate)[i] = true;
      continue;
    }
    u.segment<2>(2 * i) = h.inverse() * rhs;
  }
  return u;
}

namespace {

struct InnerSolve {
  Eigen::VectorXd u;
  std::vector<bool> degenerate;
  Eigen::MatrixXd C;
  bool converged = true;
  int iterations = 0;
  std::vector<AdmmIterate> history;
};

InnerSolve solve_linearized(const LinearizedModel& model, const FeatureSet& features,
                            const TrackerConfig& cfg) {
  InnerSolve out;
  if (cfg.method == Method::klt) {
    out.u = klt_baseline_solve(model, &out.degenerate);
    return out;
  }
  // The ADMM runs in normalized coordinates; v = s u maps displacements.
  const NormalizedFeatures nf = normalize_coords(features);
  const double s = nf.transform.scale;
  const EpipolarEmbedding embedding = build_P_b(nf.features);
  const LinearizedModel scaled = rescaled(model, s);
  AdmmParams params = cfg.admm;
  params.regularizer = cfg.method == Method::multibody && cfg.admm.regularizer;
  AdmmResult r = run_admm(scaled, embedding, params, scaled.u0);
  out.u = r.state.u / s;
  out.degenerate = r.degenerate;
  if (params.regularizer) out.C = std::move(r.state.C);
  out.converged = r.converged;
  out.iterations = r.iterations;
  out.history = std::move(r.history);
  return out;
}

}  // namespace

TrackResult track_frame(const GrayImage& T, const GrayImage& I, const FeatureSet& features,
                        const TrackerConfig& cfg, const Eigen::VectorXd& u0) {
  cfg.validate();
  if (T.width() != I.width() || T.height() != I.height()) {
    throw std::invalid_argument("track_frame: template and image sizes differ");
  }
  const int n = features.size();
  if (u0.size() != 0 && u0.size() != 2 * n) throw std::invalid_argument("track_frame: u0 must have length 2N");

  FeatureSet fs = features;
  fs.half_size = cfg.half_size;
  const int min_side = 2 * fs.patch_side();
  const Pyramid pT = build_pyramid(T, cfg.levels, min_side);
  const Pyramid pI = build_pyramid(I, cfg.levels, min_side);

  TrackResult result;
  result.u = u0.size() == 0 ? Eigen::VectorXd::Zero(2 * n) : u0;
  result.status.assign(n, TrackStatus::tracked);
  std::vector<bool> degenerate(n, false);

  for (int level = cfg.levels - 1; level >= 0; --level) {
    const double scale = std::ldexp(1.0, level);
    const GradientField grad = gradient(pI[level]);
    Eigen::VectorXd u_level = result.u / scale;

    for (int it = 1; it <= cfg.max_taylor; ++it) {
      std::vector<int> active;
      for (int i = 0; i < n; ++i) {
        if (result.status[i] != TrackStatus::lost) active.push_back(i);
      }
      if (active.empty()) break;

      FeatureSet level_fs = fs.select(active);
      level_fs.centers /= scale;
      Eigen::VectorXd u_active(2 * active.size());
      for (std::size_t k = 0; k < active.size(); ++k) u_active.segment<2>(2 * k) = u_level.segment<2>(2 * active[k]);

      LinearizedModel model = linearize(pI[level], grad, pT[level], level_fs, u_active);
      std::vector<int> keep;
      for (std::size_t k = 0; k < active.size(); ++k) {
        if (model.lost[k]) {
          result.status[active[k]] = TrackStatus::lost;
        } else {
          keep.push_back(static_cast<int>(k));
        }
      }
      if (keep.empty()) break;
      if (keep.size() != active.size()) {
        model = select(model, keep);
        level_fs = level_fs.select(keep);
        std::vector<int> remaining;
        for (int k : keep) remaining.push_back(active[k]);
        active = std::move(remaining);
      }

      InnerSolve solve = solve_linearized(model, level_fs, cfg);
      double step = 0.0;
      for (std::size_t k = 0; k < active.size(); ++k) {
        const Eigen::Vector2d ui = solve.u.segment<2>(2 * k);
        step = std::max(step, (ui - model.u0.segment<2>(2 * k)).norm());
        u_level.segment<2>(2 * active[k]) = ui;
        degenerate[active[k]] = solve.degenerate.empty() ? false : solve.degenerate[k];
      }
      SolveRecord rec;
      rec.level = level;
      rec.taylor_iteration = it;
      rec.features = static_cast<int>(active.size());
      rec.converged = solve.converged;
      rec.iterations = solve.iterations;
      rec.step = step;
      rec.history = std::move(solve.history);
      result.solves.push_back(std::move(rec));
      result.active = active;
      result.C = std::move(solve.C);
      if (step < cfg.outer_tolerance) break;
    }
    result.u = u_level * scale;
  }

  for (int i = 0; i < n; ++i) {
    if (result.status[i] != TrackStatus::lost && degenerate[i]) result.status[i] = TrackStatus::degenerate;
  }
  return result;
}

std::vector<TrackResult> track_sequence(const std::vector<GrayImage>& frames,
                                        const FeatureSet& initial, const TrackerConfig& cfg) {
  if (frames.size() < 2) throw std::invalid_argument("track_sequence: need at least two frames");
  const int n = initial.size();
  Eigen::Matrix2Xd pos = initial.centers;
  std::vector<bool> lost(n, false);
  std::vector<TrackResult> out;
  out.reserve(frames.size() - 1);

  for (std::size_t t = 0; t + 1 < frames.size(); ++t) {
    std::vector<int> alive;
    for (int i = 0; i < n; ++i) {
      if (!lost[i]) alive.push_back(i);
    }
    TrackResult full;
    full.u = Eigen::VectorXd::Zero(2 * n);
    full.status.assign(n, TrackStatus::lost);
    if (!alive.empty()) {
      FeatureSet fs(pos, initial.half_size);
      TrackResult r = track_frame(frames[t], frames[t + 1], fs.select(alive), cfg);
      for (std::size_t k = 0; k < alive.size(); ++k) {
        const int i = alive[k];
        full.status[i] = r.status[k];
        if (r.status[k] == TrackStatus::lost) {
          lost[i] = true;
        } else {
          full.u.segment<2>(2 * i) = r.u.segment<2>(2 * k);
          pos.col(i) += r.u.segment<2>(2 * k);
        }
      }
      for (int& a : r.active) a = alive[a];
      full.active = std::move(r.active);
      full.C = std::move(r.C);
      full.solves = std::move(r.solves);
    }
    out.push_back(std::move(full));
  }
  return out;
}

std::vector<Eigen::Matrix2Xd> positions(const FeatureSet& initial, const std::vector<TrackResult>& results) {
  std::vector<Eigen::Matrix2Xd> out{initial.centers};
  for (const auto& r : results) out.push_back(out.back() + as_points(r.u));
  return out;
}

}  // namespace mbt
