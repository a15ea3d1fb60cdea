#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "mbtrack/admm.hpp"
#include "mbtrack/imaging.hpp"
#include "mbtrack/linearize.hpp"

namespace mbt {

enum class Method { klt, l1klt, multibody };

std::string to_string(Method m);
Method parse_method(const std::string& name);

struct TrackerConfig {
  Method method = Method::multibody;
  int levels = 4;
  int max_taylor = 10;
  double outer_tolerance = 0.01;  // px at the current level, max over features
  int half_size = 3;              // 7x7 patches
  AdmmParams admm;  // admm.regularizer = false turns multibody into its ablation

  void validate() const;
  /// 13x13 patches, used for higher-resolution footage.
  static TrackerConfig large_patch();
};

enum class TrackStatus { tracked, lost, degenerate };

std::string to_string(TrackStatus s);

/// One inner solve of the pyramid loop.
struct SolveRecord {
  int level = 0;
  int taylor_iteration = 0;
  int features = 0;
  bool converged = true;
  int iterations = 0;
  double step = 0.0;  // max_i ||u_i - u0_i|| in level pixels
  std::vector<AdmmIterate> history;
};

struct TrackResult {
  Eigen::VectorXd u;                // 2N, level-0 pixels
  std::vector<TrackStatus> status;  // per feature
  Eigen::MatrixXd C;                // over `active` (multibody only)
  std::vector<int> active;          // features that entered the final solve
  std::vector<SolveRecord> solves;

  bool all_lost() const;
};

/// Per-feature Gauss-Newton step u_i = H_i^{-1} sum_j tau_ij grad_ij^T. Features with a singular
/// H_i keep their expansion point and are flagged.
Eigen::VectorXd klt_baseline_solve(const LinearizedModel& model, std::vector<bool>* degenerate = nullptr);

/// Pyramidal tracking of `features` from template T into image I, starting at u0 (2N, or empty
/// for zero).
TrackResult track_frame(const GrayImage& T, const GrayImage& I, const FeatureSet& features,
                        const TrackerConfig& cfg, const Eigen::VectorXd& u0 = {});

/// Frame-to-frame chaining. Result k maps frame k to frame k+1; lost features stay lost.
std::vector<TrackResult> track_sequence(const std::vector<GrayImage>& frames,
                                        const FeatureSet& initial, const TrackerConfig& cfg);

/// Feature positions in every frame implied by a sequence of results (2 x N per frame).
std::vector<Eigen::Matrix2Xd> positions(const FeatureSet& initial, const std::vector<TrackResult>& results);

}  // namespace mbt
