#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "files.hpp"
#include "json.hpp"
#include "run_config.hpp"

namespace mbt::cli {

/// Tracking-error counts of a tracks table against ground truth.
struct EvalReport {
  double eps = 5.0;
  double sigma2 = 0.0;
  int features = 0;
  std::vector<int> frames;        // evaluated frames (all but the first)
  std::vector<int> errors;        // per frame: features with drift > eps, or lost
  std::vector<double> mean_drift; // per frame, over features with finite drift
  int excluded = 0;               // occluded ground-truth rows skipped
  double average_errors = 0.0;
  double average_drift = 0.0;
  std::optional<double> segmentation_error;
};

/// Errors use strict inequality (drift > eps). Lost tracks count in every frame after loss.
/// Throws CliError(kInvalidInput) when the track ids or frames of the two tables differ.
EvalReport evaluate(const TrackTable& tracks, const TrackTable& truth, double eps);

nlohmann::json to_json(const EvalReport& report);

void cmd_synth(const RunConfig& config, std::ostream& log);
void cmd_noise(const RunConfig& config, std::ostream& log);
void cmd_track(const RunConfig& config, std::ostream& log);
EvalReport cmd_eval(const RunConfig& config, std::ostream& log);
void cmd_segment(const RunConfig& config, std::ostream& log);

}  // namespace mbt::cli
