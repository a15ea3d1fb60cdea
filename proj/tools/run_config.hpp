#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "mbtrack/tracker.hpp"

namespace mbt::cli {

/// Exit codes shared by every subcommand.
enum ExitCode : int {
  kOk = 0,
  kFailure = 1,       // unexpected runtime failure
  kUsage = 2,         // bad command line
  kConfigError = 3,   // config file unreadable or malformed
  kMissingInput = 4,  // input file or directory does not exist
  kInvalidInput = 5,  // inputs exist but are inconsistent
};

class CliError : public std::runtime_error {
 public:
  CliError(ExitCode code, const std::string& message) : std::runtime_error(message), code_(code) {}
  ExitCode code() const { return code_; }

 private:
  ExitCode code_;
};

/// Every knob of every subcommand. Keys in config files use the field names below.
///
///   method            klt | l1klt | multibody            (multibody)
///   patch             odd patch side in pixels             (7)
///   levels            pyramid levels                       (4)
///   gamma, lambda     data and outlier weights             (1.8e4, 1e4)
///   rho0, rho_max, eta, admm_tolerance, admm_iterations   ADMM schedule (0.1, 1e10, 1.1, 1e-6, 300)
///   max_taylor        re-linearizations per level          (10)
///   outer_tolerance   displacement change to stop, px      (0.01)
///   sigma2            Gaussian noise variance              (0)
///   seed              random seed                          (0)
///   eps               evaluation tolerance in px           (5; 10 suits repetitive textures)
///   clusters          number of motions for segment        (2)
///   baseline_weight   weight of the fixed-W baseline       (1)
///   preset, frames, features   synth scene                 (two-body, 10, 30)
///   input             sequence directory
///   features_file     initial feature CSV (default <input>/truth.csv)
///   tracks, truth, labels      CSV inputs of eval
///   out               output directory                     (.)
///   overlays          write overlay PNGs                   (false)
struct RunConfig {
  std::string method = "multibody";
  int patch = 7;
  int levels = 4;
  double gamma = 1.8e4;
  double lambda = 1.0e4;
  double rho0 = 0.1;
  double rho_max = 1e10;
  double eta = 1.1;
  double admm_tolerance = 1e-6;
  int admm_iterations = 300;
  int max_taylor = 10;
  double outer_tolerance = 0.01;
  double sigma2 = 0.0;
  std::uint64_t seed = 0;
  double eps = 5.0;
  int clusters = 2;
  double baseline_weight = 1.0;
  std::string preset = "two-body";
  int frames = 10;
  int features = 30;
  std::string input;
  std::string features_file;
  std::string tracks;
  std::string truth;
  std::string labels;
  std::string out = ".";
  bool overlays = false;

  /// Sets one key from its text value. Throws CliError(kConfigError) on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);

  /// Tracker settings; throws CliError(kInvalidInput) when they do not validate.
  TrackerConfig tracker() const;

  bool operator==(const RunConfig&) const = default;
};

/// Reads `key = value` lines; '#' starts a comment. Later keys override earlier ones.
void load_config(RunConfig& config, const std::filesystem::path& path);
RunConfig parse_config(const std::string& text);

/// All keys in a fixed order, values formatted so that parse_config(dump_config(c)) == c.
std::string dump_config(const RunConfig& config);

}  // namespace mbt::cli
