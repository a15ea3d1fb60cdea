#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"
#include "mbtrack/admm.hpp"

using namespace mbt::cli;

namespace {

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
    if (c == '"') c = '\'';
  }
  return s;
}

int fail(int code, const std::string& kind, const std::string& message) {
  std::cerr << "error code=" << code << " kind=" << kind << " message=\"" << one_line(message) << "\"" << std::endl;
  return code;
}

const char* kind_of(ExitCode code) {
  switch (code) {
    case kUsage: return "usage";
    case kConfigError: return "config";
    case kMissingInput: return "missing_input";
    case kInvalidInput: return "invalid_input";
    default: return "failure";
  }
}

// Flags shared by every subcommand, mapped onto config keys.
struct Flags {
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
  std::string config_file;

  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    options[key] = app->add_option(flag, values[key], help);
  }

  RunConfig resolve() const {
    RunConfig config;
    if (!config_file.empty()) load_config(config, config_file);
    for (const auto& [key, opt] : options) {
      if (opt->count() > 0) config.set(key, values.at(key));
    }
    return config;
  }
};

void add_common(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config_file, "key=value config file; flags override it");
  f.add(app, "--out", "out", "output directory");
  f.add(app, "--seed", "seed", "random seed");
  f.add(app, "--sigma2", "sigma2", "noise variance");
}

void add_tracker(CLI::App* app, Flags& f) {
  f.add(app, "--method", "method", "klt, l1klt or multibody");
  f.add(app, "--patch", "patch", "patch side in pixels (odd)");
  f.add(app, "--levels", "levels", "pyramid levels");
  f.add(app, "--gamma", "gamma", "data term weight");
  f.add(app, "--lambda", "lambda", "outlier term weight");
  f.add(app, "--in", "input", "sequence directory");
  f.add(app, "--features", "features_file", "initial feature CSV (default <in>/truth.csv)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-body feature tracking"};
  app.require_subcommand(1);

  Flags track_f, eval_f, segment_f, synth_f, noise_f;
  auto* track = app.add_subcommand("track", "track features through a sequence");
  add_common(track, track_f);
  add_tracker(track, track_f);
  track_f.add(track, "--overlays", "overlays", "write overlay PNGs (true/false)");

  auto* eval = app.add_subcommand("eval", "count tracking errors against ground truth");
  add_common(eval, eval_f);
  eval_f.add(eval, "--eps", "eps", "error tolerance in pixels (strict)");
  eval_f.add(eval, "--tracks", "tracks", "tracks CSV");
  eval_f.add(eval, "--truth", "truth", "ground truth CSV");
  eval_f.add(eval, "--labels", "labels", "predicted labels CSV");

  auto* segment = app.add_subcommand("segment", "track and segment motions frame by frame");
  add_common(segment, segment_f);
  add_tracker(segment, segment_f);
  segment_f.add(segment, "--clusters,-K", "clusters", "number of motions");

  auto* synth = app.add_subcommand("synth", "render a synthetic sequence with ground truth");
  add_common(synth, synth_f);
  synth_f.add(synth, "--preset", "preset", "two-body, checkerboard, single-body, pure-translation or static");
  synth_f.add(synth, "--frames", "frames", "number of frames");
  synth_f.add(synth, "--count", "features", "features per body");

  auto* noise = app.add_subcommand("noise", "add Gaussian noise to a sequence");
  add_common(noise, noise_f);
  noise_f.add(noise, "--in", "input", "sequence directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(kUsage, "usage", e.what());
  }

  try {
    if (*track) {
      cmd_track(track_f.resolve(), std::cout);
    } else if (*eval) {
      cmd_eval(eval_f.resolve(), std::cout);
    } else if (*segment) {
      cmd_segment(segment_f.resolve(), std::cout);
    } else if (*synth) {
      cmd_synth(synth_f.resolve(), std::cout);
    } else if (*noise) {
      cmd_noise(noise_f.resolve(), std::cout);
    }
  } catch (const CliError& e) {
    return fail(e.code(), kind_of(e.code()), e.what());
  } catch (const mbt::NumericalError& e) {
    return fail(kFailure, "numerical", e.what());
  } catch (const std::exception& e) {
    return fail(kFailure, "failure", e.what());
  }
  return kOk;
}
