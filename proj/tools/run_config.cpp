#include "run_config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mbt::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw CliError(kConfigError, "invalid value '" + value + "' for key '" + key + "'");
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) bad_value(key, v);
    return d;
  } catch (const std::logic_error&) {
    bad_value(key, v);
  }
}

template <typename Int>
Int to_int(const std::string& key, const std::string& v) {
  Int out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v);
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (key == "method") method = v;
  else if (key == "patch") patch = to_int<int>(key, v);
  else if (key == "levels") levels = to_int<int>(key, v);
  else if (key == "gamma") gamma = to_double(key, v);
  else if (key == "lambda") lambda = to_double(key, v);
  else if (key == "rho0") rho0 = to_double(key, v);
  else if (key == "rho_max") rho_max = to_double(key, v);
  else if (key == "eta") eta = to_double(key, v);
  else if (key == "admm_tolerance") admm_tolerance = to_double(key, v);
  else if (key == "admm_iterations") admm_iterations = to_int<int>(key, v);
  else if (key == "max_taylor") max_taylor = to_int<int>(key, v);
  else if (key == "outer_tolerance") outer_tolerance = to_double(key, v);
  else if (key == "sigma2") sigma2 = to_double(key, v);
  else if (key == "seed") seed = to_int<std::uint64_t>(key, v);
  else if (key == "eps") eps = to_double(key, v);
  else if (key == "clusters") clusters = to_int<int>(key, v);
  else if (key == "baseline_weight") baseline_weight = to_double(key, v);
  else if (key == "preset") preset = v;
  else if (key == "frames") frames = to_int<int>(key, v);
  else if (key == "features") features = to_int<int>(key, v);
  else if (key == "input") input = v;
  else if (key == "features_file") features_file = v;
  else if (key == "tracks") tracks = v;
  else if (key == "truth") truth = v;
  else if (key == "labels") labels = v;
  else if (key == "out") out = v;
  else if (key == "overlays") overlays = to_bool(key, v);
  else throw CliError(kConfigError, "unknown config key '" + key + "'");
}

TrackerConfig RunConfig::tracker() const {
  TrackerConfig cfg;
  try {
    cfg.method = parse_method(method);
  } catch (const std::invalid_argument& e) {
    throw CliError(kInvalidInput, e.what());
  }
  if (patch < 3 || patch % 2 == 0) throw CliError(kInvalidInput, "patch must be an odd side length >= 3");
  cfg.half_size = patch / 2;
  cfg.levels = levels;
  cfg.max_taylor = max_taylor;
  cfg.outer_tolerance = outer_tolerance;
  cfg.admm.gamma = gamma;
  cfg.admm.lambda = lambda;
  cfg.admm.rho0 = rho0;
  cfg.admm.rho_max = rho_max;
  cfg.admm.eta = eta;
  cfg.admm.tolerance = admm_tolerance;
  cfg.admm.max_iterations = admm_iterations;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw CliError(kInvalidInput, e.what());
  }
  return cfg;
}

namespace {

void apply_lines(RunConfig& config, const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw CliError(kConfigError, source + ":" + std::to_string(number) + ": expected key=value");
    }
    config.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig config;
  apply_lines(config, text, "config");
  return config;
}

void load_config(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CliError(kConfigError, "cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  apply_lines(config, ss.str(), path.string());
}

std::string dump_config(const RunConfig& c) {
  std::ostringstream o;
  o << "method=" << c.method << '\n'
    << "patch=" << c.patch << '\n'
    << "levels=" << c.levels << '\n'
    << "gamma=" << fmt(c.gamma) << '\n'
    << "lambda=" << fmt(c.lambda) << '\n'
    << "rho0=" << fmt(c.rho0) << '\n'
    << "rho_max=" << fmt(c.rho_max) << '\n'
    << "eta=" << fmt(c.eta) << '\n'
    << "admm_tolerance=" << fmt(c.admm_tolerance) << '\n'
    << "admm_iterations=" << c.admm_iterations << '\n'
    << "max_taylor=" << c.max_taylor << '\n'
    << "outer_tolerance=" << fmt(c.outer_tolerance) << '\n'
    << "sigma2=" << fmt(c.sigma2) << '\n'
    << "seed=" << c.seed << '\n'
    << "eps=" << fmt(c.eps) << '\n'
    << "clusters=" << c.clusters << '\n'
    << "baseline_weight=" << fmt(c.baseline_weight) << '\n'
    << "preset=" << c.preset << '\n'
    << "frames=" << c.frames << '\n'
    << "features=" << c.features << '\n'
    << "input=" << c.input << '\n'
    << "features_file=" << c.features_file << '\n'
    << "tracks=" << c.tracks << '\n'
    << "truth=" << c.truth << '\n'
    << "labels=" << c.labels << '\n'
    << "out=" << c.out << '\n'
    << "overlays=" << (c.overlays ? "true" : "false") << '\n';
  return o.str();
}

}  // namespace mbt::cli
