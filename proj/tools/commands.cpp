#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "mbtrack/epipolar.hpp"
#include "mbtrack/segmentation.hpp"
#include "mbtrack/synthlab.hpp"
#include "mbtrack/tracker.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mbt::cli {

namespace {

constexpr const char* kTruthFile = "truth.csv";
constexpr const char* kLabelsFile = "labels.csv";
constexpr const char* kMetaFile = "meta.json";
constexpr const char* kFundamentalsFile = "fundamentals.json";

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw CliError(kMissingInput, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw CliError(kInvalidInput, path.string() + ": " + e.what());
  }
}

int frame_index(const fs::path& p) { return std::stoi(p.stem().string().substr(6)); }

struct Sequence {
  std::vector<GrayImage> frames;
  std::vector<int> indices;
};

Sequence load_input_sequence(const RunConfig& config) {
  require_directory(config.input, "sequence directory");
  Sequence seq;
  try {
    for (const auto& p : list_sequence(config.input)) {
      seq.frames.push_back(load_image(p));
      seq.indices.push_back(frame_index(p));
    }
  } catch (const std::runtime_error& e) {
    throw CliError(kInvalidInput, e.what());
  }
  if (seq.frames.empty()) throw CliError(kMissingInput, "no frames in " + config.input);
  return seq;
}

/// Initial features: rows of the first frame of the feature CSV, by increasing track id.
struct Initial {
  std::vector<int> ids;
  std::vector<std::optional<int>> labels;
  FeatureSet features;
};

Initial load_initial(const RunConfig& config, int half_size) {
  const fs::path path =
      config.features_file.empty() ? fs::path(config.input) / kTruthFile : fs::path(config.features_file);
  const TrackTable table = read_tracks(path);
  const auto frames = table.frames();
  if (frames.empty()) throw CliError(kInvalidInput, path.string() + ": no feature rows");
  std::vector<const TrackRow*> rows;
  for (const auto& r : table.rows) {
    if (r.frame == frames.front()) rows.push_back(&r);
  }
  std::sort(rows.begin(), rows.end(), [](const TrackRow* a, const TrackRow* b) { return a->track_id < b->track_id; });
  Initial init;
  Eigen::Matrix2Xd centers(2, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    init.ids.push_back(rows[k]->track_id);
    init.labels.push_back(rows[k]->label);
    centers.col(static_cast<Eigen::Index>(k)) = Eigen::Vector2d(rows[k]->x, rows[k]->y);
  }
  init.features = FeatureSet(centers, half_size);
  return init;
}

std::vector<TrackResult> run_tracker(const Sequence& seq, const Initial& init, const TrackerConfig& cfg) {
  if (seq.frames.size() < 2) throw CliError(kInvalidInput, "need at least two frames");
  for (const auto& f : seq.frames) {
    if (f.width() != seq.frames.front().width() || f.height() != seq.frames.front().height()) {
      throw CliError(kInvalidInput, "frames differ in size");
    }
  }
  return track_sequence(seq.frames, init.features, cfg);
}

void draw_line(RgbImage& img, Eigen::Vector2d a, Eigen::Vector2d b, std::uint8_t r, std::uint8_t g, std::uint8_t bl) {
  const int steps = std::max(1, static_cast<int>(std::ceil(2.0 * (b - a).norm())));
  for (int k = 0; k <= steps; ++k) {
    const Eigen::Vector2d p = a + (b - a) * (static_cast<double>(k) / steps);
    const int x = static_cast<int>(std::lround(p.x())), y = static_cast<int>(std::lround(p.y()));
    if (x >= 0 && y >= 0 && x < img.width && y < img.height) img.set(x, y, r, g, bl);
  }
}

void draw_point(RgbImage& img, const Eigen::Vector2d& p) {
  const int cx = static_cast<int>(std::lround(p.x())), cy = static_cast<int>(std::lround(p.y()));
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      const int x = cx + dx, y = cy + dy;
      if (x >= 0 && y >= 0 && x < img.width && y < img.height) img.set(x, y, 255, 0, 0);
    }
  }
}

json matrix_json(const Eigen::Matrix3d& M) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) rows.push_back({M(r, 0), M(r, 1), M(r, 2)});
  return rows;
}

}  // namespace

void cmd_synth(const RunConfig& config, std::ostream& log) {
  const auto names = synth::preset_names();
  if (std::find(names.begin(), names.end(), config.preset) == names.end()) {
    throw CliError(kInvalidInput, "unknown preset '" + config.preset + "'");
  }
  if (config.frames < 1 || config.features < 1) throw CliError(kInvalidInput, "frames and features must be positive");
  if (config.sigma2 < 0.0) throw CliError(kInvalidInput, "sigma2 must be non-negative");
  synth::SyntheticSequence seq =
      synth::make_preset(config.preset, config.seed, {config.frames, config.features});
  if (config.sigma2 > 0.0) synth::add_noise(seq, config.sigma2, config.seed);

  const fs::path out = config.out;
  fs::create_directories(out);
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    save_png_atomic(seq.frames[t], out / frame_filename(static_cast<int>(t), "png"));
  }

  TrackTable truth;
  truth.has_label = truth.has_status = true;
  std::ostringstream labels;
  labels << "track_id,label\n";
  for (int i = 0; i < seq.features(); ++i) labels << i << ',' << seq.labels[i] << '\n';
  for (std::size_t t = 0; t < seq.tracks.size(); ++t) {
    for (int i = 0; i < seq.features(); ++i) {
      truth.rows.push_back({static_cast<int>(t), i, seq.tracks[t](0, i), seq.tracks[t](1, i), seq.labels[i],
                            seq.occluded[t][i] ? "occluded" : "visible"});
    }
  }
  write_atomic(out / kTruthFile, format_tracks(truth));
  write_atomic(out / kLabelsFile, labels.str());

  json pairs = json::array();
  for (std::size_t t = 0; t < seq.fundamentals.size(); ++t) {
    json bodies = json::array();
    for (std::size_t b = 0; b < seq.fundamentals[t].size(); ++b) {
      const auto& F = seq.fundamentals[t][b];
      bodies.push_back(F ? json{{"label", b}, {"F", matrix_json(F->F)}} : json{{"label", b}, {"F", nullptr}});
    }
    pairs.push_back({{"from", t}, {"to", t + 1}, {"bodies", bodies}});
  }
  write_atomic(out / kFundamentalsFile, dump({{"pairs", pairs}}));

  const int bodies = seq.labels.empty() ? 0 : *std::max_element(seq.labels.begin(), seq.labels.end()) + 1;
  json meta = {{"preset", seq.preset},
               {"seed", config.seed},
               {"sigma2", config.sigma2},
               {"frames", seq.frames.size()},
               {"features", seq.features()},
               {"bodies", bodies},
               {"repetitive", seq.repetitive},
               {"eps_eval", seq.repetitive ? 10.0 : 5.0},
               {"camera",
                {{"focal", seq.camera.focal},
                 {"cx", seq.camera.cx},
                 {"cy", seq.camera.cy},
                 {"width", seq.camera.width},
                 {"height", seq.camera.height}}}};
  write_atomic(out / kMetaFile, dump(meta));
  log << "synth: wrote " << seq.frames.size() << " frames, " << seq.features() << " tracks to " << out.string()
      << "\n";
}

void cmd_noise(const RunConfig& config, std::ostream& log) {
  if (config.sigma2 < 0.0) throw CliError(kInvalidInput, "sigma2 must be non-negative");
  const Sequence seq = load_input_sequence(config);
  const fs::path in = config.input, out = config.out;
  if (fs::exists(out) && fs::equivalent(in, out)) throw CliError(kInvalidInput, "output must differ from input");
  fs::create_directories(out);
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    const GrayImage noisy = add_gaussian_noise(seq.frames[t], config.sigma2, derive_seed(config.seed, t));
    save_png_atomic(noisy, out / frame_filename(seq.indices[t], "png"));
  }
  for (const char* name : {kTruthFile, kLabelsFile, kFundamentalsFile}) {
    if (fs::is_regular_file(in / name)) {
      std::ifstream src(in / name, std::ios::binary);
      std::ostringstream content;
      content << src.rdbuf();
      write_atomic(out / name, content.str());
    }
  }
  json meta = fs::is_regular_file(in / kMetaFile) ? read_json(in / kMetaFile) : json::object();
  meta["noise"] = {{"sigma2", config.sigma2}, {"seed", config.seed}};
  write_atomic(out / kMetaFile, dump(meta));
  log << "noise: wrote " << seq.frames.size() << " frames with sigma2 " << config.sigma2 << " to " << out.string()
      << "\n";
}

void cmd_track(const RunConfig& config, std::ostream& log) {
  const TrackerConfig cfg = config.tracker();
  const Sequence seq = load_input_sequence(config);
  const Initial init = load_initial(config, cfg.half_size);
  const auto results = run_tracker(seq, init, cfg);
  const auto pos = positions(init.features, results);
  const int n = init.features.size();
  const fs::path out = config.out;
  fs::create_directories(out);

  TrackTable tracks;
  tracks.has_status = true;
  std::vector<TrackStatus> status(n, TrackStatus::tracked);
  for (std::size_t t = 0; t < pos.size(); ++t) {
    if (t > 0) {
      for (int i = 0; i < n; ++i) status[i] = results[t - 1].status[i];
    }
    for (int i = 0; i < n; ++i) {
      tracks.rows.push_back({seq.indices[t], init.ids[i], pos[t](0, i), pos[t](1, i), std::nullopt, to_string(status[i])});
    }
  }
  write_atomic(out / "tracks.csv", format_tracks(tracks));

  std::ostringstream diag;
  diag << "frame,level,taylor_iteration,iteration,residual_m,residual_w,residual_z,objective,rho\n";
  for (std::size_t t = 0; t < results.size(); ++t) {
    for (const auto& solve : results[t].solves) {
      for (const auto& it : solve.history) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "%d,%d,%d,%d,%.9e,%.9e,%.9e,%.9e,%.9e\n", seq.indices[t + 1], solve.level,
                      solve.taylor_iteration, it.iteration, it.residuals.m, it.residuals.w, it.residuals.z,
                      it.objective, it.rho);
        diag << buf;
      }
    }
  }
  write_atomic(out / "diagnostics.csv", diag.str());

  if (config.overlays) {
    for (std::size_t t = 0; t < pos.size(); ++t) {
      RgbImage img = RgbImage::from_gray(seq.frames[t]);
      for (int i = 0; i < n; ++i) {
        for (std::size_t k = 1; k <= t; ++k) draw_line(img, pos[k - 1].col(i), pos[k].col(i), 0, 255, 0);
      }
      for (int i = 0; i < n; ++i) draw_point(img, pos[t].col(i));
      save_png_atomic(img, out / "overlays" / frame_filename(seq.indices[t], "png"));
    }
  }
  int lost = 0;
  for (TrackStatus s : status) lost += s == TrackStatus::lost;
  log << "track: " << to_string(cfg.method) << ", " << n << " features over " << seq.frames.size() << " frames, "
      << lost << " lost\n";
}

EvalReport evaluate(const TrackTable& tracks, const TrackTable& truth, double eps) {
  if (tracks.track_ids() != truth.track_ids()) throw CliError(kInvalidInput, "track ids differ between tracks and truth");
  const auto frames = tracks.frames();
  if (frames != truth.frames()) throw CliError(kInvalidInput, "frames differ between tracks and truth");
  std::map<std::pair<int, int>, const TrackRow*> gt;
  for (const auto& r : truth.rows) gt[{r.frame, r.track_id}] = &r;
  std::map<std::pair<int, int>, const TrackRow*> est;
  for (const auto& r : tracks.rows) est[{r.frame, r.track_id}] = &r;

  EvalReport report;
  report.eps = eps;
  const auto ids = tracks.track_ids();
  report.features = static_cast<int>(ids.size());
  std::map<int, bool> lost;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    int errors = 0, counted = 0;
    double drift = 0.0;
    for (int id : ids) {
      const auto e = est.find({frames[f], id});
      const auto g = gt.find({frames[f], id});
      if (e == est.end() || g == gt.end()) {
        throw CliError(kInvalidInput, "missing row for frame " + std::to_string(frames[f]) + " track " + std::to_string(id));
      }
      if (e->second->status == "lost") lost[id] = true;
      if (f == 0) continue;
      if (g->second->status == "occluded") {
        ++report.excluded;
        continue;
      }
      const double d = std::hypot(e->second->x - g->second->x, e->second->y - g->second->y);
      if (lost[id] || d > eps) ++errors;
      if (!lost[id]) {
        drift += d;
        ++counted;
      }
    }
    if (f == 0) continue;
    report.frames.push_back(frames[f]);
    report.errors.push_back(errors);
    report.mean_drift.push_back(counted > 0 ? drift / counted : 0.0);
  }
  if (!report.frames.empty()) {
    double e = 0.0, d = 0.0;
    for (std::size_t k = 0; k < report.frames.size(); ++k) {
      e += report.errors[k];
      d += report.mean_drift[k];
    }
    report.average_errors = e / static_cast<double>(report.frames.size());
    report.average_drift = d / static_cast<double>(report.frames.size());
  }
  return report;
}

json to_json(const EvalReport& r) {
  json per_frame = json::array();
  for (std::size_t k = 0; k < r.frames.size(); ++k) {
    per_frame.push_back({{"frame", r.frames[k]}, {"errors", r.errors[k]}, {"mean_drift", r.mean_drift[k]}});
  }
  json j = {{"eps", r.eps},
            {"sigma2", r.sigma2},
            {"features", r.features},
            {"excluded_occluded", r.excluded},
            {"average_errors", r.average_errors},
            {"average_drift", r.average_drift},
            {"per_frame", per_frame}};
  j["segmentation_error"] = r.segmentation_error ? json(*r.segmentation_error) : json(nullptr);
  return j;
}

EvalReport cmd_eval(const RunConfig& config, std::ostream& log) {
  if (!(config.eps >= 0.0)) throw CliError(kInvalidInput, "eps must be non-negative");
  const TrackTable tracks = read_tracks(config.tracks);
  const TrackTable truth = read_tracks(config.truth);
  EvalReport report = evaluate(tracks, truth, config.eps);
  report.sigma2 = config.sigma2;

  if (!config.labels.empty()) {
    if (!truth.has_label) throw CliError(kInvalidInput, "truth has no label column");
    std::map<int, int> truth_label;
    for (const auto& r : truth.rows) truth_label[r.track_id] = r.label.value_or(-1);
    std::map<int, std::pair<std::vector<int>, std::vector<int>>> by_frame;
    for (const auto& l : read_labels(config.labels)) {
      const auto it = truth_label.find(l.track_id);
      if (it == truth_label.end()) throw CliError(kInvalidInput, "label for unknown track " + std::to_string(l.track_id));
      by_frame[l.frame].first.push_back(l.label);
      by_frame[l.frame].second.push_back(it->second);
    }
    double total = 0.0;
    for (const auto& [frame, lt] : by_frame) total += segmentation_error(lt.first, lt.second);
    report.segmentation_error = by_frame.empty() ? 0.0 : total / static_cast<double>(by_frame.size());
  }

  const fs::path out = config.out;
  fs::create_directories(out);
  std::ostringstream csv;
  csv << "frame,errors,mean_drift\n";
  for (std::size_t k = 0; k < report.frames.size(); ++k) {
    csv << report.frames[k] << ',' << report.errors[k] << ',' << fixed(report.mean_drift[k]) << '\n';
  }
  write_atomic(out / "eval_frames.csv", csv.str());
  write_atomic(out / "report.json", dump(to_json(report)));

  log << "frame  errors  mean_drift\n";
  for (std::size_t k = 0; k < report.frames.size(); ++k) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%5d  %6d  %10.4f\n", report.frames[k], report.errors[k], report.mean_drift[k]);
    log << buf;
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "average errors %.4f (eps %.3g px), average drift %.4f px\n", report.average_errors,
                report.eps, report.average_drift);
  log << buf;
  if (report.segmentation_error) log << "segmentation error " << fixed(*report.segmentation_error, 4) << "\n";
  return report;
}

void cmd_segment(const RunConfig& config, std::ostream& log) {
  TrackerConfig cfg = config.tracker();
  cfg.method = Method::multibody;
  const Sequence seq = load_input_sequence(config);
  const Initial init = load_initial(config, cfg.half_size);
  const int n = init.features.size();
  const int K = config.clusters;
  if (K < 1) throw CliError(kInvalidInput, "clusters must be >= 1");
  if (K > n) throw CliError(kInvalidInput, "clusters (" + std::to_string(K) + ") exceed features (" + std::to_string(n) + ")");
  if (!(config.baseline_weight > 0.0)) throw CliError(kInvalidInput, "baseline_weight must be positive");
  const bool has_truth = std::all_of(init.labels.begin(), init.labels.end(), [](const auto& l) { return l.has_value(); });

  const auto results = run_tracker(seq, init, cfg);
  TrackerConfig klt_cfg = cfg;
  klt_cfg.method = Method::klt;
  const auto klt_results = run_tracker(seq, init, klt_cfg);
  const auto klt_pos = positions(init.features, klt_results);

  ClusteringOptions opts;
  opts.seed = config.seed;
  std::ostringstream labels_csv;
  labels_csv << "frame,track_id,label\n";
  json pairs = json::array();
  double total = 0.0, total_baseline = 0.0;
  int scored = 0;
  std::vector<bool> klt_lost(n, false);
  for (std::size_t t = 0; t < results.size(); ++t) {
    for (int i = 0; i < n; ++i) klt_lost[i] = klt_lost[i] || klt_results[t].status[i] == TrackStatus::lost;
    const auto& r = results[t];
    json pair = {{"frame", seq.indices[t + 1]}, {"features", r.active.size()}};
    if (static_cast<int>(r.active.size()) < K || r.C.size() == 0) {
      pair["error"] = nullptr;
      pair["baseline_error"] = nullptr;
      pairs.push_back(pair);
      continue;
    }
    const auto labels = spectral_cluster(affinity_from_C(r.C), K, opts);
    for (std::size_t k = 0; k < r.active.size(); ++k) {
      labels_csv << seq.indices[t + 1] << ',' << init.ids[r.active[k]] << ',' << labels[k] << '\n';
    }
    if (!has_truth) {
      pairs.push_back(pair);
      continue;
    }
    std::vector<int> truth;
    for (int a : r.active) truth.push_back(*init.labels[a]);
    const double err = segmentation_error(labels, truth);
    pair["error"] = err;

    // Two-step baseline on the same features: KLT tracks, fixed embedding, least-squares self-expression.
    std::vector<int> common;
    for (int a : r.active) {
      if (!klt_lost[a]) common.push_back(a);
    }
    if (static_cast<int>(common.size()) >= K) {
      Eigen::Matrix2Xd from(2, common.size()), to(2, common.size());
      std::vector<int> common_truth;
      for (std::size_t k = 0; k < common.size(); ++k) {
        from.col(k) = klt_pos[t].col(common[k]);
        to.col(k) = klt_pos[t + 1].col(common[k]);
        common_truth.push_back(*init.labels[common[k]]);
      }
      const NormalizedFeatures nf = normalize_coords(FeatureSet(from, cfg.half_size));
      Eigen::Matrix2Xd to_n(2, to.cols());
      for (Eigen::Index k = 0; k < to.cols(); ++k) to_n.col(k) = nf.transform.apply(to.col(k));
      const Eigen::MatrixXd W = embedding_matrix(nf.features.centers, to_n);
      const Eigen::MatrixXd Cb = fixed_w_self_expression(W, config.baseline_weight);
      const double berr = segmentation_error(spectral_cluster(affinity_from_C(Cb), K, opts), common_truth);
      pair["baseline_error"] = berr;
      total_baseline += berr;
    } else {
      pair["baseline_error"] = nullptr;
    }
    total += err;
    ++scored;
    pairs.push_back(pair);
  }

  const fs::path out = config.out;
  fs::create_directories(out);
  write_atomic(out / kLabelsFile, labels_csv.str());
  json report = {{"clusters", K}, {"pairs", pairs}};
  report["average_error"] = scored > 0 ? json(total / scored) : json(nullptr);
  report["average_baseline_error"] = scored > 0 ? json(total_baseline / scored) : json(nullptr);
  write_atomic(out / "report.json", dump(report));
  log << "segment: " << results.size() << " frame pairs, K = " << K;
  if (scored > 0) {
    log << ", average error " << fixed(total / scored, 4) << " (fixed-W baseline " << fixed(total_baseline / scored, 4)
        << ")";
  }
  log << "\n";
}

}  // namespace mbt::cli
