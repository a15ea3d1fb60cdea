#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mbtrack/imaging.hpp"

namespace mbt::cli {

/// One row of a tracks or truth CSV: `frame,track_id,x,y[,label][,status]`.
struct TrackRow {
  int frame = 0;
  int track_id = 0;
  double x = 0.0;
  double y = 0.0;
  std::optional<int> label;
  std::string status;  // empty when the column is absent
};

struct TrackTable {
  bool has_label = false;
  bool has_status = false;
  std::vector<TrackRow> rows;

  std::vector<int> frames() const;     // sorted, unique
  std::vector<int> track_ids() const;  // sorted, unique
  /// Row for (frame, id) or nullptr.
  const TrackRow* find(int frame, int track_id) const;
};

/// Throws CliError(kMissingInput) when the file is absent and kInvalidInput when malformed.
TrackTable read_tracks(const std::filesystem::path& path);
std::string format_tracks(const TrackTable& table);

/// `track_id,label` or `frame,track_id,label` rows.
struct LabelRow {
  int frame = -1;  // -1 when the file has no frame column
  int track_id = 0;
  int label = 0;
};
std::vector<LabelRow> read_labels(const std::filesystem::path& path);

/// Writes to a sibling temporary file, then renames over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& content);
void save_png_atomic(const GrayImage& img, const std::filesystem::path& path);
void save_png_atomic(const RgbImage& img, const std::filesystem::path& path);

std::string fixed(double v, int digits = 6);

void require_file(const std::filesystem::path& path, const std::string& what);
void require_directory(const std::filesystem::path& path, const std::string& what);

}  // namespace mbt::cli
