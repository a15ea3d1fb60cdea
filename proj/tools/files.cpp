#include "files.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "run_config.hpp"

namespace fs = std::filesystem;

namespace mbt::cli {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    cell.erase(0, cell.find_first_not_of(" \t\r"));
    cell.erase(cell.find_last_not_of(" \t\r") + 1);
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

int parse_int(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used == s.size()) return v;
  } catch (const std::logic_error&) {
  }
  throw CliError(kInvalidInput, where + ": expected an integer, got '" + s + "'");
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::logic_error&) {
  }
  throw CliError(kInvalidInput, where + ": expected a number, got '" + s + "'");
}

struct Csv {
  std::map<std::string, std::size_t> columns;
  std::vector<std::vector<std::string>> rows;
};

Csv read_csv(const fs::path& path) {
  require_file(path, "CSV file");
  std::ifstream in(path);
  if (!in) throw CliError(kMissingInput, "cannot open " + path.string());
  Csv csv;
  std::string line;
  if (!std::getline(in, line)) throw CliError(kInvalidInput, path.string() + ": empty file");
  const auto header = split(line);
  for (std::size_t c = 0; c < header.size(); ++c) csv.columns[header[c]] = c;
  int number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = split(line);
    if (cells.size() != header.size()) {
      throw CliError(kInvalidInput, path.string() + ":" + std::to_string(number) + ": expected " +
                                        std::to_string(header.size()) + " columns");
    }
    csv.rows.push_back(std::move(cells));
  }
  return csv;
}

std::size_t column(const Csv& csv, const std::string& name, const fs::path& path) {
  const auto it = csv.columns.find(name);
  if (it == csv.columns.end()) throw CliError(kInvalidInput, path.string() + ": missing column '" + name + "'");
  return it->second;
}

}  // namespace

std::vector<int> TrackTable::frames() const {
  std::set<int> s;
  for (const auto& r : rows) s.insert(r.frame);
  return {s.begin(), s.end()};
}

std::vector<int> TrackTable::track_ids() const {
  std::set<int> s;
  for (const auto& r : rows) s.insert(r.track_id);
  return {s.begin(), s.end()};
}

const TrackRow* TrackTable::find(int frame, int track_id) const {
  for (const auto& r : rows) {
    if (r.frame == frame && r.track_id == track_id) return &r;
  }
  return nullptr;
}

TrackTable read_tracks(const fs::path& path) {
  const Csv csv = read_csv(path);
  const auto cf = column(csv, "frame", path), ci = column(csv, "track_id", path);
  const auto cx = column(csv, "x", path), cy = column(csv, "y", path);
  TrackTable table;
  table.has_label = csv.columns.count("label") > 0;
  table.has_status = csv.columns.count("status") > 0;
  std::set<std::pair<int, int>> seen;
  for (const auto& cells : csv.rows) {
    const std::string where = path.string();
    TrackRow r;
    r.frame = parse_int(cells[cf], where);
    r.track_id = parse_int(cells[ci], where);
    r.x = parse_double(cells[cx], where);
    r.y = parse_double(cells[cy], where);
    if (table.has_label) r.label = parse_int(cells[csv.columns.at("label")], where);
    if (table.has_status) r.status = cells[csv.columns.at("status")];
    if (!seen.insert({r.frame, r.track_id}).second) {
      throw CliError(kInvalidInput, where + ": duplicate row for frame " + std::to_string(r.frame) + " track " +
                                        std::to_string(r.track_id));
    }
    table.rows.push_back(r);
  }
  return table;
}

std::string format_tracks(const TrackTable& table) {
  std::ostringstream o;
  o << "frame,track_id,x,y";
  if (table.has_label) o << ",label";
  if (table.has_status) o << ",status";
  o << '\n';
  for (const auto& r : table.rows) {
    o << r.frame << ',' << r.track_id << ',' << fixed(r.x) << ',' << fixed(r.y);
    if (table.has_label) o << ',' << r.label.value_or(-1);
    if (table.has_status) o << ',' << r.status;
    o << '\n';
  }
  return o.str();
}

std::vector<LabelRow> read_labels(const fs::path& path) {
  const Csv csv = read_csv(path);
  const auto ci = column(csv, "track_id", path), cl = column(csv, "label", path);
  const bool has_frame = csv.columns.count("frame") > 0;
  std::vector<LabelRow> out;
  for (const auto& cells : csv.rows) {
    LabelRow r;
    if (has_frame) r.frame = parse_int(cells[csv.columns.at("frame")], path.string());
    r.track_id = parse_int(cells[ci], path.string());
    r.label = parse_int(cells[cl], path.string());
    out.push_back(r);
  }
  return out;
}

namespace {

fs::path temp_sibling(const fs::path& path) {
  return path.parent_path() / ("." + path.filename().string() + ".tmp");
}

template <typename Write>
void atomically(const fs::path& path, Write&& write) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = temp_sibling(path);
  try {
    write(tmp);
    fs::rename(tmp, path);
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
}

}  // namespace

void write_atomic(const fs::path& path, const std::string& content) {
  atomically(path, [&](const fs::path& tmp) {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.close();
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  });
}

void save_png_atomic(const GrayImage& img, const fs::path& path) {
  atomically(path, [&](const fs::path& tmp) { save_png(img, tmp); });
}

void save_png_atomic(const RgbImage& img, const fs::path& path) {
  atomically(path, [&](const fs::path& tmp) { save_png(img, tmp); });
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  std::string s = buf;
  if (s == "-0." + std::string(digits, '0')) s.erase(0, 1);
  return s;
}

void require_file(const fs::path& path, const std::string& what) {
  if (path.empty()) throw CliError(kMissingInput, what + " not given");
  if (!fs::is_regular_file(path)) throw CliError(kMissingInput, what + " not found: " + path.string());
}

void require_directory(const fs::path& path, const std::string& what) {
  if (path.empty()) throw CliError(kMissingInput, what + " not given");
  if (!fs::is_directory(path)) throw CliError(kMissingInput, what + " not found: " + path.string());
}

}  // namespace mbt::cli
