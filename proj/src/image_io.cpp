#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <regex>
#include <sstream>
#include <stdexcept>

#include "mbtrack/imaging.hpp"

namespace fs = std::filesystem;

namespace mbt {

namespace {

double luma601(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

// Skips whitespace and '#' comments between PGM header tokens.
std::string next_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

GrayImage load_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const std::string magic = next_token(in);
  if (magic != "P2" && magic != "P5") throw std::runtime_error("unsupported PNM variant in " + path.string());
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(next_token(in));
    h = std::stoi(next_token(in));
    maxval = std::stoi(next_token(in));
  } catch (const std::exception&) {
    throw std::runtime_error("malformed PGM header in " + path.string());
  }
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) {
    throw std::runtime_error("malformed PGM header in " + path.string());
  }
  Raster px(h, w);
  if (magic == "P5") {
    const int bytes = maxval < 256 ? 1 : 2;
    std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h * bytes);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() != static_cast<std::streamsize>(buf.size())) {
      throw std::runtime_error("truncated PGM data in " + path.string());
    }
    for (Eigen::Index i = 0; i < px.size(); ++i) {
      const int v = bytes == 1 ? buf[i] : (buf[2 * i] << 8) | buf[2 * i + 1];
      px.data()[i] = std::min(1.0, static_cast<double>(v) / maxval);
    }
  } else {
    for (Eigen::Index i = 0; i < px.size(); ++i) {
      const std::string tok = next_token(in);
      if (tok.empty()) throw std::runtime_error("truncated PGM data in " + path.string());
      px.data()[i] = std::min(1.0, std::stod(tok) / maxval);
    }
  }
  return GrayImage(std::move(px));
}

struct PngReadGuard {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReadGuard() { png_destroy_read_struct(&png, info ? &info : nullptr, nullptr); }
};

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

GrayImage load_png(const fs::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("cannot open " + path.string());
  PngReadGuard g;
  g.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!g.png) throw std::runtime_error("libpng init failed");
  g.info = png_create_info_struct(g.png);
  if (!g.info) throw std::runtime_error("libpng init failed");
  if (setjmp(png_jmpbuf(g.png))) throw std::runtime_error("corrupt PNG " + path.string());
  png_init_io(g.png, fp.get());
  png_read_info(g.png, g.info);

  png_set_strip_16(g.png);
  png_set_packing(g.png);
  const int color = png_get_color_type(g.png, g.info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(g.png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(g.png, g.info) < 8) {
    png_set_expand_gray_1_2_4_to_8(g.png);
  }
  png_set_strip_alpha(g.png);
  png_read_update_info(g.png, g.info);

  const int w = static_cast<int>(png_get_image_width(g.png, g.info));
  const int h = static_cast<int>(png_get_image_height(g.png, g.info));
  const int channels = png_get_channels(g.png, g.info);
  const std::size_t stride = png_get_rowbytes(g.png, g.info);
  std::vector<png_byte> buf(stride * h);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) rows[y] = buf.data() + y * stride;
  png_read_image(g.png, rows.data());

  Raster px(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const png_byte* p = rows[y] + x * channels;
      px(y, x) = channels >= 3 ? luma601(p[0], p[1], p[2]) / 255.0 : p[0] / 255.0;
    }
  }
  return GrayImage(Raster(px.cwiseMin(1.0)));
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

void write_png(const fs::path& path, int w, int h, int color_type, const std::uint8_t* data,
               int channels) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("failed writing " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, w, h, 8, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < h; ++y) {
    png_write_row(png, const_cast<png_bytep>(data + static_cast<std::size_t>(y) * w * channels));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

GrayImage load_image(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  unsigned char head[8] = {};
  in.read(reinterpret_cast<char*>(head), 8);
  const auto got = in.gcount();
  in.close();
  static constexpr unsigned char kPngSig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  if (got == 8 && std::equal(head, head + 8, kPngSig)) return load_png(path);
  if (got >= 2 && head[0] == 'P' && (head[1] == '2' || head[1] == '5')) return load_pgm(path);
  throw std::runtime_error("unsupported image format: " + path.string());
}

void save_pgm(const GrayImage& img, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<char> buf(static_cast<std::size_t>(img.width()) * img.height());
  for (Eigen::Index i = 0; i < img.pixels().size(); ++i) {
    buf[i] = static_cast<char>(to_byte(img.pixels().data()[i]));
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void save_png(const GrayImage& img, const fs::path& path) {
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(img.width()) * img.height());
  for (Eigen::Index i = 0; i < img.pixels().size(); ++i) buf[i] = to_byte(img.pixels().data()[i]);
  write_png(path, img.width(), img.height(), PNG_COLOR_TYPE_GRAY, buf.data(), 1);
}

void save_png(const RgbImage& img, const fs::path& path) {
  write_png(path, img.width, img.height, PNG_COLOR_TYPE_RGB, img.data.data(), 3);
}

RgbImage RgbImage::from_gray(const GrayImage& img) {
  RgbImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const auto v = to_byte(img(x, y));
      out.set(x, y, v, v, v);
    }
  }
  return out;
}

void RgbImage::set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  if (x < 0 || y < 0 || x >= width || y >= height) return;
  auto* p = &data[(static_cast<std::size_t>(y) * width + x) * 3];
  p[0] = r;
  p[1] = g;
  p[2] = b;
}

std::string frame_filename(int index, const std::string& extension) {
  char name[32];
  std::snprintf(name, sizeof(name), "frame_%06d", index);
  return std::string(name) + "." + extension;
}

std::vector<fs::path> list_sequence(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a sequence directory: " + dir.string());
  static const std::regex kFrame(R"(frame_(\d{6})\.(pgm|png))");
  std::vector<std::pair<int, fs::path>> found;
  std::string ext;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (!std::regex_match(name, m, kFrame)) continue;
    if (ext.empty()) ext = m[2];
    if (m[2] != ext) throw std::runtime_error("mixed frame extensions in " + dir.string());
    found.emplace_back(std::stoi(m[1]), entry.path());
  }
  std::sort(found.begin(), found.end());
  std::vector<fs::path> out;
  for (auto& [idx, p] : found) out.push_back(std::move(p));
  return out;
}

std::vector<GrayImage> load_sequence(const fs::path& dir) {
  std::vector<GrayImage> frames;
  for (const auto& p : list_sequence(dir)) frames.push_back(load_image(p));
  return frames;
}

}  // namespace mbt
