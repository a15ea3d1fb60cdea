#include "mbtrack/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace mbt {

GrayImage::GrayImage(int width, int height, double fill) {
  if (width < 0 || height < 0) throw std::invalid_argument("GrayImage: negative size");
  if (fill < 0.0 || fill > 1.0) throw std::invalid_argument("GrayImage: fill outside [0,1]");
  pixels_ = Raster::Constant(height, width, fill);
}

GrayImage::GrayImage(Raster pixels) : pixels_(std::move(pixels)) {
  if (pixels_.size() > 0 && (pixels_.minCoeff() < 0.0 || pixels_.maxCoeff() > 1.0 ||
                             !pixels_.allFinite())) {
    throw std::invalid_argument("GrayImage: intensities must lie in [0,1]");
  }
}

namespace {

// [1 4 6 4 1]/16 as four cascaded two-tap averages. Each average maps (c, c) to c exactly,
// so constant regions survive the filter bit for bit.
std::vector<double> binomial5(const std::vector<double>& line) {
  const int n = static_cast<int>(line.size());
  std::vector<double> padded(n + 4);
  for (int i = 0; i < n + 4; ++i) padded[i] = line[std::clamp(i - 2, 0, n - 1)];
  for (int pass = 0; pass < 4; ++pass) {
    for (std::size_t i = 0; i + 1 < padded.size(); ++i) padded[i] = 0.5 * (padded[i] + padded[i + 1]);
    padded.pop_back();
  }
  return padded;
}

}  // namespace

GrayImage downsample(const GrayImage& img) {
  const int w = img.width();
  const int h = img.height();
  const int w2 = w / 2;
  const int h2 = h / 2;
  if (w2 < 1 || h2 < 1) throw std::invalid_argument("downsample: image too small");

  Raster rows(h, w);
  std::vector<double> line(w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) line[x] = img(x, y);
    const auto f = binomial5(line);
    for (int x = 0; x < w; ++x) rows(y, x) = f[x];
  }
  Raster out(h2, w2);
  std::vector<double> column(h);
  for (int x2 = 0; x2 < w2; ++x2) {
    for (int y = 0; y < h; ++y) column[y] = rows(y, 2 * x2);
    const auto f = binomial5(column);
    for (int y2 = 0; y2 < h2; ++y2) out(y2, x2) = f[2 * y2];
  }
  return GrayImage(std::move(out));
}

Pyramid build_pyramid(const GrayImage& img, int levels, int min_side) {
  if (levels < 1) throw std::invalid_argument("build_pyramid: level count must be >= 1");
  if (img.empty()) throw std::invalid_argument("build_pyramid: empty image");
  const int scale = 1 << (levels - 1);
  const int coarse_w = img.width() / scale;
  const int coarse_h = img.height() / scale;
  if (coarse_w < std::max(1, min_side) || coarse_h < std::max(1, min_side)) {
    throw std::invalid_argument("build_pyramid: too many levels for a " +
                                std::to_string(img.width()) + "x" +
                                std::to_string(img.height()) + " image");
  }
  Pyramid p;
  p.levels.reserve(levels);
  p.levels.push_back(img);
  for (int l = 1; l < levels; ++l) p.levels.push_back(downsample(p.levels.back()));
  return p;
}

BilinearSample sample_bilinear(const Raster& raster, double x, double y) {
  const double max_x = static_cast<double>(raster.cols() - 1);
  const double max_y = static_cast<double>(raster.rows() - 1);
  BilinearSample s;
  if (!(x >= 0.0 && x <= max_x && y >= 0.0 && y <= max_y)) {
    s.clamped = true;
    x = std::isfinite(x) ? std::clamp(x, 0.0, max_x) : 0.0;
    y = std::isfinite(y) ? std::clamp(y, 0.0, max_y) : 0.0;
  }
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min<int>(x0 + 1, static_cast<int>(max_x));
  const int y1 = std::min<int>(y0 + 1, static_cast<int>(max_y));
  const double ax = x - x0;
  const double ay = y - y0;
  const double top = (1.0 - ax) * raster(y0, x0) + ax * raster(y0, x1);
  const double bottom = (1.0 - ax) * raster(y1, x0) + ax * raster(y1, x1);
  s.value = (1.0 - ay) * top + ay * bottom;
  return s;
}

GradientField gradient(const GrayImage& img) {
  const int w = img.width();
  const int h = img.height();
  if (w < 3 || h < 3) throw std::invalid_argument("gradient: image must be at least 3x3");
  GradientField g{Raster(h, w), Raster(h, w)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      g.gx(y, x) = 0.5 * (img(std::min(x + 1, w - 1), y) - img(std::max(x - 1, 0), y));
      g.gy(y, x) = 0.5 * (img(x, std::min(y + 1, h - 1)) - img(x, std::max(y - 1, 0)));
    }
  }
  return g;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Raster noise_field(int width, int height, double variance, std::uint64_t seed) {
  if (variance < 0.0 || !std::isfinite(variance)) {
    throw std::invalid_argument("noise: variance must be a non-negative number");
  }
  Raster n = Raster::Zero(height, width);
  if (variance == 0.0) return n;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, std::sqrt(variance));
  for (Eigen::Index i = 0; i < n.size(); ++i) n.data()[i] = dist(rng);
  return n;
}

GrayImage add_gaussian_noise(const GrayImage& img, double variance, std::uint64_t seed) {
  const Raster n = noise_field(img.width(), img.height(), variance, seed);
  if (variance == 0.0) return img;
  return GrayImage(Raster((img.pixels() + n).cwiseMax(0.0).cwiseMin(1.0)));
}

}  // namespace mbt
