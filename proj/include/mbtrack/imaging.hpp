#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace mbt {

/// Row-major raster; rows index y, columns index x.
using Raster = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Grayscale image with intensities normalized to [0,1].
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, double fill = 0.0);

  /// Takes ownership of `pixels`; throws std::invalid_argument if any value is outside [0,1].
  explicit GrayImage(Raster pixels);

  int width() const { return static_cast<int>(pixels_.cols()); }
  int height() const { return static_cast<int>(pixels_.rows()); }
  bool empty() const { return pixels_.size() == 0; }

  double operator()(int x, int y) const { return pixels_(y, x); }
  const Raster& pixels() const { return pixels_; }

  bool operator==(const GrayImage& other) const = default;

 private:
  Raster pixels_;
};

/// Multi-resolution stack; level 0 is the input, each further level halves both sides.
struct Pyramid {
  std::vector<GrayImage> levels;

  int size() const { return static_cast<int>(levels.size()); }
  const GrayImage& operator[](int level) const { return levels.at(level); }
};

struct GradientField {
  Raster gx;
  Raster gy;
};

struct BilinearSample {
  double value = 0.0;
  bool clamped = false;
};

/// One 2x decimation step: separable [1 4 6 4 1]/16 low-pass, replicate border.
GrayImage downsample(const GrayImage& img);

/// Builds `levels` levels. `min_side`, when positive, is the smallest side allowed at the
/// coarsest level (callers pass twice the patch size).
Pyramid build_pyramid(const GrayImage& img, int levels, int min_side = 0);

/// Bilinear interpolation of a raster at (x, y). Coordinates outside the raster are clamped to
/// the border and the sample is flagged.
BilinearSample sample_bilinear(const Raster& raster, double x, double y);

inline BilinearSample sample_bilinear(const GrayImage& img, double x, double y) {
  return sample_bilinear(img.pixels(), x, y);
}

/// Central differences with replicated borders. Requires at least 3x3 pixels.
GradientField gradient(const GrayImage& img);

/// Unclamped i.i.d. Gaussian noise raster of the given variance.
Raster noise_field(int width, int height, double variance, std::uint64_t seed);

/// Adds Gaussian noise of variance `variance` and clamps back to [0,1]. Deterministic in `seed`.
GrayImage add_gaussian_noise(const GrayImage& img, double variance, std::uint64_t seed);

/// Per-frame seed derived from a sequence seed (splitmix64 mix).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// ---------------------------------------------------------------------------
// File IO

/// 8-bit RGB raster used for overlays.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // interleaved RGB, row-major

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0) {}
  static RgbImage from_gray(const GrayImage& img);
  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b);
};

/// Reads PGM (P2/P5) or PNG (gray, gray+alpha, RGB, RGBA, palette). Color is converted with
/// Rec.601 luma weights. Throws std::runtime_error on unreadable or unsupported files.
GrayImage load_image(const std::filesystem::path& path);

void save_pgm(const GrayImage& img, const std::filesystem::path& path);
void save_png(const GrayImage& img, const std::filesystem::path& path);
void save_png(const RgbImage& img, const std::filesystem::path& path);

/// Frames of a sequence directory (`frame_%06d.<ext>`), sorted by index.
std::vector<std::filesystem::path> list_sequence(const std::filesystem::path& dir);
std::vector<GrayImage> load_sequence(const std::filesystem::path& dir);
std::string frame_filename(int index, const std::string& extension);

}  // namespace mbt
