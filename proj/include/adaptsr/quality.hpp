#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace adaptsr {

/// Row-major grayscale raster with intensities normalized to [0,1].
class GrayImage {
 public:
  GrayImage(std::size_t width, std::size_t height, std::vector<double> pixels);

  static GrayImage filled(std::size_t width, std::size_t height, double value);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t size() const noexcept { return pixels_.size(); }
  std::span<const double> pixels() const noexcept { return pixels_; }
  std::span<const double> row(std::size_t y) const noexcept {
    return std::span<const double>(pixels_).subspan(y * width_, width_);
  }
  double at(std::size_t x, std::size_t y) const noexcept { return pixels_[y * width_ + x]; }

  bool same_shape(const GrayImage& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }
  bool operator==(const GrayImage&) const = default;

 private:
  std::size_t width_;
  std::size_t height_;
  std::vector<double> pixels_;
};

/// Ordered frames of one clip; all frames share the same dimensions.
class Clip {
 public:
  explicit Clip(std::vector<GrayImage> frames, double fps = 30.0);

  std::span<const GrayImage> frames() const noexcept { return frames_; }
  std::size_t size() const noexcept { return frames_.size(); }
  double fps() const noexcept { return fps_; }

 private:
  std::vector<GrayImage> frames_;
  double fps_;
};

inline constexpr std::size_t kMaxPgmPixels = std::size_t{1} << 28;

/// Reads an ASCII (P2) or binary (P5) PGM with maxval <= 65535.
GrayImage load_pgm(const std::filesystem::path& path);
GrayImage parse_pgm(std::string_view bytes);

/// Population variance of the 4-neighbour Laplacian over interior pixels.
double laplacian_variance(const GrayImage& image);
double mean_intensity(const GrayImage& image);
/// Single-window SSIM over global image statistics, dynamic range L = 1.
double ssim(const GrayImage& a, const GrayImage& b);
/// 1 - mean SSIM of consecutive frames, clamped to [0,1].
double temporal_inconsistency(const Clip& clip);

/// min(blur / blur_ref, 1) for a Laplacian-variance reading.
double normalize_blur(double blur, double blur_ref = 0.05);

inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

namespace reference {

// Single-threaded flat-loop versions of the image kernels.
double laplacian_variance(const GrayImage& image);
double mean_intensity(const GrayImage& image);
double ssim(const GrayImage& a, const GrayImage& b);

}  // namespace reference

}  // namespace adaptsr
