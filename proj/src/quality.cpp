#include "adaptsr/quality.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>
#include <string>

#include "adaptsr/error.hpp"

namespace adaptsr {

namespace {

// Row-parallel kernels only pay off once the image is a few thousand pixels.
constexpr std::size_t kParallelPixelThreshold = 1 << 14;

double ordered_sum(const std::vector<double>& partials) {
  return std::accumulate(partials.begin(), partials.end(), 0.0);
}

double laplacian_at(const GrayImage& img, std::size_t x, std::size_t y) {
  return img.at(x, y - 1) + img.at(x - 1, y) + img.at(x + 1, y) + img.at(x, y + 1) -
         4.0 * img.at(x, y);
}

void require_laplacian_size(const GrayImage& image) {
  if (image.width() < 3 || image.height() < 3) {
    throw Error(Errc::image_too_small, "Laplacian needs at least 3x3 pixels");
  }
}

void require_same_shape(const GrayImage& a, const GrayImage& b) {
  if (!a.same_shape(b)) {
    throw Error(Errc::dimension_mismatch,
                std::to_string(a.width()) + "x" + std::to_string(a.height()) + " vs " +
                    std::to_string(b.width()) + "x" + std::to_string(b.height()));
  }
}

double ssim_from_moments(double mean_a, double mean_b, double var_a, double var_b, double cov) {
  // Products are formed symmetrically so ssim(a, b) == ssim(b, a) bit for bit.
  const double num = (2.0 * (mean_a * mean_b) + kSsimC1) * (2.0 * cov + kSsimC2);
  const double den = (mean_a * mean_a + mean_b * mean_b + kSsimC1) * (var_a + var_b + kSsimC2);
  return num / den;
}

}  // namespace

GrayImage::GrayImage(std::size_t width, std::size_t height, std::vector<double> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width == 0 || height == 0) {
    throw Error(Errc::invalid_argument, "image dimensions must be positive");
  }
  if (pixels_.size() != width * height) {
    throw Error(Errc::dimension_mismatch, "pixel count does not match width x height");
  }
  for (double v : pixels_) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw Error(Errc::invalid_argument, "pixel values must lie in [0,1]");
    }
  }
}

GrayImage GrayImage::filled(std::size_t width, std::size_t height, double value) {
  return GrayImage(width, height, std::vector<double>(width * height, value));
}

Clip::Clip(std::vector<GrayImage> frames, double fps) : frames_(std::move(frames)), fps_(fps) {
  if (frames_.empty()) throw Error(Errc::too_few_frames, "clip needs at least one frame");
  if (!(fps > 0.0)) throw Error(Errc::invalid_argument, "fps must be positive");
  for (const auto& f : frames_) require_same_shape(frames_.front(), f);
}

// ---------------------------------------------------------------------------
// PGM reader

namespace {

class PgmCursor {
 public:
  explicit PgmCursor(std::string_view bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        return;
      }
    }
  }

  std::size_t header_number(const char* what) {
    skip_space_and_comments();
    if (pos_ >= bytes_.size()) {
      throw Error(Errc::truncated_file, std::string("PGM header ends before ") + what);
    }
    std::size_t value = 0;
    const char* first = bytes_.data() + pos_;
    const char* last = bytes_.data() + bytes_.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec == std::errc::result_out_of_range) {
      throw Error(Errc::dimension_overflow, std::string("PGM ") + what + " does not fit");
    }
    if (ec != std::errc() || ptr == first) {
      throw Error(Errc::malformed_image, std::string("PGM ") + what + " is not a number");
    }
    pos_ += static_cast<std::size_t>(ptr - first);
    return value;
  }

  std::size_t pos() const noexcept { return pos_; }
  void advance(std::size_t n) noexcept { pos_ += n; }
  std::string_view rest() const noexcept { return bytes_.substr(std::min(pos_, bytes_.size())); }
  bool at_end() const noexcept { return pos_ >= bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

GrayImage parse_pgm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P') {
    throw Error(Errc::unsupported_format, "not a PNM file");
  }
  const char kind = bytes[1];
  if (kind != '2' && kind != '5') {
    throw Error(Errc::unsupported_format, std::string("PNM variant P") + kind + " is not grayscale PGM");
  }
  PgmCursor cur(bytes);
  cur.advance(2);
  const std::size_t width = cur.header_number("width");
  const std::size_t height = cur.header_number("height");
  const std::size_t maxval = cur.header_number("maxval");

  if (width == 0 || height == 0) throw Error(Errc::malformed_image, "PGM dimensions must be positive");
  if (width > kMaxPgmPixels / height) {
    throw Error(Errc::dimension_overflow, "PGM larger than " + std::to_string(kMaxPgmPixels) + " pixels");
  }
  if (maxval == 0 || maxval > 65535) {
    throw Error(Errc::unsupported_format, "PGM maxval must be in 1..65535");
  }

  const std::size_t count = width * height;
  const double scale = static_cast<double>(maxval);
  std::vector<double> pixels;
  pixels.reserve(count);

  auto push = [&](std::size_t raw) {
    if (raw > maxval) throw Error(Errc::malformed_image, "PGM sample exceeds maxval");
    pixels.push_back(static_cast<double>(raw) / scale);
  };

  if (kind == '5') {
    // Exactly one whitespace byte separates the header from the raster.
    if (cur.at_end()) throw Error(Errc::truncated_file, "PGM raster missing");
    cur.advance(1);
    const std::size_t bytes_per_sample = maxval < 256 ? 1 : 2;
    const std::string_view raster = cur.rest();
    if (raster.size() < count * bytes_per_sample) {
      throw Error(Errc::truncated_file, "PGM raster holds " + std::to_string(raster.size()) +
                                            " bytes, expected " +
                                            std::to_string(count * bytes_per_sample));
    }
    for (std::size_t i = 0; i < count; ++i) {
      if (bytes_per_sample == 1) {
        push(static_cast<unsigned char>(raster[i]));
      } else {
        const auto hi = static_cast<unsigned char>(raster[2 * i]);
        const auto lo = static_cast<unsigned char>(raster[2 * i + 1]);
        push((std::size_t{hi} << 8) | lo);
      }
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      cur.skip_space_and_comments();
      if (cur.at_end()) {
        throw Error(Errc::truncated_file, "PGM holds " + std::to_string(i) + " samples, expected " +
                                              std::to_string(count));
      }
      push(cur.header_number("sample"));
    }
  }
  return GrayImage(width, height, std::move(pixels));
}

GrayImage load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_failure, "cannot open '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_pgm(bytes);
}

// ---------------------------------------------------------------------------
// Kernels. Each row reduces into its own slot and rows are merged in order,
// so the result is the same for every thread count.

double laplacian_variance(const GrayImage& image) {
  require_laplacian_size(image);
  const std::size_t w = image.width();
  const std::size_t h = image.height();
  const std::size_t rows = h - 2;
  const double count = static_cast<double>((w - 2) * rows);
  const bool par = image.size() >= kParallelPixelThreshold;

  std::vector<double> partial(rows, 0.0);
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t x = 1; x + 1 < w; ++x) s += laplacian_at(image, x, r + 1);
    partial[r] = s;
  }
  const double mean = ordered_sum(partial) / count;

#pragma omp parallel for schedule(static) if (par)
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t x = 1; x + 1 < w; ++x) {
      const double d = laplacian_at(image, x, r + 1) - mean;
      s += d * d;
    }
    partial[r] = s;
  }
  return ordered_sum(partial) / count;
}

double mean_intensity(const GrayImage& image) {
  const std::size_t h = image.height();
  const bool par = image.size() >= kParallelPixelThreshold;
  std::vector<double> partial(h, 0.0);
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t y = 0; y < h; ++y) {
    double s = 0.0;
    for (double v : image.row(y)) s += v;
    partial[y] = s;
  }
  return ordered_sum(partial) / static_cast<double>(image.size());
}

double ssim(const GrayImage& a, const GrayImage& b) {
  require_same_shape(a, b);
  const std::size_t h = a.height();
  const std::size_t w = a.width();
  const double n = static_cast<double>(a.size());
  const bool par = a.size() >= kParallelPixelThreshold;

  const double mean_a = mean_intensity(a);
  const double mean_b = mean_intensity(b);

  std::vector<double> pa(h, 0.0), pb(h, 0.0), pab(h, 0.0);
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t y = 0; y < h; ++y) {
    double sa = 0.0, sb = 0.0, sab = 0.0;
    const auto ra = a.row(y);
    const auto rb = b.row(y);
    for (std::size_t x = 0; x < w; ++x) {
      const double da = ra[x] - mean_a;
      const double db = rb[x] - mean_b;
      sa += da * da;
      sb += db * db;
      sab += da * db;
    }
    pa[y] = sa;
    pb[y] = sb;
    pab[y] = sab;
  }
  return ssim_from_moments(mean_a, mean_b, ordered_sum(pa) / n, ordered_sum(pb) / n,
                           ordered_sum(pab) / n);
}

double temporal_inconsistency(const Clip& clip) {
  if (clip.size() < 2) throw Error(Errc::too_few_frames, "temporal check needs >= 2 frames");
  const auto frames = clip.frames();
  double total = 0.0;
  for (std::size_t t = 0; t + 1 < frames.size(); ++t) total += ssim(frames[t], frames[t + 1]);
  const double mean = total / static_cast<double>(frames.size() - 1);
  return std::clamp(1.0 - mean, 0.0, 1.0);
}

double normalize_blur(double blur, double blur_ref) {
  if (!(blur_ref > 0.0)) throw Error(Errc::invalid_argument, "blur_ref must be positive");
  if (!(blur >= 0.0)) throw Error(Errc::invalid_argument, "blur must be >= 0");
  return std::min(blur / blur_ref, 1.0);
}

namespace reference {

double laplacian_variance(const GrayImage& image) {
  require_laplacian_size(image);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t y = 1; y + 1 < image.height(); ++y) {
    for (std::size_t x = 1; x + 1 < image.width(); ++x) {
      sum += laplacian_at(image, x, y);
      ++n;
    }
  }
  const double mean = sum / static_cast<double>(n);
  double sq = 0.0;
  for (std::size_t y = 1; y + 1 < image.height(); ++y) {
    for (std::size_t x = 1; x + 1 < image.width(); ++x) {
      const double d = laplacian_at(image, x, y) - mean;
      sq += d * d;
    }
  }
  return sq / static_cast<double>(n);
}

double mean_intensity(const GrayImage& image) {
  double sum = 0.0;
  for (double v : image.pixels()) sum += v;
  return sum / static_cast<double>(image.size());
}

double ssim(const GrayImage& a, const GrayImage& b) {
  require_same_shape(a, b);
  const double n = static_cast<double>(a.size());
  const double mean_a = reference::mean_intensity(a);
  const double mean_b = reference::mean_intensity(b);
  double va = 0.0, vb = 0.0, cov = 0.0;
  const auto pa = a.pixels();
  const auto pb = b.pixels();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const double da = pa[i] - mean_a;
    const double db = pb[i] - mean_b;
    va += da * da;
    vb += db * db;
    cov += da * db;
  }
  return ssim_from_moments(mean_a, mean_b, va / n, vb / n, cov / n);
}

}  // namespace reference

}  // namespace adaptsr
