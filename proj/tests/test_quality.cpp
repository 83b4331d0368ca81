#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>

#include "adaptsr/error.hpp"
#include "adaptsr/parallel.hpp"
#include "adaptsr/quality.hpp"
#include "doctest.h"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace adaptsr;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an adaptsr::Error");
  return Errc::io_failure;
}

GrayImage shifted(const GrayImage& img, double c) {
  std::vector<double> px(img.pixels().begin(), img.pixels().end());
  for (auto& v : px) v += c;
  return GrayImage(img.width(), img.height(), px);
}

}  // namespace

TEST_CASE("PGM parsing") {
  const auto p2 = parse_pgm("P2\n# comment\n2 2\n255\n0 255\n255 0\n");
  CHECK(p2.width() == 2);
  CHECK(p2.height() == 2);
  CHECK(std::vector<double>(p2.pixels().begin(), p2.pixels().end()) ==
        std::vector<double>{0, 1, 1, 0});

  std::string p5 = "P5\n2 2\n255\n";
  p5 += std::string("\x00\xff\x80", 3);
  CHECK(code_of([&] { parse_pgm(p5); }) == Errc::truncated_file);
  p5 += '\x40';
  const auto img = parse_pgm(p5);
  CHECK(img.at(0, 1) == 128.0 / 255.0);

  std::string p5_16 = "P5 1 1 65535\n";
  p5_16 += std::string("\x80\x00", 2);
  CHECK(parse_pgm(p5_16).at(0, 0) == 32768.0 / 65535.0);

  CHECK(code_of([] { parse_pgm("P3\n1 1\n255\n0 0 0\n"); }) == Errc::unsupported_format);
  CHECK(code_of([] { parse_pgm("P2\n1 1\n70000\n0\n"); }) == Errc::unsupported_format);
  CHECK(code_of([] { parse_pgm("P2\n1 1\n255\n300\n"); }) == Errc::malformed_image);
  CHECK(code_of([] { parse_pgm("P2\n2 2\n255\n0 1 2\n"); }) == Errc::truncated_file);
  CHECK(code_of([] { parse_pgm("P2\n100000 100000\n255\n"); }) == Errc::dimension_overflow);
}

TEST_CASE("load_pgm reads files and reports IoFailure") {
  const auto path = std::filesystem::temp_directory_path() / "adaptsr_quality.pgm";
  {
    std::ofstream out(path);
    out << "P2\n3 1\n4\n0 2 4\n";
  }
  const auto img = load_pgm(path);
  CHECK(img.at(1, 0) == 0.5);
  std::filesystem::remove(path);
  CHECK(code_of([&] { load_pgm(path); }) == Errc::io_failure);
}

TEST_CASE("GrayImage and Clip validation") {
  CHECK(code_of([] { GrayImage(0, 1, {}); }) == Errc::invalid_argument);
  CHECK(code_of([] { GrayImage(2, 1, {0.1}); }) == Errc::dimension_mismatch);
  CHECK(code_of([] { GrayImage(1, 1, {1.5}); }) == Errc::invalid_argument);
  CHECK(code_of([] { Clip({}); }) == Errc::too_few_frames);
  CHECK(code_of([] { Clip({GrayImage::filled(2, 2, 0), GrayImage::filled(3, 2, 0)}); }) ==
        Errc::dimension_mismatch);
}

TEST_CASE("laplacian_variance examples") {
  CHECK(laplacian_variance(GrayImage::filled(5, 4, 0.3)) == 0.0);
  GrayImage dot(3, 3, {0, 0, 0, 0, 1, 0, 0, 0, 0});
  CHECK(laplacian_variance(dot) == 0.0);
  CHECK(code_of([] { laplacian_variance(GrayImage::filled(2, 5, 0)); }) == Errc::image_too_small);
  std::mt19937_64 g(3);
  for (int i = 0; i < 20; ++i) {
    const auto img = testutil::random_image(g, 8, 8);
    CHECK(std::abs(laplacian_variance(img) - oracle::laplacian_variance(img)) <= 1e-12);
  }
}

TEST_CASE("mean_intensity examples") {
  CHECK(mean_intensity(GrayImage::filled(4, 4, 128.0 / 255.0)) == doctest::Approx(0.501961).epsilon(1e-6));
  GrayImage half(2, 2, {0, 0, 1, 1});
  CHECK(mean_intensity(half) == 0.5);
  std::mt19937_64 g(4);
  const auto img = testutil::random_image(g, 13, 7);
  CHECK(std::abs(mean_intensity(img) - oracle::mean_intensity(img)) <= 1e-12);
}

TEST_CASE("ssim examples") {
  const auto zeros = GrayImage::filled(6, 6, 0.0);
  const auto ones = GrayImage::filled(6, 6, 1.0);
  CHECK(std::abs(ssim(zeros, ones) - 1e-4 / 1.0001) <= 1e-9);
  CHECK(std::abs(oracle::ssim(zeros, ones) - 1e-4 / 1.0001) <= 1e-12);
  std::mt19937_64 g(5);
  const auto a = testutil::random_image(g, 9, 9);
  const auto b = testutil::random_image(g, 9, 9);
  CHECK(ssim(a, a) == 1.0);
  CHECK(std::abs(ssim(a, b) - oracle::ssim(a, b)) <= 1e-12);
  CHECK(code_of([&] { ssim(a, GrayImage::filled(9, 8, 0)); }) == Errc::dimension_mismatch);
}

TEST_CASE("property: ssim identity, symmetry and range") {
  std::mt19937_64 g(6);
  std::uniform_int_distribution<std::size_t> dim(1, 12);
  for (int i = 0; i < 300; ++i) {
    const std::size_t w = dim(g), h = dim(g);
    const auto a = testutil::random_image(g, w, h);
    const auto b = testutil::random_image(g, w, h);
    CHECK(ssim(a, a) == 1.0);
    CHECK(ssim(a, b) == ssim(b, a));
    const double s = ssim(a, b);
    CHECK(s >= -1.0);
    CHECK(s <= 1.0);
  }
}

TEST_CASE("property: laplacian offset invariance and mean linearity") {
  std::mt19937_64 g(7);
  std::uniform_real_distribution<double> u(0.0, 0.5);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> px(10 * 7);
    for (auto& v : px) v = u(g);
    const GrayImage img(10, 7, px);
    CHECK(std::abs(laplacian_variance(img) - laplacian_variance(shifted(img, 0.25))) <= 1e-12);

    const auto a = testutil::random_image(g, 10, 7);
    const auto b = testutil::random_image(g, 10, 7);
    std::vector<double> avg(a.size());
    for (std::size_t k = 0; k < avg.size(); ++k) avg[k] = 0.5 * (a.pixels()[k] + b.pixels()[k]);
    CHECK(std::abs(mean_intensity(GrayImage(10, 7, avg)) -
                   0.5 * (mean_intensity(a) + mean_intensity(b))) <= 1e-12);
  }
}

TEST_CASE("parallel kernels equal the serial reference for any thread count") {
  std::mt19937_64 g(8);
  const auto a = testutil::random_image(g, 320, 240);
  const auto b = testutil::random_image(g, 320, 240);
  set_num_threads(1);
  const double l1 = laplacian_variance(a), m1 = mean_intensity(a), s1 = ssim(a, b);
  set_num_threads(4);
  CHECK(laplacian_variance(a) == l1);
  CHECK(mean_intensity(a) == m1);
  CHECK(ssim(a, b) == s1);
  set_num_threads(0);
  CHECK(std::abs(l1 - reference::laplacian_variance(a)) <= 1e-12);
  CHECK(std::abs(m1 - reference::mean_intensity(a)) <= 1e-12);
  CHECK(std::abs(s1 - reference::ssim(a, b)) <= 1e-12);
}

TEST_CASE("temporal_inconsistency") {
  const auto f = GrayImage::filled(4, 4, 0.4);
  CHECK(temporal_inconsistency(Clip({f, f, f})) == 0.0);
  CHECK(code_of([&] { temporal_inconsistency(Clip({f})); }) == Errc::too_few_frames);
  std::mt19937_64 g(9);
  const auto a = testutil::random_image(g, 8, 8);
  const auto noise = testutil::random_image(g, 8, 8);
  std::vector<double> px(a.size());
  for (std::size_t k = 0; k < px.size(); ++k) px[k] = 0.8 * a.pixels()[k] + 0.2 * noise.pixels()[k];
  const GrayImage mid(8, 8, px);
  const double expected =
      std::clamp(1.0 - 0.5 * (oracle::ssim(a, mid) + oracle::ssim(mid, a)), 0.0, 1.0);
  CHECK(expected > 0.0);
  CHECK(expected < 1.0);
  CHECK(std::abs(temporal_inconsistency(Clip({a, mid, a})) - expected) <= 1e-12);
}

TEST_CASE("normalize_blur") {
  CHECK(normalize_blur(0.025) == 0.5);
  CHECK(normalize_blur(1.0) == 1.0);
  CHECK(code_of([] { normalize_blur(0.1, 0.0); }) == Errc::invalid_argument);
}
