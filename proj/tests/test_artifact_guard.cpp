#include <algorithm>
#include <cmath>
#include <random>

#include "adaptsr/artifact_guard.hpp"
#include "adaptsr/error.hpp"
#include "doctest.h"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace adaptsr;

namespace {

GateDecision decided(SRLevel level) {
  GateDecision d;
  d.level = level;
  return d;
}

// Face-like frame: bright background, dark band where the eyes are. `closed`
// moves the band down, a crude eye-closure.
GrayImage face(bool closed) {
  std::vector<double> px(16 * 16, 0.8);
  const std::size_t row = closed ? 9 : 5;
  for (std::size_t y = row; y < row + 2; ++y) {
    for (std::size_t x = 3; x < 13; ++x) px[y * 16 + x] = 0.1;
  }
  return GrayImage(16, 16, px);
}

}  // namespace

TEST_CASE("label_artifact examples") {
  CHECK(label_artifact(0.65, 0.1));
  CHECK(label_artifact(0.9, 0.35));
  CHECK_FALSE(label_artifact(0.70, 0.30));
}

TEST_CASE("property: label_artifact is monotone") {
  std::mt19937_64 g(41);
  std::uniform_real_distribution<double> s(-1.0, 1.0), l(0.0, 1.0), d(0.0, 0.5);
  for (int i = 0; i < 2000; ++i) {
    const double ssim_v = s(g), loss = l(g);
    if (label_artifact(ssim_v, loss)) {
      CHECK(label_artifact(ssim_v - d(g), loss));
      CHECK(label_artifact(ssim_v, loss + d(g)));
    }
  }
}

TEST_CASE("apply_guard examples") {
  const auto hit = apply_guard(0.6, decided(SRLevel::X4), 0.8);
  CHECK(hit.triggered);
  CHECK_FALSE(hit.used_sr);
  CHECK(std::abs(hit.final_confidence - 0.68) <= 1e-12);
  CHECK(effective_decision(decided(SRLevel::X4), hit).level == SRLevel::None);

  const auto pass = apply_guard(0.4, decided(SRLevel::X2), 0.8);
  CHECK_FALSE(pass.triggered);
  CHECK(pass.used_sr);
  CHECK(pass.final_confidence == 0.8);
  CHECK(effective_decision(decided(SRLevel::X2), pass).level == SRLevel::X2);

  CHECK_FALSE(apply_guard(0.5, decided(SRLevel::X4), 0.9).triggered);

  GuardConfig absolute;
  absolute.mode = DiscountMode::absolute;
  CHECK(std::abs(apply_guard(0.9, decided(SRLevel::X4), 0.8, absolute).final_confidence - 0.65) <= 1e-12);
  CHECK(apply_guard(0.9, decided(SRLevel::X4), 0.1, absolute).final_confidence == 0.0);
}

TEST_CASE("apply_guard rejects decisions that did not use SR") {
  try {
    apply_guard(0.9, decided(SRLevel::None), 0.8);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::guard_on_non_sr);
  }
  // A reverted decision cannot be discounted again.
  const auto first = apply_guard(0.9, decided(SRLevel::X4), 0.8);
  CHECK_THROWS_AS(apply_guard(0.9, effective_decision(decided(SRLevel::X4), first),
                              first.final_confidence),
                  Error);
}

TEST_CASE("property: the guard never raises confidence") {
  std::mt19937_64 g(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const double pa = u(g), conf = u(g);
    GuardConfig cfg;
    cfg.mode = i % 2 ? DiscountMode::absolute : DiscountMode::relative;
    const auto out = apply_guard(pa, decided(i % 3 ? SRLevel::X2 : SRLevel::X4), conf, cfg);
    CHECK(out.final_confidence >= 0.0);
    CHECK(out.final_confidence <= conf);
    CHECK(out.triggered == (pa > 0.5));
    CHECK(out.p_artifact == pa);
    if (out.triggered && cfg.mode == DiscountMode::relative) {
      CHECK(std::abs(out.final_confidence - 0.85 * conf) <= 1e-12);
    }
  }
}

TEST_CASE("artifact_score_heuristic") {
  const auto open = face(false);
  const Clip still({open, open, open, open, open});
  CHECK(artifact_score_heuristic(still, still) == 0.0);

  const auto closed = face(true);
  const Clip flipped({open, open, closed, open, open});
  const double score = artifact_score_heuristic(flipped, still);
  CHECK(score > 0.0);
  const double s = oracle::ssim(open, closed);
  const double temporal = 1.0 - (2.0 + 2.0 * s) / 4.0;
  const double spatial = 1.0 - (4.0 + s) / 5.0;
  CHECK(std::abs(score - std::clamp(0.5 * temporal + 0.5 * spatial, 0.0, 1.0)) <= 1e-12);

  try {
    artifact_score_heuristic(flipped, Clip({open, open}));
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::dimension_mismatch);
  }
}
