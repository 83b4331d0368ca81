#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "adaptsr/error.hpp"
#include "adaptsr/resource.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace adaptsr;

namespace {

std::vector<GateDecision> decisions(std::initializer_list<SRLevel> levels) {
  std::vector<GateDecision> out;
  for (auto l : levels) {
    GateDecision d;
    d.level = l;
    out.push_back(d);
  }
  return out;
}

}  // namespace

TEST_CASE("default cost profile") {
  const auto p = CostProfile::defaults();
  CHECK(p.at(SRLevel::None).gflops == 2.3);
  CHECK(p.at(SRLevel::X4).gflops == 18.7);
  CHECK(p.at(SRLevel::X2).gflops == doctest::Approx(6.4));
  CHECK(p.at(SRLevel::X4).latency_ms == 143.0);
  CHECK(p.at(SRLevel::X4).power_w == 26.4);
  CHECK(utility_cost(p, SRLevel::None) == 0.0);
  CHECK(utility_cost(p, SRLevel::X4) == 1.0);
  CHECK(utility_cost(p, SRLevel::X2) == doctest::Approx(0.25));
  auto bad = p;
  bad.at(SRLevel::X2).gflops = 1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("accumulate_cost examples") {
  const auto p = CostProfile::defaults();
  CHECK(accumulate_cost(decisions({SRLevel::None, SRLevel::None, SRLevel::None}), p).mean.gflops ==
        doctest::Approx(2.3).epsilon(1e-12));
  const auto mix = accumulate_cost(decisions({SRLevel::None, SRLevel::X4}), p);
  CHECK(mix.mean.gflops == doctest::Approx(10.5).epsilon(1e-12));
  CHECK(mix.histogram == std::array<std::size_t, 3>{1, 0, 1});

  CostProfile flat = p;
  flat.at(SRLevel::X2) = flat.at(SRLevel::None);
  flat.at(SRLevel::X4) = flat.at(SRLevel::None);
  CHECK(accumulate_cost(decisions({SRLevel::X2, SRLevel::X4, SRLevel::None}), flat).mean ==
        flat.at(SRLevel::None));

  try {
    accumulate_cost(std::vector<GateDecision>{}, p);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::empty_input);
  }
}

TEST_CASE("property: accumulate_cost totals add under concatenation") {
  const auto p = CostProfile::defaults();
  std::mt19937_64 g(51);
  std::uniform_int_distribution<int> lvl(0, 2), len(1, 40);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<SRLevel> a(len(g)), b(len(g));
    for (auto& l : a) l = kAllLevels[lvl(g)];
    for (auto& l : b) l = kAllLevels[lvl(g)];
    std::vector<SRLevel> ab = a;
    ab.insert(ab.end(), b.begin(), b.end());
    const auto sa = accumulate_levels(a, p), sb = accumulate_levels(b, p), sab = accumulate_levels(ab, p);
    CHECK(std::abs(sab.total.gflops - sa.total.gflops - sb.total.gflops) <= 1e-9);
    CHECK(std::abs(sab.total.latency_ms - sa.total.latency_ms - sb.total.latency_ms) <= 1e-9);
    CHECK(std::abs(sab.total.power_w - sa.total.power_w - sb.total.power_w) <= 1e-9);
    CHECK(sab.n == sa.n + sb.n);
  }
}

TEST_CASE("relative_efficiency examples") {
  const MethodPoint base{"bicubic", 0.30, 1.0, 20.0, 4.0};
  CHECK(relative_efficiency(base, base, 0.0) == 1.0);
  const MethodPoint same{"same", 0.30, 2.0, 10.0, 5.0};
  CHECK(relative_efficiency(same, base, 0.1) == 0.0);
  const MethodPoint better{"better", 0.40, 2.0, 10.0, 5.0};
  CHECK(relative_efficiency(better, base, 0.1) == doctest::Approx(2.0).epsilon(1e-12));
  try {
    relative_efficiency(better, base, same);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::zero_normalizer);
  }
}

TEST_CASE("property: relative_efficiency sign follows the accuracy gap") {
  std::mt19937_64 g(52);
  std::uniform_real_distribution<double> acc(0.0, 1.0), pos(0.5, 50.0);
  const MethodPoint base{"base", 0.5, 1.0, 30.0, 5.0};
  for (int i = 0; i < 500; ++i) {
    const MethodPoint m{"m", acc(g), pos(g), pos(g), pos(g)};
    const double r = relative_efficiency(m, base, pos(g));
    const double gap = m.accuracy - base.accuracy;
    CHECK((r > 0) == (gap > 0));
    CHECK((r < 0) == (gap < 0));
  }
}

TEST_CASE("pareto_frontier examples") {
  const std::vector<MethodPoint> pts{{"a", 50, 1, 1, 1}, {"b", 60, 2, 1, 1}, {"c", 55, 3, 1, 1}};
  const auto front = pareto_frontier(pts);
  REQUIRE(front.size() == 2);
  CHECK(front[0].name == "a");
  CHECK(front[1].name == "b");
  CHECK(pareto_frontier(std::vector<MethodPoint>{pts[2]}).size() == 1);
  CHECK(pareto_frontier(std::vector<MethodPoint>{}).empty());

  const std::vector<MethodPoint> twins{{"x", 0.5, 2, 1, 1}, {"y", 0.5, 2, 1, 1}};
  const auto both = pareto_frontier(twins);
  REQUIRE(both.size() == 2);
  CHECK(both[0].name == "x");
}

TEST_CASE("property: pareto_frontier equals the brute-force dominance oracle") {
  std::mt19937_64 g(53);
  std::uniform_int_distribution<int> coarse(0, 8), len(0, 30);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<MethodPoint> pts;
    const int n = len(g);
    for (int i = 0; i < n; ++i) {
      pts.push_back({"m" + std::to_string(i), coarse(g) / 8.0, 1.0 + coarse(g), 10.0, 5.0});
    }
    CHECK(pareto_frontier(pts) == oracle::pareto(pts));
  }
}

TEST_CASE("read_methods_csv") {
  std::istringstream ok("name,accuracy,cost,fps,power_w\nbicubic,0.7,2.3,60,8\ncar4x,0.8,18.7,7,26.4\n");
  const auto pts = read_methods_csv(ok);
  REQUIRE(pts.size() == 2);
  CHECK(pts[1].name == "car4x");
  CHECK(pts[1].power_w == 26.4);
  std::istringstream bad_header("method,acc\n");
  CHECK_THROWS_AS(read_methods_csv(bad_header), Error);
  std::istringstream short_row("name,accuracy,cost,fps,power_w\nx,0.1,1\n");
  try {
    read_methods_csv(short_row);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::malformed_record);
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(read_methods_csv(std::filesystem::path("/nonexistent/methods.csv")), Error);
}
