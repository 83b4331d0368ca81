#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adaptsr/core.hpp"

namespace adaptsr {

enum class CostDimension { gflops, latency_ms, power_w };

std::string_view to_string(CostDimension dim) noexcept;
std::optional<CostDimension> parse_cost_dimension(std::string_view text);

/// Full pipeline cost when running at one SR level (base classifier included).
struct LevelCost {
  double gflops = 0.0;
  double latency_ms = 0.0;
  double power_w = 0.0;

  double get(CostDimension dim) const noexcept;
  bool operator==(const LevelCost&) const = default;
};

struct CostProfile {
  std::array<LevelCost, kNumLevels> levels{};
  // Dimension fed to the gating utility.
  CostDimension utility_dimension = CostDimension::gflops;

  /// 2.3 / 18.7 GFLOPs and 32 / 143 ms, 8.3 / 26.4 W for no-SR / CAR4X; the
  /// 2x level adds a quarter of the 4x increment (a quarter of the output pixels).
  static CostProfile defaults();

  const LevelCost& at(SRLevel level) const noexcept {
    return levels[static_cast<std::size_t>(level_index(level))];
  }
  LevelCost& at(SRLevel level) noexcept {
    return levels[static_cast<std::size_t>(level_index(level))];
  }
  void validate() const;

  bool operator==(const CostProfile&) const = default;
};

/// Enhancement cost of `level` relative to no SR, normalized so Cost(X4) = 1
/// on the profile's utility dimension. Cost(None) = 0.
double utility_cost(const CostProfile& profile, SRLevel level);

struct CostSummary {
  std::size_t n = 0;
  LevelCost total;
  LevelCost mean;
  std::array<std::size_t, kNumLevels> histogram{};

  bool operator==(const CostSummary&) const = default;
};

CostSummary accumulate_cost(std::span<const GateDecision> decisions, const CostProfile& profile);
CostSummary accumulate_levels(std::span<const SRLevel> levels, const CostProfile& profile);

struct MethodPoint {
  std::string name;
  double accuracy = 0.0;
  double cost = 0.0;
  double fps = 0.0;
  double power_w = 0.0;

  bool operator==(const MethodPoint&) const = default;
};

/// (accuracy - baseline accuracy) * fps / power.
double method_efficiency(const MethodPoint& m, const MethodPoint& baseline);

/// method_efficiency(m) / reference_efficiency. The baseline itself is 1.0 by
/// convention. Throws ZeroNormalizer when the reference efficiency is zero.
double relative_efficiency(const MethodPoint& m, const MethodPoint& baseline,
                           double reference_efficiency);
double relative_efficiency(const MethodPoint& m, const MethodPoint& baseline,
                           const MethodPoint& reference);

/// Points not dominated in (maximize accuracy, minimize cost), sorted by cost.
/// Coincident points are all retained in input order.
std::vector<MethodPoint> pareto_frontier(std::span<const MethodPoint> points);

/// CSV with header name,accuracy,cost,fps,power_w.
std::vector<MethodPoint> read_methods_csv(std::istream& in);
std::vector<MethodPoint> read_methods_csv(const std::filesystem::path& path);

}  // namespace adaptsr
