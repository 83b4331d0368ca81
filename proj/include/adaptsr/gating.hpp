#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "adaptsr/core.hpp"
#include "adaptsr/resource.hpp"

namespace adaptsr {

struct Thresholds {
  double tau_low = 0.60;
  double tau_high = 0.85;
  double critical_cut = 0.70;

  void validate() const;
  bool operator==(const Thresholds&) const = default;
};

/// tau(x) = tau_base + alpha_blur * blur_norm + alpha_light * lighting, clamped.
/// Positive alpha_blur raises tau for a high blur reading (Laplacian variance,
/// so a sharp frame); negative alpha_light raises it for a dark frame.
struct AdaptiveTauConfig {
  double tau_base = 0.85;
  double alpha_blur = 0.05;
  double alpha_light = -0.05;
  double clamp_lo = 0.0;
  double clamp_hi = 1.0;
  double blur_ref = 0.05;

  void validate() const;
  bool operator==(const AdaptiveTauConfig&) const = default;
};

/// delta_acc * w - lambda * cost.
double expected_utility(double delta_acc, double w, double cost, double lambda);

/// table[cls, level] * (1 - p); zero for level None.
double delta_acc_estimate(const UtilityParams& params, int cls, SRLevel level, double p);

/// Piecewise confidence/criticality policy. The 4x branch is tested first, so a
/// critical record below critical_cut is enhanced at 4x even inside the 2x band.
/// A critical record above tau_high falls through to None (uncovered_default).
GateDecision gate(double p, int criticality, const Thresholds& t);

double adaptive_tau(const AdaptiveTauConfig& cfg, double blur_norm, double light);

/// gate() with tau_high replaced by the record's adaptive tau; utility_by_level
/// is filled from the confidence heuristic for auditing.
GateDecision gate_adaptive(const PredictionRecord& record, const Thresholds& t,
                           const AdaptiveTauConfig& cfg, const UtilityParams& params,
                           const CostProfile& costs);

/// Utility realized by running `record` at `level`: observed correctness change
/// when the record carries per-level outcomes, the confidence heuristic otherwise.
double realized_utility(const PredictionRecord& record, SRLevel level,
                        const UtilityParams& params, const CostProfile& costs);

/// Grid values k * step for k = 0..floor(1/step), rounded to 12 decimals.
std::vector<double> threshold_grid(double step);

struct SurfacePoint {
  double tau_low = 0.0;
  double tau_high = 0.0;
  double mean_utility = 0.0;

  bool operator==(const SurfacePoint&) const = default;
};

struct ThresholdOptimum {
  double tau_low = 0.0;
  double tau_high = 0.0;
  double mean_utility = 0.0;
  std::vector<SurfacePoint> surface;  // every tau_low < tau_high grid pair
};

/// Exhaustive grid search of mean realized utility. Ties go to the larger
/// tau_high, then the larger tau_low.
ThresholdOptimum optimize_thresholds(std::span<const PredictionRecord> records,
                                     const UtilityParams& params, const CostProfile& costs,
                                     double grid_step, double critical_cut = 0.70);

struct SweepRow {
  double scale_low = 1.0;
  double scale_high = 1.0;
  double tau_low = 0.0;
  double tau_high = 0.0;
  double mean_utility = 0.0;
  double mean_cost_gflops = 0.0;
  std::array<std::size_t, kNumLevels> histogram{};

  bool operator==(const SweepRow&) const = default;
};

/// Policy evaluated with tau_low and tau_high each scaled by factors spread
/// evenly over [1 - rel_range, 1 + rel_range] (clamped to [0,1]). Rows are
/// ordered by scale_low, then scale_high. rel_range = 0 yields one row.
std::vector<SweepRow> sensitivity_sweep(std::span<const PredictionRecord> records,
                                        const Thresholds& t, const UtilityParams& params,
                                        const CostProfile& costs, double rel_range = 0.25,
                                        int steps = 5);

namespace reference {

ThresholdOptimum optimize_thresholds(std::span<const PredictionRecord> records,
                                     const UtilityParams& params, const CostProfile& costs,
                                     double grid_step, double critical_cut = 0.70);
std::vector<SweepRow> sensitivity_sweep(std::span<const PredictionRecord> records,
                                        const Thresholds& t, const UtilityParams& params,
                                        const CostProfile& costs, double rel_range = 0.25,
                                        int steps = 5);

}  // namespace reference

}  // namespace adaptsr
