#include "adaptsr/gating.hpp"

#include <algorithm>
#include <cmath>

#include "adaptsr/error.hpp"
#include "adaptsr/quality.hpp"

namespace adaptsr {

void Thresholds::validate() const {
  if (!(tau_low >= 0.0 && tau_low < tau_high && tau_high <= 1.0)) {
    throw Error(Errc::invalid_argument, "thresholds need 0 <= tau_low < tau_high <= 1");
  }
  if (!(critical_cut >= 0.0 && critical_cut <= 1.0)) {
    throw Error(Errc::invalid_argument, "critical_cut must be in [0,1]");
  }
}

void AdaptiveTauConfig::validate() const {
  if (!(clamp_lo <= clamp_hi)) throw Error(Errc::invalid_argument, "adaptive clamp must be ordered");
  if (!(blur_ref > 0.0)) throw Error(Errc::invalid_argument, "blur_ref must be positive");
  if (!std::isfinite(tau_base) || !std::isfinite(alpha_blur) || !std::isfinite(alpha_light)) {
    throw Error(Errc::invalid_argument, "adaptive coefficients must be finite");
  }
}

double expected_utility(double delta_acc, double w, double cost, double lambda) {
  return delta_acc * w - lambda * cost;
}

double delta_acc_estimate(const UtilityParams& params, int cls, SRLevel level, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error(Errc::invalid_argument, "confidence must be in [0,1]");
  if (level == SRLevel::None) return 0.0;
  return params.delta_acc.at(cls, level) * (1.0 - p);
}

GateDecision gate(double p, int criticality, const Thresholds& t) {
  GateDecision d;
  d.tau_used = t.tau_high;
  const bool critical = criticality == 1;
  if (p <= t.tau_low) {
    d.level = SRLevel::X4;
    d.reason = GateReason::low_conf_4x;
  } else if (critical && p < t.critical_cut) {
    d.level = SRLevel::X4;
    d.reason = GateReason::critical_4x;
  } else if (p > t.tau_high) {
    d.level = SRLevel::None;
    d.reason = critical ? GateReason::uncovered_default : GateReason::high_conf_skip;
  } else {
    d.level = SRLevel::X2;
    d.reason = GateReason::mid_conf_2x;
  }
  return d;
}

double adaptive_tau(const AdaptiveTauConfig& cfg, double blur_norm, double light) {
  const double tau = cfg.tau_base + cfg.alpha_blur * blur_norm + cfg.alpha_light * light;
  return std::clamp(tau, cfg.clamp_lo, cfg.clamp_hi);
}

GateDecision gate_adaptive(const PredictionRecord& record, const Thresholds& t,
                           const AdaptiveTauConfig& cfg, const UtilityParams& params,
                           const CostProfile& costs) {
  Thresholds local = t;
  local.tau_high = adaptive_tau(cfg, normalize_blur(record.blur, cfg.blur_ref), record.lighting);
  GateDecision d = gate(record.confidence, record.criticality, local);
  const int cls = predicted_class(record);
  for (SRLevel level : kAllLevels) {
    d.utility_by_level[static_cast<std::size_t>(level_index(level))] = expected_utility(
        delta_acc_estimate(params, cls, level, record.confidence),
        params.weight(record.criticality), utility_cost(costs, level), params.lambda);
  }
  return d;
}

double realized_utility(const PredictionRecord& record, SRLevel level,
                        const UtilityParams& params, const CostProfile& costs) {
  double gain = 0.0;
  if (record.correct_by_level) {
    const auto& outcome = *record.correct_by_level;
    gain = static_cast<double>(outcome[static_cast<std::size_t>(level_index(level))] - outcome[0]);
  } else {
    gain = delta_acc_estimate(params, predicted_class(record), level, record.confidence);
  }
  return expected_utility(gain, params.weight(record.criticality), utility_cost(costs, level),
                          params.lambda);
}

std::vector<double> threshold_grid(double step) {
  if (!(step > 0.0 && step <= 0.25)) {
    throw Error(Errc::invalid_argument, "grid_step must be in (0, 0.25]");
  }
  const auto count = static_cast<std::size_t>(std::floor(1.0 / step + 1e-9));
  std::vector<double> grid;
  grid.reserve(count + 1);
  for (std::size_t k = 0; k <= count; ++k) {
    grid.push_back(std::min(1.0, std::round(static_cast<double>(k) * step * 1e12) / 1e12));
  }
  return grid;
}

namespace {

// Per-record inputs of the policy plus the realized utility at each level.
struct RecordUtility {
  double p;
  int criticality;
  std::array<double, kNumLevels> utility;
  std::array<double, kNumLevels> gflops;
};

std::vector<RecordUtility> tabulate(std::span<const PredictionRecord> records,
                                    const UtilityParams& params, const CostProfile& costs) {
  std::vector<RecordUtility> table;
  table.reserve(records.size());
  for (const auto& r : records) {
    RecordUtility row{r.confidence, r.criticality, {}, {}};
    for (SRLevel level : kAllLevels) {
      const auto i = static_cast<std::size_t>(level_index(level));
      row.utility[i] = realized_utility(r, level, params, costs);
      row.gflops[i] = costs.at(level).gflops;
    }
    table.push_back(row);
  }
  return table;
}

struct PolicyTotals {
  double utility = 0.0;
  double gflops = 0.0;
  std::array<std::size_t, kNumLevels> histogram{};
};

PolicyTotals evaluate(std::span<const RecordUtility> table, const Thresholds& t) {
  PolicyTotals out;
  for (const auto& row : table) {
    const auto i = static_cast<std::size_t>(level_index(gate(row.p, row.criticality, t).level));
    out.utility += row.utility[i];
    out.gflops += row.gflops[i];
    ++out.histogram[i];
  }
  return out;
}

std::vector<SurfacePoint> surface_points(const std::vector<double>& grid) {
  std::vector<SurfacePoint> points;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t j = i + 1; j < grid.size(); ++j) points.push_back({grid[i], grid[j], 0.0});
  }
  return points;
}

ThresholdOptimum pick_optimum(std::vector<SurfacePoint> surface) {
  ThresholdOptimum best;
  bool have = false;
  for (const auto& s : surface) {
    const bool better =
        !have || s.mean_utility > best.mean_utility ||
        (s.mean_utility == best.mean_utility &&
         (s.tau_high > best.tau_high || (s.tau_high == best.tau_high && s.tau_low > best.tau_low)));
    if (better) {
      best.tau_low = s.tau_low;
      best.tau_high = s.tau_high;
      best.mean_utility = s.mean_utility;
      have = true;
    }
  }
  best.surface = std::move(surface);
  return best;
}

std::vector<double> sweep_scales(double rel_range, int steps) {
  if (!(rel_range >= 0.0 && rel_range < 1.0)) {
    throw Error(Errc::invalid_argument, "rel_range must be in [0,1)");
  }
  if (rel_range == 0.0) return {1.0};
  if (steps < 2) throw Error(Errc::invalid_argument, "sweep needs at least 2 steps");
  std::vector<double> scales;
  for (int i = 0; i < steps; ++i) {
    scales.push_back(1.0 - rel_range + 2.0 * rel_range * i / static_cast<double>(steps - 1));
  }
  return scales;
}

std::vector<SweepRow> sweep_rows(const Thresholds& t, double rel_range, int steps) {
  const auto scales = sweep_scales(rel_range, steps);
  std::vector<SweepRow> rows;
  for (double sl : scales) {
    for (double sh : scales) {
      SweepRow row;
      row.scale_low = sl;
      row.scale_high = sh;
      row.tau_low = std::clamp(t.tau_low * sl, 0.0, 1.0);
      row.tau_high = std::clamp(t.tau_high * sh, 0.0, 1.0);
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace

ThresholdOptimum optimize_thresholds(std::span<const PredictionRecord> records,
                                     const UtilityParams& params, const CostProfile& costs,
                                     double grid_step, double critical_cut) {
  const auto grid = threshold_grid(grid_step);
  if (records.empty()) throw Error(Errc::empty_input, "no records to optimize over");
  const auto table = tabulate(records, params, costs);
  auto surface = surface_points(grid);
  const double n = static_cast<double>(records.size());

  const auto count = static_cast<std::ptrdiff_t>(surface.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t k = 0; k < count; ++k) {
    auto& s = surface[static_cast<std::size_t>(k)];
    s.mean_utility = evaluate(table, Thresholds{s.tau_low, s.tau_high, critical_cut}).utility / n;
  }
  return pick_optimum(std::move(surface));
}

std::vector<SweepRow> sensitivity_sweep(std::span<const PredictionRecord> records,
                                        const Thresholds& t, const UtilityParams& params,
                                        const CostProfile& costs, double rel_range, int steps) {
  auto rows = sweep_rows(t, rel_range, steps);
  if (records.empty()) throw Error(Errc::empty_input, "no records to sweep over");
  const auto table = tabulate(records, params, costs);
  const double n = static_cast<double>(records.size());

  const auto count = static_cast<std::ptrdiff_t>(rows.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t k = 0; k < count; ++k) {
    auto& row = rows[static_cast<std::size_t>(k)];
    const auto totals = evaluate(table, Thresholds{row.tau_low, row.tau_high, t.critical_cut});
    row.mean_utility = totals.utility / n;
    row.mean_cost_gflops = totals.gflops / n;
    row.histogram = totals.histogram;
  }
  return rows;
}

namespace reference {

ThresholdOptimum optimize_thresholds(std::span<const PredictionRecord> records,
                                     const UtilityParams& params, const CostProfile& costs,
                                     double grid_step, double critical_cut) {
  const auto grid = threshold_grid(grid_step);
  if (records.empty()) throw Error(Errc::empty_input, "no records to optimize over");
  auto surface = surface_points(grid);
  for (auto& s : surface) {
    const Thresholds t{s.tau_low, s.tau_high, critical_cut};
    double total = 0.0;
    for (const auto& r : records) {
      total += realized_utility(r, gate(r.confidence, r.criticality, t).level, params, costs);
    }
    s.mean_utility = total / static_cast<double>(records.size());
  }
  return pick_optimum(std::move(surface));
}

std::vector<SweepRow> sensitivity_sweep(std::span<const PredictionRecord> records,
                                        const Thresholds& t, const UtilityParams& params,
                                        const CostProfile& costs, double rel_range, int steps) {
  auto rows = sweep_rows(t, rel_range, steps);
  if (records.empty()) throw Error(Errc::empty_input, "no records to sweep over");
  for (auto& row : rows) {
    const Thresholds local{row.tau_low, row.tau_high, t.critical_cut};
    double utility = 0.0, gflops = 0.0;
    for (const auto& r : records) {
      const SRLevel level = gate(r.confidence, r.criticality, local).level;
      utility += realized_utility(r, level, params, costs);
      gflops += costs.at(level).gflops;
      ++row.histogram[static_cast<std::size_t>(level_index(level))];
    }
    row.mean_utility = utility / static_cast<double>(records.size());
    row.mean_cost_gflops = gflops / static_cast<double>(records.size());
  }
  return rows;
}

}  // namespace reference

}  // namespace adaptsr
