#include "adaptsr/resource.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>

#include "adaptsr/error.hpp"

namespace adaptsr {

std::string_view to_string(CostDimension dim) noexcept {
  switch (dim) {
    case CostDimension::gflops: return "gflops";
    case CostDimension::latency_ms: return "latency_ms";
    case CostDimension::power_w: return "power_w";
  }
  return "gflops";
}

std::optional<CostDimension> parse_cost_dimension(std::string_view text) {
  for (auto d : {CostDimension::gflops, CostDimension::latency_ms, CostDimension::power_w}) {
    if (to_string(d) == text) return d;
  }
  return std::nullopt;
}

double LevelCost::get(CostDimension dim) const noexcept {
  switch (dim) {
    case CostDimension::gflops: return gflops;
    case CostDimension::latency_ms: return latency_ms;
    case CostDimension::power_w: return power_w;
  }
  return gflops;
}

CostProfile CostProfile::defaults() {
  CostProfile p;
  const LevelCost base{2.3, 32.0, 8.3};
  const LevelCost x4{18.7, 143.0, 26.4};
  p.at(SRLevel::None) = base;
  p.at(SRLevel::X4) = x4;
  p.at(SRLevel::X2) = LevelCost{base.gflops + 0.25 * (x4.gflops - base.gflops),
                                base.latency_ms + 0.25 * (x4.latency_ms - base.latency_ms),
                                base.power_w + 0.25 * (x4.power_w - base.power_w)};
  return p;
}

void CostProfile::validate() const {
  for (const auto& c : levels) {
    if (!(c.gflops >= 0.0 && c.latency_ms >= 0.0 && c.power_w >= 0.0)) {
      throw Error(Errc::invalid_argument, "costs must be >= 0");
    }
  }
  for (std::size_t i = 1; i < levels.size(); ++i) {
    const auto& lo = levels[i - 1];
    const auto& hi = levels[i];
    if (hi.gflops < lo.gflops || hi.latency_ms < lo.latency_ms || hi.power_w < lo.power_w) {
      throw Error(Errc::invalid_argument, "costs must be non-decreasing in SR level");
    }
  }
}

double utility_cost(const CostProfile& profile, SRLevel level) {
  const double base = profile.at(SRLevel::None).get(profile.utility_dimension);
  const double span = profile.at(SRLevel::X4).get(profile.utility_dimension) - base;
  if (level == SRLevel::None || span <= 0.0) return 0.0;
  return (profile.at(level).get(profile.utility_dimension) - base) / span;
}

CostSummary accumulate_levels(std::span<const SRLevel> levels, const CostProfile& profile) {
  if (levels.empty()) throw Error(Errc::empty_input, "no decisions to account");
  CostSummary s;
  s.n = levels.size();
  for (SRLevel level : levels) ++s.histogram[static_cast<std::size_t>(level_index(level))];
  // Totals from level counts: exact for single-level runs, independent of order.
  for (SRLevel level : kAllLevels) {
    const auto count = static_cast<double>(s.histogram[static_cast<std::size_t>(level_index(level))]);
    const auto& c = profile.at(level);
    s.total.gflops += count * c.gflops;
    s.total.latency_ms += count * c.latency_ms;
    s.total.power_w += count * c.power_w;
  }
  const double n = static_cast<double>(s.n);
  s.mean = LevelCost{s.total.gflops / n, s.total.latency_ms / n, s.total.power_w / n};
  return s;
}

CostSummary accumulate_cost(std::span<const GateDecision> decisions, const CostProfile& profile) {
  std::vector<SRLevel> levels;
  levels.reserve(decisions.size());
  for (const auto& d : decisions) levels.push_back(d.level);
  return accumulate_levels(levels, profile);
}

double method_efficiency(const MethodPoint& m, const MethodPoint& baseline) {
  if (!(m.power_w > 0.0)) {
    throw Error(Errc::invalid_argument, "method '" + m.name + "' needs positive power");
  }
  return (m.accuracy - baseline.accuracy) * m.fps / m.power_w;
}

double relative_efficiency(const MethodPoint& m, const MethodPoint& baseline,
                           double reference_efficiency) {
  if (!(baseline.power_w > 0.0)) {
    throw Error(Errc::invalid_argument, "baseline needs positive power");
  }
  if (m == baseline) return 1.0;
  if (reference_efficiency == 0.0) {
    throw Error(Errc::zero_normalizer, "reference efficiency is zero");
  }
  return method_efficiency(m, baseline) / reference_efficiency;
}

double relative_efficiency(const MethodPoint& m, const MethodPoint& baseline,
                           const MethodPoint& reference) {
  return relative_efficiency(m, baseline, method_efficiency(reference, baseline));
}

std::vector<MethodPoint> pareto_frontier(std::span<const MethodPoint> points) {
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (points[a].cost != points[b].cost) return points[a].cost < points[b].cost;
    return points[a].accuracy > points[b].accuracy;
  });

  std::vector<MethodPoint> front;
  for (std::size_t i : order) {
    const auto& p = points[i];
    if (front.empty() || p.accuracy > front.back().accuracy) {
      front.push_back(p);
    } else if (p.accuracy == front.back().accuracy && p.cost == front.back().cost) {
      front.push_back(p);
    }
  }
  return front;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
  }
  return out;
}

double parse_cell(const std::string& cell, std::size_t line_no) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw Error(Errc::malformed_record, "'" + cell + "' is not a number", line_no);
  }
  return v;
}

}  // namespace

std::vector<MethodPoint> read_methods_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::empty_input, "methods CSV is empty");
  const auto header = split_csv(line);
  const std::vector<std::string> expected{"name", "accuracy", "cost", "fps", "power_w"};
  if (header != expected) {
    throw Error(Errc::malformed_record, "header must be name,accuracy,cost,fps,power_w", 1);
  }
  std::vector<MethodPoint> points;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv(line);
    if (cells.size() != expected.size()) {
      throw Error(Errc::malformed_record, "expected 5 columns", line_no);
    }
    points.push_back(MethodPoint{cells[0], parse_cell(cells[1], line_no),
                                 parse_cell(cells[2], line_no), parse_cell(cells[3], line_no),
                                 parse_cell(cells[4], line_no)});
  }
  return points;
}

std::vector<MethodPoint> read_methods_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_failure, "cannot open '" + path.string() + "'");
  return read_methods_csv(in);
}

}  // namespace adaptsr
