#include "adaptsr/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "adaptsr/error.hpp"
#include "adaptsr/parallel.hpp"

namespace adaptsr {

namespace {

double edge(std::size_t m, int bins) { return static_cast<double>(m) / static_cast<double>(bins); }

void require_labels(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) {
    throw Error(Errc::dimension_mismatch, "scores and labels differ in length");
  }
}

std::size_t count_positives(std::span<const std::uint8_t> labels) {
  return static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(),
                                                [](std::uint8_t v) { return v != 0; }));
}

// Indices sorted by descending score; ties keep input order.
std::vector<std::size_t> descending_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace

std::size_t bin_index(double confidence, int bins) {
  if (bins < 1) throw Error(Errc::invalid_argument, "need at least one bin");
  if (!(confidence >= 0.0 && confidence <= 1.0)) {
    throw Error(Errc::invalid_argument, "confidence must be in [0,1]");
  }
  const auto last = static_cast<std::size_t>(bins - 1);
  const double scaled = std::ceil(confidence * static_cast<double>(bins)) - 1.0;
  std::size_t idx = scaled <= 0.0 ? 0 : std::min(static_cast<std::size_t>(scaled), last);
  // Settle rounding at the edges against the exact edge values m / M.
  while (idx > 0 && confidence <= edge(idx, bins)) --idx;
  while (idx < last && confidence > edge(idx + 1, bins)) ++idx;
  return idx;
}

std::vector<ReliabilityBin> reliability_bins(std::span<const double> confidence,
                                             std::span<const std::uint8_t> correct, int bins) {
  if (confidence.empty()) throw Error(Errc::empty_input, "no records to bin");
  if (confidence.size() != correct.size()) {
    throw Error(Errc::dimension_mismatch, "confidence and correctness differ in length");
  }
  std::vector<ReliabilityBin> out(static_cast<std::size_t>(std::max(bins, 1)));
  std::vector<double> conf_sum(out.size(), 0.0), hit_sum(out.size(), 0.0);
  for (std::size_t i = 0; i < confidence.size(); ++i) {
    const std::size_t b = bin_index(confidence[i], bins);
    ++out[b].count;
    conf_sum[b] += confidence[i];
    hit_sum[b] += correct[i] ? 1.0 : 0.0;
  }
  for (std::size_t m = 0; m < out.size(); ++m) {
    out[m].lo = edge(m, bins);
    out[m].hi = edge(m + 1, bins);
    if (out[m].count > 0) {
      const double n = static_cast<double>(out[m].count);
      out[m].mean_conf = conf_sum[m] / n;
      out[m].accuracy = hit_sum[m] / n;
    }
  }
  return out;
}

double ece(std::span<const double> confidence, std::span<const std::uint8_t> correct, int bins) {
  const auto table = reliability_bins(confidence, correct, bins);
  const double n = static_cast<double>(confidence.size());
  double total = 0.0;
  for (const auto& b : table) {
    if (b.count == 0) continue;
    total += (static_cast<double>(b.count) / n) * std::abs(b.accuracy - b.mean_conf);
  }
  return total;
}

namespace {

struct CalibrationColumns {
  std::vector<double> confidence;
  std::vector<std::uint8_t> correct;
};

CalibrationColumns calibration_columns(std::span<const PredictionRecord> records) {
  CalibrationColumns cols;
  cols.confidence.reserve(records.size());
  cols.correct.reserve(records.size());
  for (const auto& r : records) {
    cols.confidence.push_back(r.confidence);
    cols.correct.push_back(is_correct(r) ? 1 : 0);
  }
  return cols;
}

}  // namespace

std::vector<ReliabilityBin> reliability_bins(std::span<const PredictionRecord> records, int bins) {
  if (records.empty()) throw Error(Errc::empty_input, "no records to bin");
  const auto cols = calibration_columns(records);
  return reliability_bins(cols.confidence, cols.correct, bins);
}

double ece(std::span<const PredictionRecord> records, int bins) {
  if (records.empty()) throw Error(Errc::empty_input, "no records for ECE");
  const auto cols = calibration_columns(records);
  return ece(cols.confidence, cols.correct, bins);
}

double brier_term(const PredictionRecord& r) {
  if (r.probs.empty()) throw Error(Errc::missing_probs, "record " + r.clip_id + " has no probs");
  double s = 0.0;
  for (std::size_t k = 0; k < r.probs.size(); ++k) {
    const double target = static_cast<int>(k) == r.true_class ? 1.0 : 0.0;
    const double d = r.probs[k] - target;
    s += d * d;
  }
  return s;
}

double brier(std::span<const PredictionRecord> records) {
  if (records.empty()) throw Error(Errc::empty_input, "no records for Brier score");
  double total = 0.0;
  for (const auto& r : records) total += brier_term(r);
  return total / static_cast<double>(records.size());
}

double auroc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  require_labels(scores, labels);
  const std::size_t pos = count_positives(labels);
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) {
    throw Error(Errc::degenerate_labels, "AUROC needs positive and negative labels");
  }
  // Ascending midranks; tied scores share the mean of their ranks.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]]) rank_sum += midrank;
    }
    i = j;
  }
  const double p = static_cast<double>(pos);
  const double n = static_cast<double>(neg);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

std::vector<PrPoint> pr_curve(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  require_labels(scores, labels);
  const std::size_t pos = count_positives(labels);
  if (pos == 0) throw Error(Errc::degenerate_labels, "precision-recall needs a positive label");
  const auto order = descending_order(scores);
  std::vector<PrPoint> curve;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]]) ++tp; else ++fp;
      ++j;
    }
    curve.push_back({scores[order[i]], static_cast<double>(tp) / static_cast<double>(pos),
                     static_cast<double>(tp) / static_cast<double>(tp + fp)});
    i = j;
  }
  return curve;
}

double aupr(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  const auto curve = pr_curve(scores, labels);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (const auto& pt : curve) {
    ap += (pt.recall - prev_recall) * pt.precision;
    prev_recall = pt.recall;
  }
  return ap;
}

OneVsRest one_vs_rest(std::span<const PredictionRecord> records, int cls) {
  if (!valid_class(cls)) throw Error(Errc::invalid_argument, "class id out of range");
  OneVsRest out;
  out.scores.reserve(records.size());
  out.labels.reserve(records.size());
  for (const auto& r : records) {
    if (r.probs.size() <= static_cast<std::size_t>(cls)) {
      throw Error(Errc::missing_probs, "record " + r.clip_id + " lacks a score for the class");
    }
    out.scores.push_back(r.probs[static_cast<std::size_t>(cls)]);
    out.labels.push_back(r.true_class == cls ? 1 : 0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Named metrics

std::string MetricSpec::name() const {
  switch (kind) {
    case MetricKind::ece: return "ece";
    case MetricKind::brier: return "brier";
    case MetricKind::auroc: return "auroc_" + std::string(class_name(cls));
    case MetricKind::aupr: return "aupr_" + std::string(class_name(cls));
  }
  return "ece";
}

std::optional<MetricSpec> parse_metric(const std::string& name, int bins) {
  if (name == "ece") return MetricSpec{MetricKind::ece, -1, bins};
  if (name == "brier") return MetricSpec{MetricKind::brier, -1, bins};
  for (auto [prefix, kind] : {std::pair{std::string("auroc_"), MetricKind::auroc},
                              std::pair{std::string("aupr_"), MetricKind::aupr}}) {
    if (name.rfind(prefix, 0) == 0) {
      if (auto id = class_id(name.substr(prefix.size()))) return MetricSpec{kind, *id, bins};
    }
  }
  return std::nullopt;
}

namespace {

// Per-record columns for one metric, so a resample is a gather of indices.
struct MetricColumns {
  std::vector<double> value;        // confidence, Brier term or class score
  std::vector<std::uint8_t> label;  // correctness or one-vs-rest label
};

MetricColumns metric_columns(std::span<const PredictionRecord> records, const MetricSpec& m) {
  MetricColumns cols;
  switch (m.kind) {
    case MetricKind::ece: {
      auto c = calibration_columns(records);
      cols.value = std::move(c.confidence);
      cols.label = std::move(c.correct);
      break;
    }
    case MetricKind::brier:
      for (const auto& r : records) cols.value.push_back(brier_term(r));
      cols.label.assign(records.size(), 0);
      break;
    case MetricKind::auroc:
    case MetricKind::aupr: {
      auto o = one_vs_rest(records, m.cls);
      cols.value = std::move(o.scores);
      cols.label = std::move(o.labels);
      break;
    }
  }
  return cols;
}

std::optional<double> evaluate_columns(const MetricSpec& m, std::span<const double> value,
                                       std::span<const std::uint8_t> label) {
  if (value.empty()) return std::nullopt;
  switch (m.kind) {
    case MetricKind::ece:
      return ece(value, label, m.bins);
    case MetricKind::brier: {
      double total = 0.0;
      for (double v : value) total += v;
      return total / static_cast<double>(value.size());
    }
    case MetricKind::auroc: {
      const std::size_t pos = count_positives(label);
      if (pos == 0 || pos == label.size()) return std::nullopt;
      return auroc(value, label);
    }
    case MetricKind::aupr:
      if (count_positives(label) == 0) return std::nullopt;
      return aupr(value, label);
  }
  return std::nullopt;
}

struct SubjectGroups {
  std::vector<std::vector<std::size_t>> members;  // record indices per sorted subject id
};

SubjectGroups group_by_subject(std::span<const PredictionRecord> records) {
  const auto ids = distinct_subjects(records);
  SubjectGroups g;
  g.members.resize(ids.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto it = std::lower_bound(ids.begin(), ids.end(), records[i].subject_id);
    g.members[static_cast<std::size_t>(it - ids.begin())].push_back(i);
  }
  return g;
}

void check_bootstrap_options(std::span<const PredictionRecord> records, const BootstrapOptions& o) {
  if (records.empty()) throw Error(Errc::empty_input, "no records to bootstrap");
  if (o.n_resamples < 1) throw Error(Errc::invalid_argument, "need at least one resample");
  if (!(o.level > 0.0 && o.level < 1.0)) {
    throw Error(Errc::invalid_argument, "confidence level must be in (0,1)");
  }
  if (o.max_attempts < 1) throw Error(Errc::invalid_argument, "max_attempts must be >= 1");
}

// One resample; std::nullopt when every attempt leaves the metric undefined.
std::optional<double> draw_resample(const SubjectGroups& groups, const MetricColumns& cols,
                                    const MetricSpec& metric, const BootstrapOptions& o,
                                    std::size_t index) {
  const std::size_t k = groups.members.size();
  std::vector<double> value;
  std::vector<std::uint8_t> label;
  for (int attempt = 0; attempt < o.max_attempts; ++attempt) {
    std::mt19937_64 engine(derive_seed(o.seed, index, static_cast<std::uint64_t>(attempt)));
    value.clear();
    label.clear();
    for (std::size_t s = 0; s < k; ++s) {
      const auto& members = groups.members[static_cast<std::size_t>(engine() % k)];
      for (std::size_t i : members) {
        value.push_back(cols.value[i]);
        label.push_back(cols.label[i]);
      }
    }
    if (auto v = evaluate_columns(metric, value, label)) return v;
  }
  return std::nullopt;
}

[[noreturn]] void undefined_resample(const MetricSpec& metric, std::size_t index) {
  throw Error(Errc::metric_undefined_on_resample,
              metric.name() + " undefined on resample " + std::to_string(index) +
                  " after all redraws");
}

}  // namespace

std::optional<double> MetricSpec::try_evaluate(std::span<const PredictionRecord> records) const {
  const auto cols = metric_columns(records, *this);
  return evaluate_columns(*this, cols.value, cols.label);
}

double MetricSpec::evaluate(std::span<const PredictionRecord> records) const {
  if (records.empty()) throw Error(Errc::empty_input, "no records for " + name());
  if (auto v = try_evaluate(records)) return *v;
  throw Error(Errc::degenerate_labels, name() + " is undefined on these records");
}

std::vector<double> bootstrap_distribution(std::span<const PredictionRecord> records,
                                           const MetricSpec& metric,
                                           const BootstrapOptions& options) {
  check_bootstrap_options(records, options);
  const auto groups = group_by_subject(records);
  const auto cols = metric_columns(records, metric);
  const auto n = static_cast<std::size_t>(options.n_resamples);

  std::vector<double> values(n, 0.0);
  std::vector<std::uint8_t> ok(n, 0);
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    if (auto v = draw_resample(groups, cols, metric, options, idx)) {
      values[idx] = *v;
      ok[idx] = 1;
    }
  }
  if (auto bad = std::find(ok.begin(), ok.end(), 0); bad != ok.end()) {
    undefined_resample(metric, static_cast<std::size_t>(bad - ok.begin()));
  }
  std::sort(values.begin(), values.end());
  return values;
}

double percentile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw Error(Errc::empty_input, "percentile of empty sample");
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

ConfidenceInterval bootstrap_ci(std::span<const PredictionRecord> records, const MetricSpec& metric,
                                const BootstrapOptions& options) {
  const auto values = bootstrap_distribution(records, metric, options);
  const double tail = (1.0 - options.level) / 2.0;
  return ConfidenceInterval{percentile(values, tail), percentile(values, 1.0 - tail),
                            options.level};
}

CalibrationReport calibration_report(std::span<const PredictionRecord> records, int bins,
                                     std::span<const MetricSpec> ci_metrics,
                                     const BootstrapOptions& options) {
  if (records.empty()) throw Error(Errc::empty_input, "no records for calibration report");
  CalibrationReport report;
  report.n = records.size();
  report.bins = reliability_bins(records, bins);
  report.ece = ece(records, bins);
  report.brier = brier(records);
  for (int c = 0; c < kNumClasses; ++c) {
    const auto o = one_vs_rest(records, c);
    const std::size_t pos = count_positives(o.labels);
    if (pos == 0 || pos == o.labels.size()) continue;
    report.per_class_auroc[c] = auroc(o.scores, o.labels);
    report.per_class_aupr[c] = aupr(o.scores, o.labels);
  }
  for (const auto& m : ci_metrics) report.ci[m.name()] = bootstrap_ci(records, m, options);
  return report;
}

namespace reference {

std::vector<double> bootstrap_distribution(std::span<const PredictionRecord> records,
                                           const MetricSpec& metric,
                                           const BootstrapOptions& options) {
  check_bootstrap_options(records, options);
  const auto groups = group_by_subject(records);
  const auto cols = metric_columns(records, metric);
  std::vector<double> values;
  for (std::size_t i = 0; i < static_cast<std::size_t>(options.n_resamples); ++i) {
    auto v = draw_resample(groups, cols, metric, options, i);
    if (!v) undefined_resample(metric, i);
    values.push_back(*v);
  }
  std::sort(values.begin(), values.end());
  return values;
}

}  // namespace reference

}  // namespace adaptsr
