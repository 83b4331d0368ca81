#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adaptsr/core.hpp"

namespace adaptsr {

struct ReliabilityBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  double mean_conf = 0.0;  // 0 for empty bins
  double accuracy = 0.0;   // 0 for empty bins

  bool operator==(const ReliabilityBin&) const = default;
};

struct ConfidenceInterval {
  double lo = 0.0;
  double hi = 0.0;
  double level = 0.95;

  bool operator==(const ConfidenceInterval&) const = default;
};

struct CalibrationReport {
  double ece = 0.0;
  double brier = 0.0;
  std::vector<ReliabilityBin> bins;
  std::map<int, double> per_class_auroc;
  std::map<int, double> per_class_aupr;
  std::size_t n = 0;
  std::map<std::string, ConfidenceInterval> ci;

  bool operator==(const CalibrationReport&) const = default;
};

/// Bin of a confidence among M equal-width bins: bin 0 is [0, 1/M], bin m is
/// (m/M, (m+1)/M].
std::size_t bin_index(double confidence, int bins);

std::vector<ReliabilityBin> reliability_bins(std::span<const PredictionRecord> records, int bins = 10);
double ece(std::span<const PredictionRecord> records, int bins = 10);
/// Mean squared distance between probs and the one-hot true label (range [0,2]).
double brier(std::span<const PredictionRecord> records);

// Column forms used by the record overloads and by the bootstrap.
std::vector<ReliabilityBin> reliability_bins(std::span<const double> confidence,
                                             std::span<const std::uint8_t> correct, int bins);
double ece(std::span<const double> confidence, std::span<const std::uint8_t> correct, int bins);
double brier_term(const PredictionRecord& record);

/// Mann-Whitney AUROC, ties credited 1/2.
double auroc(std::span<const double> scores, std::span<const std::uint8_t> labels);
/// Average precision over the descending-score sweep; tied scores form one step.
double aupr(std::span<const double> scores, std::span<const std::uint8_t> labels);

struct PrPoint {
  double threshold = 0.0;
  double recall = 0.0;
  double precision = 0.0;
};

/// One point per distinct score, descending.
std::vector<PrPoint> pr_curve(std::span<const double> scores, std::span<const std::uint8_t> labels);

struct OneVsRest {
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
};

OneVsRest one_vs_rest(std::span<const PredictionRecord> records, int cls);

enum class MetricKind { ece, brier, auroc, aupr };

struct MetricSpec {
  MetricKind kind = MetricKind::ece;
  int cls = -1;  // auroc / aupr only
  int bins = 10;

  /// "ece", "brier", "auroc_<class>", "aupr_<class>".
  std::string name() const;
  /// std::nullopt when the metric is undefined on `records` (e.g. no positives).
  std::optional<double> try_evaluate(std::span<const PredictionRecord> records) const;
  double evaluate(std::span<const PredictionRecord> records) const;
};

std::optional<MetricSpec> parse_metric(const std::string& name, int bins = 10);

struct BootstrapOptions {
  int n_resamples = 1000;
  double level = 0.95;
  std::uint64_t seed = 0;
  // Redraws allowed per resample when the metric is undefined on it.
  int max_attempts = 10;
};

/// Subject-level bootstrap: resample i draws n_subjects subject indices with
/// replacement from std::mt19937_64(derive_seed(seed, i, attempt)) as
/// engine() % n_subjects over the sorted subject ids, concatenating each drawn
/// subject's records in log order. Returned values are sorted ascending.
std::vector<double> bootstrap_distribution(std::span<const PredictionRecord> records,
                                           const MetricSpec& metric,
                                           const BootstrapOptions& options);

/// Linear interpolation between order statistics at position q * (n - 1).
double percentile(std::span<const double> sorted, double q);

/// Percentile interval of bootstrap_distribution.
ConfidenceInterval bootstrap_ci(std::span<const PredictionRecord> records, const MetricSpec& metric,
                                const BootstrapOptions& options);

/// ECE, Brier, bins and one-vs-rest AUROC/AUPR for every class with both
/// labels present, plus bootstrap intervals for `ci_metrics`.
CalibrationReport calibration_report(std::span<const PredictionRecord> records, int bins,
                                     std::span<const MetricSpec> ci_metrics,
                                     const BootstrapOptions& options);

namespace reference {

std::vector<double> bootstrap_distribution(std::span<const PredictionRecord> records,
                                           const MetricSpec& metric,
                                           const BootstrapOptions& options);

}  // namespace reference

}  // namespace adaptsr
