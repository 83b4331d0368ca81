#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adaptsr/artifact_guard.hpp"
#include "adaptsr/calibration.hpp"
#include "adaptsr/core.hpp"
#include "adaptsr/gating.hpp"
#include "adaptsr/resource.hpp"
#include "json.hpp"

namespace adaptsr {

struct TruncatedNormal {
  double mean = 0.5;
  double sd = 0.1;

  bool operator==(const TruncatedNormal&) const = default;
};

/// Normal(mean, sd) conditioned on [lo, hi], drawn by rejection.
double sample_truncated_normal(const TruncatedNormal& dist, double lo, double hi,
                               std::mt19937_64& engine);

/// Single truncated normal, or a two-component mixture drawing `first` with
/// probability `mix`.
struct ConfidenceDistribution {
  TruncatedNormal first;
  std::optional<TruncatedNormal> second;
  double mix = 1.0;

  bool operator==(const ConfidenceDistribution&) const = default;
};

struct BehaviorConfidenceModel {
  std::array<ConfidenceDistribution, kNumClasses> classes{};
  // P(correct | confidence p) = clamp(p - miscalibration, 0, 1).
  double miscalibration = 0.0;
  // Confidences are drawn on [confidence_floor, 1]. The floor keeps the
  // confidence the top-1 probability after the guard discount.
  double confidence_floor = 0.17;

  /// Normal driving N(0.87, 0.12); drowsiness with sd 0.23; phone call a 50/50
  /// mixture of N(0.55, 0.10) and N(0.85, 0.08); the rest moderate unimodal.
  static BehaviorConfidenceModel defaults();
  void validate() const;
  double correctness_probability(double p) const noexcept;
  double sample(int cls, std::mt19937_64& engine) const;

  bool operator==(const BehaviorConfidenceModel&) const = default;
};

/// How often SR hallucinates on a clip and what the detector reports.
struct ArtifactModel {
  double rate = 0.112;
  TruncatedNormal detector_hallucinated{0.78, 0.15};
  TruncatedNormal detector_clean{0.20, 0.15};

  void validate() const;
  bool operator==(const ArtifactModel&) const = default;
};

/// Synthetic link between SR and the classifier: SR multiplies the odds of a
/// correct prediction by a per-class uplift, and a hallucinating SR output
/// produces a confident prediction of `hallucination_target`.
struct SrEffectModel {
  std::array<std::array<double, kNumLevels>, kNumClasses> odds_uplift{};
  bool hallucination = true;
  double inflation = 0.6;
  int hallucination_target = static_cast<int>(Behavior::drowsiness);

  /// X4 uplift = odds(LR+CAR4X accuracy) / odds(LR accuracy) per behavior;
  /// X2 uplift is its square root.
  static SrEffectModel defaults();
  void validate() const;
  /// Correctness probability at `level` given the no-SR probability.
  double correctness_at(int cls, SRLevel level, double q_none) const;

  bool operator==(const SrEffectModel&) const = default;
};

struct Scenario {
  BehaviorConfidenceModel confidence = BehaviorConfidenceModel::defaults();
  ArtifactModel artifacts;
  SrEffectModel sr_effect = SrEffectModel::defaults();
  ClassSet critical = default_critical_set();

  void validate() const;
  bool operator==(const Scenario&) const = default;
};

/// Synthetic prediction log: n_per_class records per behavior, assigned to
/// subjects round-robin ("S01", "S02", ...). Deterministic in `seed`.
std::vector<PredictionRecord> sample_stream(const Scenario& scenario, int n_per_class,
                                            int n_subjects, std::uint64_t seed);

struct Fold {
  std::string test_subject;
  std::vector<std::string> train_subjects;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
};

/// One fold per subject, ordered by subject id. Throws TooFewSubjects below 2.
std::vector<Fold> loso_splits(std::span<const PredictionRecord> records);

enum class Policy { fixed_none, fixed_4x, gate, gate_adaptive };

std::string_view to_string(Policy policy) noexcept;
std::optional<Policy> parse_policy(std::string_view text);

struct ExperimentConfig {
  Thresholds thresholds;
  AdaptiveTauConfig adaptive;
  UtilityParams utility;
  CostProfile costs = CostProfile::defaults();
  bool guard_enabled = true;
  GuardConfig guard;
  Scenario scenario;
  int bins = 10;
  int n_resamples = 1000;
  double ci_level = 0.95;
  // Re-optimize tau_low/tau_high on each fold's training subjects.
  bool tune_thresholds = false;
  double grid_step = 0.05;

  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

inline constexpr std::string_view kCriticalFpDefinition =
    "non-critical ground truth predicted as a critical class with final confidence > 0.5";

bool is_critical_false_positive(const PredictionRecord& final_record, const ClassSet& critical);

/// Level chosen for `record` under `policy`; fixed policies report reason
/// fixed_policy. utility_by_level is always filled from the confidence heuristic.
GateDecision decide(const PredictionRecord& record, Policy policy, const Thresholds& thresholds,
                    const ExperimentConfig& cfg);

/// Everything that happened to one record under a policy.
struct RecordTrace {
  GateDecision decision;
  std::optional<GuardOutcome> guard;
  bool hallucinated = false;
  PredictionRecord final_record;
};

RecordTrace run_record(const PredictionRecord& record, Policy policy, const Thresholds& thresholds,
                       const ExperimentConfig& cfg);

struct GuardStats {
  std::size_t sr_records = 0;
  std::size_t evaluated = 0;
  std::size_t triggered = 0;
  double trigger_rate = 0.0;
  std::size_t hallucinated_sr = 0;
  std::size_t critical_fp = 0;
  double critical_fp_rate = 0.0;
  std::string critical_fp_definition{kCriticalFpDefinition};

  bool operator==(const GuardStats&) const = default;
};

struct FoldResult {
  std::string test_subject;
  std::size_t n = 0;
  double tau_low = 0.0;
  double tau_high = 0.0;
  double ece = 0.0;
  double brier = 0.0;
  double mean_gflops = 0.0;
  std::size_t critical_fp = 0;
  std::array<std::size_t, kNumLevels> histogram{};

  bool operator==(const FoldResult&) const = default;
};

inline constexpr int kReportSchemaVersion = 1;

struct ExperimentReport {
  std::string policy;
  CalibrationReport calibration;
  CostSummary cost;
  GuardStats guard;
  std::vector<FoldResult> folds;
  std::uint64_t seed = 0;
  nlohmann::ordered_json config;

  bool operator==(const ExperimentReport&) const = default;
};

struct ExperimentRun {
  ExperimentReport report;
  std::vector<RecordTrace> traces;  // in record order
};

/// LOSO evaluation of one policy. Bootstrap intervals cover ECE and the AUPR of
/// each critical class. The result depends only on the inputs, not on the
/// OpenMP thread count.
ExperimentRun run_experiment_traced(std::span<const PredictionRecord> records, Policy policy,
                                    const ExperimentConfig& cfg, std::uint64_t seed);
ExperimentReport run_experiment(std::span<const PredictionRecord> records, Policy policy,
                                const ExperimentConfig& cfg, std::uint64_t seed);

nlohmann::ordered_json report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const nlohmann::ordered_json& json);
void write_report(const ExperimentReport& report, const std::filesystem::path& path);
ExperimentReport read_report(const std::filesystem::path& path);

namespace reference {

/// Folds evaluated one after another.
ExperimentReport run_experiment(std::span<const PredictionRecord> records, Policy policy,
                                const ExperimentConfig& cfg, std::uint64_t seed);

}  // namespace reference

}  // namespace adaptsr
