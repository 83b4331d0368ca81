#pragma once

#include <array>
#include <bitset>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace adaptsr {

inline constexpr int kNumClasses = 7;
inline constexpr int kNumLevels = 3;

// Behavior ids are fixed; names are the snake_case keys used in logs and configs.
enum class Behavior : int {
  normal_driving = 0,
  texting = 1,
  phone_call = 2,
  reaching_behind = 3,
  adjusting_radio = 4,
  drinking = 5,
  drowsiness = 6,
};

using ClassSet = std::bitset<kNumClasses>;

struct BehaviorClass {
  int id = 0;
  std::string_view name;
  bool critical = false;
};

/// Drowsiness, phone call and texting.
ClassSet default_critical_set();

std::string_view class_name(int id);
std::optional<int> class_id(std::string_view name);
BehaviorClass behavior_class(int id, const ClassSet& critical = default_critical_set());
bool valid_class(int id) noexcept;

enum class SRLevel : int { None = 0, X2 = 1, X4 = 2 };

inline constexpr std::array<SRLevel, kNumLevels> kAllLevels{SRLevel::None, SRLevel::X2, SRLevel::X4};

constexpr int level_index(SRLevel level) noexcept { return static_cast<int>(level); }
std::string_view to_string(SRLevel level) noexcept;
std::optional<SRLevel> parse_level(std::string_view text);

/// One classifier observation on one clip, as emitted by the upstream pipeline.
///
/// `probs` may be empty when the producer only reports a confidence. `criticality`
/// is kept as a plain integer so that out-of-range values survive ingestion and are
/// reported by validate_record instead of being silently coerced.
/// `correct_by_level`, when present, holds the 0/1 correctness outcome the
/// classifier achieves at each SR level (index = level_index).
struct PredictionRecord {
  std::string subject_id;
  std::string clip_id;
  int true_class = 0;
  std::vector<double> probs;
  double confidence = 0.0;
  int criticality = 0;
  double blur = 0.0;
  double lighting = 0.0;
  std::optional<double> artifact_score;
  std::optional<double> perceptual_loss;
  std::optional<double> ssim_vs_hr;
  std::optional<std::array<int, kNumLevels>> correct_by_level;

  bool operator==(const PredictionRecord&) const = default;
};

/// Index of the largest probability (first on ties). Throws MissingProbs.
int predicted_class(const PredictionRecord& record);
bool is_correct(const PredictionRecord& record);

/// Probability vector with `confidence` on `predicted` and the remainder spread
/// evenly over the other classes.
std::vector<double> spread_probs(int predicted, double confidence, int num_classes = kNumClasses);

struct Violation {
  std::string field;
  std::string rule;

  bool operator==(const Violation&) const = default;
};

inline constexpr double kProbSumTolerance = 1e-9;
inline constexpr std::string_view kRuleProbSum = "probs must sum to 1";
inline constexpr std::string_view kRuleConfidenceTop1 = "confidence≠top1";
inline constexpr std::string_view kRuleCriticality = "criticality not in {0,1}";

std::vector<Violation> validate_record(const PredictionRecord& record);

struct IngestOptions {
  bool strict = true;
  // Receives non-fatal diagnostics (unknown keys in lenient mode). Defaults to stderr.
  std::function<void(const std::string&)> on_warning;
};

PredictionRecord parse_record_line(std::string_view line, std::size_t line_no,
                                   const IngestOptions& options = {});
std::string format_record_line(const PredictionRecord& record);

std::vector<PredictionRecord> read_log(std::istream& in, const IngestOptions& options = {});
std::vector<PredictionRecord> ingest_log(const std::filesystem::path& path,
                                         const IngestOptions& options = {});
void write_log(std::span<const PredictionRecord> records, std::ostream& out);
void write_log(std::span<const PredictionRecord> records, const std::filesystem::path& path);

/// Sorted, de-duplicated subject ids.
std::vector<std::string> distinct_subjects(std::span<const PredictionRecord> records);

enum class GateReason {
  high_conf_skip,
  mid_conf_2x,
  low_conf_4x,
  critical_4x,
  uncovered_default,
  fixed_policy,
};

std::string_view to_string(GateReason reason) noexcept;
std::optional<GateReason> parse_reason(std::string_view text);

struct GateDecision {
  SRLevel level = SRLevel::None;
  double tau_used = 0.0;
  std::array<double, kNumLevels> utility_by_level{};
  GateReason reason = GateReason::high_conf_skip;

  bool operator==(const GateDecision&) const = default;
};

// Expected accuracy gain per (class, level). Level None is pinned to zero.
class DeltaAccTable {
 public:
  /// X4 gains are the LR -> LR+CAR4X improvements per behavior; X2 gains are
  /// half of those.
  static DeltaAccTable defaults();

  void set(int cls, SRLevel level, double gain);
  void erase(int cls, SRLevel level);
  bool contains(int cls, SRLevel level) const;
  /// Throws MissingTableEntry for absent non-None entries.
  double at(int cls, SRLevel level) const;
  bool complete() const;

  bool operator==(const DeltaAccTable&) const = default;

 private:
  std::array<std::array<std::optional<double>, kNumLevels>, kNumClasses> gains_{};
};

/// Per-behavior top-1 accuracy of the LR-trained classifier and of the same
/// classifier on CAR4X-enhanced input.
extern const std::array<double, kNumClasses> kLrClassAccuracy;
extern const std::array<double, kNumClasses> kCar4xClassAccuracy;
extern const std::array<double, kNumClasses> kCar4xImprovement;

struct UtilityParams {
  double lambda = 0.3;
  double w_crit = 2.5;
  double w_normal = 1.0;
  DeltaAccTable delta_acc = DeltaAccTable::defaults();
  ClassSet critical = default_critical_set();

  double weight(int criticality) const noexcept { return criticality == 1 ? w_crit : w_normal; }
  void validate() const;

  bool operator==(const UtilityParams&) const = default;
};

}  // namespace adaptsr
