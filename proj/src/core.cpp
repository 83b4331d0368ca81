#include "adaptsr/core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include "adaptsr/error.hpp"
#include "json.hpp"

namespace adaptsr {

using Json = nlohmann::ordered_json;

namespace {

constexpr std::array<std::string_view, kNumClasses> kClassNames{
    "normal_driving", "texting", "phone_call", "reaching_behind",
    "adjusting_radio", "drinking", "drowsiness"};

constexpr std::array<std::string_view, 12> kRecordKeys{
    "subject_id", "clip_id",        "true_class",      "probs",
    "confidence", "criticality",    "blur",            "lighting",
    "artifact_score", "perceptual_loss", "ssim_vs_hr", "correct_by_level"};

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

}  // namespace

// Per-behavior accuracy of the resolution study: LR input, LR+CAR4X input, and
// the improvement column between them.
const std::array<double, kNumClasses> kLrClassAccuracy{0.357, 0.224, 0.203, 0.189,
                                                       0.197, 0.221, 0.147};
const std::array<double, kNumClasses> kCar4xClassAccuracy{0.421, 0.421, 0.375, 0.330,
                                                          0.368, 0.376, 0.410};
const std::array<double, kNumClasses> kCar4xImprovement{0.064, 0.197, 0.172, 0.141,
                                                        0.171, 0.155, 0.263};

ClassSet default_critical_set() {
  ClassSet set;
  set.set(static_cast<int>(Behavior::drowsiness));
  set.set(static_cast<int>(Behavior::phone_call));
  set.set(static_cast<int>(Behavior::texting));
  return set;
}

bool valid_class(int id) noexcept { return id >= 0 && id < kNumClasses; }

std::string_view class_name(int id) {
  if (!valid_class(id)) {
    throw Error(Errc::invalid_argument, "class id out of range: " + std::to_string(id));
  }
  return kClassNames[static_cast<std::size_t>(id)];
}

std::optional<int> class_id(std::string_view name) {
  for (int i = 0; i < kNumClasses; ++i) {
    if (kClassNames[static_cast<std::size_t>(i)] == name) return i;
  }
  return std::nullopt;
}

BehaviorClass behavior_class(int id, const ClassSet& critical) {
  return BehaviorClass{id, class_name(id), critical.test(static_cast<std::size_t>(id))};
}

std::string_view to_string(SRLevel level) noexcept {
  switch (level) {
    case SRLevel::None: return "none";
    case SRLevel::X2: return "2x";
    case SRLevel::X4: return "4x";
  }
  return "none";
}

std::optional<SRLevel> parse_level(std::string_view text) {
  for (SRLevel level : kAllLevels) {
    if (to_string(level) == text) return level;
  }
  return std::nullopt;
}

std::string_view to_string(GateReason reason) noexcept {
  switch (reason) {
    case GateReason::high_conf_skip: return "high_conf_skip";
    case GateReason::mid_conf_2x: return "mid_conf_2x";
    case GateReason::low_conf_4x: return "low_conf_4x";
    case GateReason::critical_4x: return "critical_4x";
    case GateReason::uncovered_default: return "uncovered_default";
    case GateReason::fixed_policy: return "fixed_policy";
  }
  return "high_conf_skip";
}

std::optional<GateReason> parse_reason(std::string_view text) {
  for (auto r : {GateReason::high_conf_skip, GateReason::mid_conf_2x, GateReason::low_conf_4x,
                 GateReason::critical_4x, GateReason::uncovered_default,
                 GateReason::fixed_policy}) {
    if (to_string(r) == text) return r;
  }
  return std::nullopt;
}

int predicted_class(const PredictionRecord& record) {
  if (record.probs.empty()) {
    throw Error(Errc::missing_probs, "record " + record.clip_id + " has no probs");
  }
  auto it = std::max_element(record.probs.begin(), record.probs.end());
  return static_cast<int>(it - record.probs.begin());
}

bool is_correct(const PredictionRecord& record) {
  return predicted_class(record) == record.true_class;
}

std::vector<double> spread_probs(int predicted, double confidence, int num_classes) {
  std::vector<double> probs(static_cast<std::size_t>(num_classes),
                            (1.0 - confidence) / static_cast<double>(num_classes - 1));
  probs[static_cast<std::size_t>(predicted)] = confidence;
  return probs;
}

std::vector<Violation> validate_record(const PredictionRecord& r) {
  std::vector<Violation> out;
  auto add = [&out](std::string field, std::string rule) {
    out.push_back({std::move(field), std::move(rule)});
  };

  if (r.subject_id.empty()) add("subject_id", "must be non-empty");
  if (!valid_class(r.true_class)) add("true_class", "must be in 0..6");
  if (!in_unit(r.confidence)) add("confidence", "must be in [0,1]");
  if (r.criticality != 0 && r.criticality != 1) add("criticality", std::string(kRuleCriticality));
  if (!(r.blur >= 0.0) || !std::isfinite(r.blur)) add("blur", "must be finite and >= 0");
  if (!in_unit(r.lighting)) add("lighting", "must be in [0,1]");

  if (!r.probs.empty()) {
    bool entries_ok = true;
    if (r.probs.size() != static_cast<std::size_t>(kNumClasses)) {
      add("probs", "must have 7 entries");
      entries_ok = false;
    }
    for (double p : r.probs) {
      if (!in_unit(p)) {
        add("probs", "entries must be in [0,1]");
        entries_ok = false;
        break;
      }
    }
    const double sum = std::accumulate(r.probs.begin(), r.probs.end(), 0.0);
    if (!(std::abs(sum - 1.0) <= kProbSumTolerance)) {
      add("probs", std::string(kRuleProbSum));
      entries_ok = false;
    }
    const double top = *std::max_element(r.probs.begin(), r.probs.end());
    if (!(std::abs(top - r.confidence) <= kProbSumTolerance)) {
      add("confidence", std::string(kRuleConfidenceTop1));
    }
    if (entries_ok && r.correct_by_level && valid_class(r.true_class)) {
      const int lr_correct = predicted_class(r) == r.true_class ? 1 : 0;
      if ((*r.correct_by_level)[0] != lr_correct) {
        add("correct_by_level", "entry for level none must match top-1 correctness");
      }
    }
  }

  if (r.artifact_score && !in_unit(*r.artifact_score)) add("artifact_score", "must be in [0,1]");
  if (r.perceptual_loss && !(*r.perceptual_loss >= 0.0)) add("perceptual_loss", "must be >= 0");
  if (r.ssim_vs_hr && !(*r.ssim_vs_hr >= -1.0 && *r.ssim_vs_hr <= 1.0)) {
    add("ssim_vs_hr", "must be in [-1,1]");
  }
  if (r.correct_by_level) {
    for (int v : *r.correct_by_level) {
      if (v != 0 && v != 1) {
        add("correct_by_level", "entries must be 0 or 1");
        break;
      }
    }
  }
  return out;
}

namespace {

[[noreturn]] void malformed(std::size_t line_no, const std::string& why) {
  throw Error(Errc::malformed_record, why, line_no);
}

double number_field(const Json& obj, std::string_view key, std::size_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end()) malformed(line_no, "missing field '" + std::string(key) + "'");
  if (!it->is_number()) malformed(line_no, "field '" + std::string(key) + "' must be a number");
  return it->get<double>();
}

std::optional<double> optional_number(const Json& obj, std::string_view key, std::size_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_number()) malformed(line_no, "field '" + std::string(key) + "' must be a number");
  return it->get<double>();
}

std::string string_field(const Json& obj, std::string_view key, std::size_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end()) malformed(line_no, "missing field '" + std::string(key) + "'");
  if (!it->is_string()) malformed(line_no, "field '" + std::string(key) + "' must be a string");
  return it->get<std::string>();
}

void warn(const IngestOptions& options, const std::string& message) {
  if (options.on_warning) {
    options.on_warning(message);
  } else {
    std::cerr << "warning: " << message << '\n';
  }
}

}  // namespace

PredictionRecord parse_record_line(std::string_view line, std::size_t line_no,
                                   const IngestOptions& options) {
  Json obj;
  try {
    obj = Json::parse(line);
  } catch (const Json::parse_error& e) {
    malformed(line_no, std::string("not valid JSON: ") + e.what());
  }
  if (!obj.is_object()) malformed(line_no, "record must be a JSON object");

  for (const auto& [key, value] : obj.items()) {
    if (std::find(kRecordKeys.begin(), kRecordKeys.end(), key) == kRecordKeys.end()) {
      if (options.strict) malformed(line_no, "unknown key '" + key + "'");
      warn(options, "line " + std::to_string(line_no) + ": ignoring unknown key '" + key + "'");
    }
  }

  PredictionRecord r;
  r.subject_id = string_field(obj, "subject_id", line_no);
  r.clip_id = string_field(obj, "clip_id", line_no);

  auto cls = obj.find("true_class");
  if (cls == obj.end()) malformed(line_no, "missing field 'true_class'");
  if (cls->is_number_integer()) {
    r.true_class = cls->get<int>();
  } else if (cls->is_string()) {
    auto id = class_id(cls->get<std::string>());
    if (!id) malformed(line_no, "unknown behavior '" + cls->get<std::string>() + "'");
    r.true_class = *id;
  } else {
    malformed(line_no, "field 'true_class' must be an integer id or behavior name");
  }

  if (auto probs = obj.find("probs"); probs != obj.end() && !probs->is_null()) {
    if (!probs->is_array()) malformed(line_no, "field 'probs' must be an array");
    for (const auto& v : *probs) {
      if (!v.is_number()) malformed(line_no, "field 'probs' must contain numbers");
      r.probs.push_back(v.get<double>());
    }
  }

  r.confidence = number_field(obj, "confidence", line_no);
  auto crit = obj.find("criticality");
  if (crit == obj.end()) malformed(line_no, "missing field 'criticality'");
  if (!crit->is_number_integer()) malformed(line_no, "field 'criticality' must be an integer");
  r.criticality = crit->get<int>();
  r.blur = number_field(obj, "blur", line_no);
  r.lighting = number_field(obj, "lighting", line_no);
  r.artifact_score = optional_number(obj, "artifact_score", line_no);
  r.perceptual_loss = optional_number(obj, "perceptual_loss", line_no);
  r.ssim_vs_hr = optional_number(obj, "ssim_vs_hr", line_no);

  if (auto cbl = obj.find("correct_by_level"); cbl != obj.end() && !cbl->is_null()) {
    if (!cbl->is_array() || cbl->size() != static_cast<std::size_t>(kNumLevels)) {
      malformed(line_no, "field 'correct_by_level' must be an array of 3 integers");
    }
    std::array<int, kNumLevels> outcomes{};
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      if (!(*cbl)[i].is_number_integer()) {
        malformed(line_no, "field 'correct_by_level' must contain integers");
      }
      outcomes[i] = (*cbl)[i].get<int>();
    }
    r.correct_by_level = outcomes;
  }

  const auto violations = validate_record(r);
  if (!violations.empty()) {
    for (const auto& v : violations) {
      if (v.rule == kRuleProbSum) {
        throw Error(Errc::prob_sum_violation, "probs of clip '" + r.clip_id + "' do not sum to 1",
                    line_no);
      }
    }
    std::string reason;
    for (const auto& v : violations) {
      if (!reason.empty()) reason += "; ";
      reason += v.field + ": " + v.rule;
    }
    malformed(line_no, reason);
  }
  return r;
}

std::string format_record_line(const PredictionRecord& r) {
  Json obj;
  obj["subject_id"] = r.subject_id;
  obj["clip_id"] = r.clip_id;
  obj["true_class"] = r.true_class;
  obj["probs"] = r.probs;
  obj["confidence"] = r.confidence;
  obj["criticality"] = r.criticality;
  obj["blur"] = r.blur;
  obj["lighting"] = r.lighting;
  if (r.artifact_score) obj["artifact_score"] = *r.artifact_score;
  if (r.perceptual_loss) obj["perceptual_loss"] = *r.perceptual_loss;
  if (r.ssim_vs_hr) obj["ssim_vs_hr"] = *r.ssim_vs_hr;
  if (r.correct_by_level) obj["correct_by_level"] = *r.correct_by_level;
  return obj.dump();
}

std::vector<PredictionRecord> read_log(std::istream& in, const IngestOptions& options) {
  std::vector<PredictionRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    records.push_back(parse_record_line(line, line_no, options));
  }
  if (records.empty()) throw Error(Errc::empty_log, "log contains no records");
  return records;
}

std::vector<PredictionRecord> ingest_log(const std::filesystem::path& path,
                                         const IngestOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_failure, "cannot open log '" + path.string() + "'");
  return read_log(in, options);
}

void write_log(std::span<const PredictionRecord> records, std::ostream& out) {
  for (const auto& r : records) out << format_record_line(r) << '\n';
}

void write_log(std::span<const PredictionRecord> records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_failure, "cannot write log '" + path.string() + "'");
  write_log(records, out);
  if (!out) throw Error(Errc::io_failure, "write failed for '" + path.string() + "'");
}

std::vector<std::string> distinct_subjects(std::span<const PredictionRecord> records) {
  std::set<std::string> ids;
  for (const auto& r : records) ids.insert(r.subject_id);
  return {ids.begin(), ids.end()};
}

DeltaAccTable DeltaAccTable::defaults() {
  DeltaAccTable table;
  for (int c = 0; c < kNumClasses; ++c) {
    const double gain = kCar4xImprovement[static_cast<std::size_t>(c)];
    table.set(c, SRLevel::X4, gain);
    table.set(c, SRLevel::X2, 0.5 * gain);
  }
  return table;
}

void DeltaAccTable::set(int cls, SRLevel level, double gain) {
  if (!valid_class(cls)) throw Error(Errc::invalid_argument, "class id out of range");
  if (level == SRLevel::None) {
    if (gain != 0.0) throw Error(Errc::invalid_argument, "gain for level none must be 0");
    return;
  }
  if (!(gain >= -1.0 && gain <= 1.0)) {
    throw Error(Errc::invalid_argument, "accuracy gain must be in [-1,1]");
  }
  gains_[static_cast<std::size_t>(cls)][static_cast<std::size_t>(level_index(level))] = gain;
}

void DeltaAccTable::erase(int cls, SRLevel level) {
  if (!valid_class(cls)) throw Error(Errc::invalid_argument, "class id out of range");
  gains_[static_cast<std::size_t>(cls)][static_cast<std::size_t>(level_index(level))].reset();
}

bool DeltaAccTable::contains(int cls, SRLevel level) const {
  if (level == SRLevel::None) return valid_class(cls);
  return valid_class(cls) &&
         gains_[static_cast<std::size_t>(cls)][static_cast<std::size_t>(level_index(level))]
             .has_value();
}

double DeltaAccTable::at(int cls, SRLevel level) const {
  if (!valid_class(cls)) throw Error(Errc::invalid_argument, "class id out of range");
  if (level == SRLevel::None) return 0.0;
  const auto& entry =
      gains_[static_cast<std::size_t>(cls)][static_cast<std::size_t>(level_index(level))];
  if (!entry) {
    throw Error(Errc::missing_table_entry, "no accuracy gain for (" +
                                               std::string(class_name(cls)) + ", " +
                                               std::string(to_string(level)) + ")");
  }
  return *entry;
}

bool DeltaAccTable::complete() const {
  for (int c = 0; c < kNumClasses; ++c) {
    for (SRLevel level : kAllLevels) {
      if (!contains(c, level)) return false;
    }
  }
  return true;
}

void UtilityParams::validate() const {
  if (!(lambda >= 0.0)) throw Error(Errc::invalid_argument, "lambda must be >= 0");
  if (!(w_crit >= 1.0)) throw Error(Errc::invalid_argument, "w_crit must be >= 1");
  if (w_normal != 1.0) throw Error(Errc::invalid_argument, "w_normal is fixed at 1.0");
  if (!delta_acc.complete()) {
    throw Error(Errc::missing_table_entry, "delta_acc table must cover every (class, level)");
  }
  if (w_crit > w_normal && critical.none()) {
    throw Error(Errc::invalid_argument, "critical class set is empty while w_crit > 1");
  }
}

}  // namespace adaptsr
