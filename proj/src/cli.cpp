#include "adaptsr/cli.hpp"

#include <charconv>
#include <cstdint>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <vector>

#include "CLI11.hpp"
#include "adaptsr/artifact_guard.hpp"
#include "adaptsr/calibration.hpp"
#include "adaptsr/core.hpp"
#include "adaptsr/gating.hpp"
#include "adaptsr/parallel.hpp"
#include "adaptsr/quality.hpp"
#include "adaptsr/resource.hpp"
#include "adaptsr/simharness.hpp"

namespace adaptsr::cli {

namespace {

constexpr std::array<Command, 8> kCommands{Command::quality,  Command::gate,   Command::calibrate,
                                           Command::guard,    Command::sweep,  Command::pareto,
                                           Command::simulate, Command::loso_eval};

constexpr unsigned bit(Command c) { return 1u << static_cast<unsigned>(c); }

constexpr unsigned Q = bit(Command::quality);
constexpr unsigned G = bit(Command::gate);
constexpr unsigned C = bit(Command::calibrate);
constexpr unsigned U = bit(Command::guard);
constexpr unsigned S = bit(Command::sweep);
constexpr unsigned P = bit(Command::pareto);
constexpr unsigned M = bit(Command::simulate);
constexpr unsigned L = bit(Command::loso_eval);

enum class Kind { num, integer, seed, boolean, str, str_list, classes, costs, delta_acc, scenario };

struct KeySpec {
  std::string key;
  Kind kind;
  unsigned commands;
  std::string help;
};

// Usage and config problems; mapped to kExitUsage.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs{
      {"log", Kind::str, G | C | U | S | L, "prediction log (one JSON record per line)"},
      {"strict", Kind::boolean, G | C | U | S | L, "reject unknown record keys (false: warn)"},
      {"images", Kind::str_list, Q, "PGM images to measure"},
      {"reference_image", Kind::str, Q, "PGM image each input is compared to with SSIM"},
      {"sr_frames", Kind::str_list, Q, "SR clip frames for the artifact heuristic"},
      {"lr_frames", Kind::str_list, Q, "upsampled LR clip frames for the artifact heuristic"},
      {"methods", Kind::str, P, "CSV with header name,accuracy,cost,fps,power_w"},
      {"baseline", Kind::str, P, "method whose accuracy is subtracted (default: first row)"},
      {"reference", Kind::str, P, "method efficiencies are normalized to (default: first non-baseline row)"},
      {"seed", Kind::seed, C | M | L, "seed for all randomness (required)"},
      {"policy", Kind::str, G | U | L, "fixed_none | fixed_4x | gate | gate_adaptive"},
      {"tau_low", Kind::num, G | U | S | L, "4x below this confidence"},
      {"tau_high", Kind::num, G | U | S | L, "no SR above this confidence"},
      {"critical_cut", Kind::num, G | U | S | L, "critical records below this get 4x"},
      {"tau_base", Kind::num, G | U | L, "adaptive tau intercept"},
      {"alpha_blur", Kind::num, G | U | L, "adaptive tau blur coefficient"},
      {"alpha_light", Kind::num, G | U | L, "adaptive tau lighting coefficient"},
      {"clamp_lo", Kind::num, G | U | L, "adaptive tau lower clamp"},
      {"clamp_hi", Kind::num, G | U | L, "adaptive tau upper clamp"},
      {"blur_ref", Kind::num, Q | G | U | L, "Laplacian variance that normalizes to 1"},
      {"lambda", Kind::num, G | U | S | L, "cost weight in the utility"},
      {"w_crit", Kind::num, G | U | S | L, "weight of critical behaviors"},
      {"w_normal", Kind::num, G | U | S | L, "weight of other behaviors"},
      {"critical_classes", Kind::classes, C | G | U | S | L, "behavior classes treated as critical"},
      {"delta_acc", Kind::delta_acc, G | U | S | L, "accuracy gain table (JSON)"},
      {"costs", Kind::costs, G | U | S | L, "per-level cost profile (JSON)"},
      {"bins", Kind::integer, C | L, "reliability bins"},
      {"resamples", Kind::integer, C | L, "bootstrap resamples"},
      {"ci_level", Kind::num, C | L, "bootstrap interval level"},
      {"metrics", Kind::str_list, C, "metrics given bootstrap intervals"},
      {"guard", Kind::boolean, L, "enable the artifact guard"},
      {"guard_threshold", Kind::num, U | L, "artifact probability that triggers the guard"},
      {"guard_discount", Kind::num, U | L, "confidence discount on trigger"},
      {"guard_mode", Kind::str, U | L, "relative | absolute discount"},
      {"grid_step", Kind::num, S | L, "threshold search grid step"},
      {"rel_range", Kind::num, S, "relative threshold perturbation"},
      {"sweep_steps", Kind::integer, S, "sweep points per threshold"},
      {"tune_thresholds", Kind::boolean, L, "re-optimize thresholds on each training fold"},
      {"n_per_class", Kind::integer, M, "records per behavior class"},
      {"n_subjects", Kind::integer, M, "number of subjects"},
      {"scenario", Kind::scenario, M | L, "simulator scenario (JSON)"},
      {"format", Kind::str, Q | G | C | U | S | P | M | L, "csv: report plus plot data; report: report only"},
  };
  return specs;
}

const KeySpec* find_spec(std::string_view key) {
  for (const auto& s : key_specs()) {
    if (s.key == key) return &s;
  }
  return nullptr;
}

std::string flag_name(const std::string& key) {
  std::string f = "--" + key;
  std::replace(f.begin(), f.end(), '_', '-');
  return f;
}

Json default_value(const KeySpec& s, Command cmd) {
  static const ExperimentConfig d;
  const std::string& k = s.key;
  if (k == "log" || k == "reference_image" || k == "methods" || k == "baseline" || k == "reference") {
    return "";
  }
  if (k == "strict") return true;
  if (k == "images" || k == "sr_frames" || k == "lr_frames") return Json::array();
  if (k == "seed") return nullptr;
  if (k == "policy") return "gate";
  if (k == "tau_low") return d.thresholds.tau_low;
  if (k == "tau_high") return d.thresholds.tau_high;
  if (k == "critical_cut") return d.thresholds.critical_cut;
  if (k == "tau_base") return d.adaptive.tau_base;
  if (k == "alpha_blur") return d.adaptive.alpha_blur;
  if (k == "alpha_light") return d.adaptive.alpha_light;
  if (k == "clamp_lo") return d.adaptive.clamp_lo;
  if (k == "clamp_hi") return d.adaptive.clamp_hi;
  if (k == "blur_ref") return d.adaptive.blur_ref;
  if (k == "lambda") return d.utility.lambda;
  if (k == "w_crit") return d.utility.w_crit;
  if (k == "w_normal") return d.utility.w_normal;
  if (k == "critical_classes") return class_set_json(d.utility.critical);
  if (k == "delta_acc") return Json(d.utility.delta_acc);
  if (k == "costs") return Json(d.costs);
  if (k == "bins") return d.bins;
  if (k == "resamples") return d.n_resamples;
  if (k == "ci_level") return d.ci_level;
  if (k == "metrics") {
    return Json::array({"ece", "brier", "aupr_texting", "aupr_phone_call", "aupr_drowsiness"});
  }
  if (k == "guard") return d.guard_enabled;
  if (k == "guard_threshold") return d.guard.threshold;
  if (k == "guard_discount") return d.guard.discount;
  if (k == "guard_mode") return std::string(to_string(d.guard.mode));
  if (k == "grid_step") return d.grid_step;
  if (k == "rel_range") return 0.25;
  if (k == "sweep_steps") return 5;
  if (k == "tune_thresholds") return d.tune_thresholds;
  if (k == "n_per_class") return 1429;
  if (k == "n_subjects") return 24;
  if (k == "scenario") return Json(d.scenario);
  if (k == "format") {
    return (cmd == Command::calibrate || cmd == Command::simulate || cmd == Command::loso_eval)
               ? "report"
               : "csv";
  }
  throw std::logic_error("no default for key " + k);
}

template <class T>
T merged(const Json& current, const Json& update) {
  T value{};
  from_json(current, value);
  from_json(update, value);
  return value;
}

// Stores `v` under the spec's key after checking its type; structured values
// are merged onto the current one and stored normalized.
void assign(Json& eff, const KeySpec& s, const Json& v) {
  auto bad = [&](const char* what) {
    throw UsageError("'" + s.key + "': expected " + what);
  };
  switch (s.kind) {
    case Kind::num:
      if (!v.is_number()) bad("a number");
      eff[s.key] = v.get<double>();
      break;
    case Kind::integer:
      if (!v.is_number_integer()) bad("an integer");
      if (v.get<long long>() < std::numeric_limits<int>::min() ||
          v.get<long long>() > std::numeric_limits<int>::max()) {
        bad("an integer in range");
      }
      eff[s.key] = v.get<int>();
      break;
    case Kind::seed:
      if (!v.is_number_unsigned()) bad("a non-negative integer");
      eff[s.key] = v.get<std::uint64_t>();
      break;
    case Kind::boolean:
      if (!v.is_boolean()) bad("true or false");
      eff[s.key] = v.get<bool>();
      break;
    case Kind::str:
      if (!v.is_string()) bad("a string");
      eff[s.key] = v;
      break;
    case Kind::str_list:
      if (!v.is_array()) bad("a list of strings");
      for (const auto& x : v) {
        if (!x.is_string()) bad("a list of strings");
      }
      eff[s.key] = v;
      break;
    case Kind::classes: {
      ClassSet set;
      try {
        from_json(v, set);
      } catch (const Error& e) {
        throw UsageError("'" + s.key + "': " + e.what());
      }
      eff[s.key] = class_set_json(set);
      break;
    }
    case Kind::costs:
    case Kind::delta_acc:
    case Kind::scenario:
      try {
        if (s.kind == Kind::costs) {
          eff[s.key] = Json(merged<CostProfile>(eff[s.key], v));
        } else if (s.kind == Kind::delta_acc) {
          eff[s.key] = Json(merged<DeltaAccTable>(eff[s.key], v));
        } else {
          eff[s.key] = Json(merged<Scenario>(eff[s.key], v));
        }
      } catch (const Error& e) {
        throw UsageError("'" + s.key + "': " + e.what());
      }
      break;
  }
}

Json flag_to_json(const KeySpec& s, const std::vector<std::string>& raw) {
  const std::string& text = raw.back();
  auto bad = [&](const char* what) -> Json {
    throw UsageError(flag_name(s.key) + ": expected " + what + ", got '" + text + "'");
  };
  switch (s.kind) {
    case Kind::num: {
      double v = 0.0;
      const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
      if (r.ec != std::errc{} || r.ptr != text.data() + text.size()) return bad("a number");
      return v;
    }
    case Kind::integer: {
      long long v = 0;
      const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
      if (r.ec != std::errc{} || r.ptr != text.data() + text.size()) return bad("an integer");
      return v;
    }
    case Kind::seed: {
      std::uint64_t v = 0;
      const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
      if (r.ec != std::errc{} || r.ptr != text.data() + text.size()) {
        return bad("a non-negative integer");
      }
      return v;
    }
    case Kind::boolean:
      if (text == "true") return true;
      if (text == "false") return false;
      return bad("true or false");
    case Kind::str:
      return text;
    case Kind::str_list:
    case Kind::classes:
      return Json(raw);
    case Kind::costs:
    case Kind::delta_acc:
    case Kind::scenario:
      try {
        return Json::parse(text);
      } catch (const nlohmann::json::parse_error&) {
        return bad("JSON");
      }
  }
  return bad("a value");
}

// ---- typed views of the effective config --------------------------------

double num(const Json& eff, const char* key) { return eff.at(key).get<double>(); }

ExperimentConfig experiment_config(const Json& eff) {
  ExperimentConfig c;
  auto has = [&](const char* k) { return eff.contains(k); };
  if (has("tau_low")) c.thresholds.tau_low = num(eff, "tau_low");
  if (has("tau_high")) c.thresholds.tau_high = num(eff, "tau_high");
  if (has("critical_cut")) c.thresholds.critical_cut = num(eff, "critical_cut");
  if (has("tau_base")) c.adaptive.tau_base = num(eff, "tau_base");
  if (has("alpha_blur")) c.adaptive.alpha_blur = num(eff, "alpha_blur");
  if (has("alpha_light")) c.adaptive.alpha_light = num(eff, "alpha_light");
  if (has("clamp_lo")) c.adaptive.clamp_lo = num(eff, "clamp_lo");
  if (has("clamp_hi")) c.adaptive.clamp_hi = num(eff, "clamp_hi");
  if (has("blur_ref")) c.adaptive.blur_ref = num(eff, "blur_ref");
  if (has("lambda")) c.utility.lambda = num(eff, "lambda");
  if (has("w_crit")) c.utility.w_crit = num(eff, "w_crit");
  if (has("w_normal")) c.utility.w_normal = num(eff, "w_normal");
  if (has("critical_classes")) from_json(eff.at("critical_classes"), c.utility.critical);
  if (has("delta_acc")) from_json(eff.at("delta_acc"), c.utility.delta_acc);
  if (has("costs")) from_json(eff.at("costs"), c.costs);
  if (has("bins")) c.bins = eff.at("bins").get<int>();
  if (has("resamples")) c.n_resamples = eff.at("resamples").get<int>();
  if (has("ci_level")) c.ci_level = num(eff, "ci_level");
  if (has("guard")) c.guard_enabled = eff.at("guard").get<bool>();
  if (has("guard_threshold")) c.guard.threshold = num(eff, "guard_threshold");
  if (has("guard_discount")) c.guard.discount = num(eff, "guard_discount");
  if (has("guard_mode")) {
    const auto m = parse_discount_mode(eff.at("guard_mode").get<std::string>());
    if (!m) throw UsageError("'guard_mode': expected relative or absolute");
    c.guard.mode = *m;
  }
  if (has("grid_step")) c.grid_step = num(eff, "grid_step");
  if (has("tune_thresholds")) c.tune_thresholds = eff.at("tune_thresholds").get<bool>();
  if (has("scenario")) from_json(eff.at("scenario"), c.scenario);
  return c;
}

Policy policy_of(const Json& eff) {
  const auto p = parse_policy(eff.at("policy").get<std::string>());
  if (!p) throw UsageError("'policy': expected fixed_none, fixed_4x, gate or gate_adaptive");
  return *p;
}

std::string str(const Json& eff, const char* key) { return eff.at(key).get<std::string>(); }

std::vector<std::string> str_list(const Json& eff, const char* key) {
  return eff.at(key).get<std::vector<std::string>>();
}

int integer(const Json& eff, const char* key) { return eff.at(key).get<int>(); }

// Range checks that belong to the invocation rather than to a library type.
void validate_run(const RunConfig& rc) {
  const Json& eff = rc.effective;
  const auto format = str(eff, "format");
  if (format != "csv" && format != "report") throw UsageError("'format': expected csv or report");
  if (eff.contains("seed") && eff.at("seed").is_null()) {
    throw UsageError("'seed' is required for " + std::string(to_string(rc.command)));
  }
  if (eff.contains("policy")) policy_of(eff);
  for (const char* k : {"log", "methods"}) {
    if (eff.contains(k) && str(eff, k).empty()) throw UsageError("'" + std::string(k) + "' is required");
  }
  if (eff.contains("metrics")) {
    for (const auto& m : str_list(eff, "metrics")) {
      if (!parse_metric(m)) throw UsageError("'metrics': unknown metric '" + m + "'");
    }
  }
  if (eff.contains("n_per_class") && integer(eff, "n_per_class") < 1) {
    throw UsageError("'n_per_class' must be >= 1");
  }
  if (eff.contains("n_subjects") && integer(eff, "n_subjects") < 1) {
    throw UsageError("'n_subjects' must be >= 1");
  }
  if (eff.contains("sweep_steps") && integer(eff, "sweep_steps") < 2) {
    throw UsageError("'sweep_steps' must be >= 2");
  }
  if (eff.contains("rel_range")) {
    const double r = num(eff, "rel_range");
    if (!(r >= 0.0 && r < 1.0)) throw UsageError("'rel_range' must be in [0,1)");
  }
  if (rc.command == Command::quality) {
    const bool frames = !str_list(eff, "sr_frames").empty() || !str_list(eff, "lr_frames").empty();
    if (str_list(eff, "images").empty() && !frames) {
      throw UsageError("quality needs --images or --sr-frames/--lr-frames");
    }
    if (str_list(eff, "sr_frames").size() != str_list(eff, "lr_frames").size()) {
      throw UsageError("'sr_frames' and 'lr_frames' must list the same number of frames");
    }
  }
  if (rc.threads < 0) throw UsageError("--threads must be >= 0");
  try {
    experiment_config(eff).validate();
  } catch (const Error& e) {
    if (e.code() == Errc::io_failure) throw;
    throw UsageError(e.what());
  }
}

// ---- output helpers ------------------------------------------------------

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

class CsvWriter {
 public:
  explicit CsvWriter(std::initializer_list<std::string_view> header) {
    bool first = true;
    for (auto h : header) {
      buf_ << (first ? "" : ",") << h;
      first = false;
    }
    buf_ << '\n';
  }
  CsvWriter& cell(const std::string& s) {
    sep();
    buf_ << csv_field(s);
    return *this;
  }
  CsvWriter& cell(double v) {
    sep();
    buf_ << fmt(v);
    return *this;
  }
  CsvWriter& cell(std::size_t v) {
    sep();
    buf_ << v;
    return *this;
  }
  CsvWriter& cell(int v) {
    sep();
    buf_ << v;
    return *this;
  }
  CsvWriter& cell(bool v) {
    sep();
    buf_ << (v ? "true" : "false");
    return *this;
  }
  void end() {
    buf_ << '\n';
    open_ = false;
  }
  std::string str() const { return buf_.str(); }

 private:
  void sep() {
    if (open_) buf_ << ',';
    open_ = true;
  }
  std::ostringstream buf_;
  bool open_ = false;
};

struct Outputs {
  std::filesystem::path dir;
  std::ostream& out;
  bool csv = false;

  void write(const std::string& name, const std::string& text) {
    const auto path = dir / name;
    write_text_file(path, text);
    out << "wrote " << path.string() << '\n';
  }
};

Json report_head(const RunConfig& rc) {
  return Json{{"schema_version", kReportSchemaVersion},
              {"command", std::string(to_string(rc.command))},
              {"config", rc.effective}};
}

std::vector<PredictionRecord> load_records(const Json& eff, std::ostream& err) {
  IngestOptions opts;
  opts.strict = eff.at("strict").get<bool>();
  opts.on_warning = [&err](const std::string& m) { err << "warning: " << m << '\n'; };
  return ingest_log(str(eff, "log"), opts);
}

std::string reliability_csv(const std::vector<ReliabilityBin>& bins) {
  CsvWriter w{"bin_lo", "bin_hi", "count", "mean_conf", "accuracy"};
  for (const auto& b : bins) {
    w.cell(b.lo).cell(b.hi).cell(b.count).cell(b.mean_conf).cell(b.accuracy);
    w.end();
  }
  return w.str();
}

// ---- commands ------------------------------------------------------------

void cmd_quality(const RunConfig& rc, Outputs& o) {
  const Json& eff = rc.effective;
  const double blur_ref = num(eff, "blur_ref");
  std::optional<GrayImage> ref;
  if (!str(eff, "reference_image").empty()) ref = load_pgm(str(eff, "reference_image"));
  CsvWriter w{"path", "width", "height", "laplacian_variance", "blur_norm", "lighting", "ssim_ref"};
  Json rows = Json::array();
  for (const auto& path : str_list(eff, "images")) {
    const GrayImage img = load_pgm(path);
    const double lv = laplacian_variance(img);
    const double bn = normalize_blur(lv, blur_ref);
    const double li = mean_intensity(img);
    Json row{{"path", path},          {"width", img.width()},  {"height", img.height()},
             {"laplacian_variance", lv}, {"blur_norm", bn}, {"lighting", li}};
    w.cell(path).cell(img.width()).cell(img.height()).cell(lv).cell(bn).cell(li);
    if (ref) {
      const double s = ssim(img, *ref);
      row["ssim_ref"] = s;
      w.cell(s);
    } else {
      row["ssim_ref"] = nullptr;
      w.cell(std::string());
    }
    w.end();
    rows.push_back(std::move(row));
  }
  Json rep = report_head(rc);
  rep["images"] = std::move(rows);
  const auto sr_paths = str_list(eff, "sr_frames");
  if (!sr_paths.empty()) {
    auto load_clip = [](const std::vector<std::string>& paths) {
      std::vector<GrayImage> frames;
      for (const auto& p : paths) frames.push_back(load_pgm(p));
      return Clip(std::move(frames));
    };
    const Clip sr = load_clip(sr_paths);
    const Clip lr = load_clip(str_list(eff, "lr_frames"));
    Json clip{{"frames", sr.size()}};
    clip["temporal_inconsistency"] = sr.size() >= 2 ? Json(temporal_inconsistency(sr)) : Json(nullptr);
    clip["artifact_score"] = artifact_score_heuristic(sr, lr);
    rep["clip"] = std::move(clip);
  }
  o.write("quality_report.json", dump_json(rep));
  if (o.csv) o.write("quality.csv", w.str());
}

void cmd_gate(const RunConfig& rc, Outputs& o, std::ostream& err) {
  const Json& eff = rc.effective;
  const auto records = load_records(eff, err);
  const auto cfg = experiment_config(eff);
  const Policy policy = policy_of(eff);
  std::vector<GateDecision> decisions;
  decisions.reserve(records.size());
  CsvWriter w{"clip_id", "subject_id", "confidence", "criticality", "level", "reason",
              "tau_used", "u_none",     "u_2x",       "u_4x"};
  Json rows = Json::array();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    GateDecision d;
    try {
      d = decide(r, policy, cfg.thresholds, cfg);
    } catch (const Error& e) {
      throw Error(e.code(), e.what(), i + 1);
    }
    w.cell(r.clip_id).cell(r.subject_id).cell(r.confidence).cell(r.criticality);
    w.cell(std::string(to_string(d.level))).cell(std::string(to_string(d.reason))).cell(d.tau_used);
    for (double u : d.utility_by_level) w.cell(u);
    w.end();
    Json row{{"clip_id", r.clip_id}};
    row.update(to_json(d));
    rows.push_back(std::move(row));
    decisions.push_back(d);
  }
  Json rep = report_head(rc);
  rep["n"] = records.size();
  rep["cost"] = to_json(accumulate_cost(decisions, cfg.costs));
  rep["decisions"] = std::move(rows);
  o.write("gate_report.json", dump_json(rep));
  if (o.csv) o.write("decisions.csv", w.str());
}

void cmd_calibrate(const RunConfig& rc, Outputs& o, std::ostream& err) {
  const Json& eff = rc.effective;
  const auto records = load_records(eff, err);
  const int bins = integer(eff, "bins");
  std::vector<MetricSpec> metrics;
  for (const auto& m : str_list(eff, "metrics")) metrics.push_back(*parse_metric(m, bins));
  BootstrapOptions opts;
  opts.n_resamples = integer(eff, "resamples");
  opts.level = num(eff, "ci_level");
  opts.seed = eff.at("seed").get<std::uint64_t>();
  const auto report = calibration_report(records, bins, metrics, opts);
  Json rep = report_head(rc);
  rep["calibration"] = to_json(report);
  o.write("calibration_report.json", dump_json(rep));
  if (!o.csv) return;
  o.write("reliability.csv", reliability_csv(report.bins));
  for (int c = 0; c < kNumClasses; ++c) {
    if (!report.per_class_aupr.count(c)) continue;
    const auto ovr = one_vs_rest(records, c);
    CsvWriter w{"threshold", "recall", "precision"};
    for (const auto& p : pr_curve(ovr.scores, ovr.labels)) {
      w.cell(p.threshold).cell(p.recall).cell(p.precision);
      w.end();
    }
    o.write("pr_curve_" + std::string(class_name(c)) + ".csv", w.str());
  }
}

void cmd_guard(const RunConfig& rc, Outputs& o, std::ostream& err) {
  const Json& eff = rc.effective;
  const auto records = load_records(eff, err);
  const auto cfg = experiment_config(eff);
  const Policy policy = policy_of(eff);
  CsvWriter w{"clip_id", "level", "p_artifact", "triggered", "used_sr", "final_confidence"};
  Json rows = Json::array();
  std::size_t evaluated = 0;
  std::size_t triggered = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    GateDecision d;
    try {
      d = decide(r, policy, cfg.thresholds, cfg);
    } catch (const Error& e) {
      throw Error(e.code(), e.what(), i + 1);
    }
    if (d.level == SRLevel::None) continue;
    if (!r.artifact_score) {
      throw Error(Errc::missing_field, "SR-gated record " + r.clip_id + " has no artifact_score", i + 1);
    }
    const auto g = apply_guard(*r.artifact_score, d, r.confidence, cfg.guard);
    ++evaluated;
    if (g.triggered) ++triggered;
    w.cell(r.clip_id).cell(std::string(to_string(d.level))).cell(g.p_artifact).cell(g.triggered);
    w.cell(g.used_sr).cell(g.final_confidence);
    w.end();
    rows.push_back(Json{{"clip_id", r.clip_id},
                        {"level", std::string(to_string(d.level))},
                        {"p_artifact", g.p_artifact},
                        {"triggered", g.triggered},
                        {"used_sr", g.used_sr},
                        {"final_confidence", g.final_confidence}});
  }
  Json rep = report_head(rc);
  rep["n"] = records.size();
  rep["evaluated"] = evaluated;
  rep["triggered"] = triggered;
  rep["trigger_rate"] = evaluated ? static_cast<double>(triggered) / static_cast<double>(evaluated) : 0.0;
  rep["outcomes"] = std::move(rows);
  o.write("guard_report.json", dump_json(rep));
  if (o.csv) o.write("guard.csv", w.str());
}

void cmd_sweep(const RunConfig& rc, Outputs& o, std::ostream& err) {
  const Json& eff = rc.effective;
  const auto records = load_records(eff, err);
  const auto cfg = experiment_config(eff);
  const auto rows = sensitivity_sweep(records, cfg.thresholds, cfg.utility, cfg.costs,
                                      num(eff, "rel_range"), integer(eff, "sweep_steps"));
  const auto opt = optimize_thresholds(records, cfg.utility, cfg.costs, cfg.grid_step,
                                       cfg.thresholds.critical_cut);
  CsvWriter w{"scale_low", "scale_high", "tau_low", "tau_high", "mean_utility",
              "mean_cost_gflops", "n_none", "n_2x", "n_4x"};
  Json jrows = Json::array();
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& r : rows) {
    w.cell(r.scale_low).cell(r.scale_high).cell(r.tau_low).cell(r.tau_high).cell(r.mean_utility);
    w.cell(r.mean_cost_gflops);
    for (auto n : r.histogram) w.cell(n);
    w.end();
    jrows.push_back(Json{{"scale_low", r.scale_low},
                         {"scale_high", r.scale_high},
                         {"tau_low", r.tau_low},
                         {"tau_high", r.tau_high},
                         {"mean_utility", r.mean_utility},
                         {"mean_cost_gflops", r.mean_cost_gflops},
                         {"histogram", Json{{"none", r.histogram[0]}, {"2x", r.histogram[1]},
                                            {"4x", r.histogram[2]}}}});
    worst = std::min(worst, r.mean_utility);
  }
  Json rep = report_head(rc);
  rep["n"] = records.size();
  rep["optimum"] = Json{{"tau_low", opt.tau_low},
                        {"tau_high", opt.tau_high},
                        {"mean_utility", opt.mean_utility}};
  rep["worst_row_utility"] = worst;
  rep["rows"] = std::move(jrows);
  o.write("sweep_report.json", dump_json(rep));
  if (o.csv) o.write("sweep.csv", w.str());
}

void cmd_pareto(const RunConfig& rc, Outputs& o) {
  const Json& eff = rc.effective;
  const auto methods = read_methods_csv(std::filesystem::path(str(eff, "methods")));
  if (methods.empty()) throw Error(Errc::empty_input, "methods table has no rows");
  auto lookup = [&](const std::string& name) -> const MethodPoint& {
    for (const auto& m : methods) {
      if (m.name == name) return m;
    }
    throw Error(Errc::invalid_argument, "no method named '" + name + "'");
  };
  const MethodPoint& base = str(eff, "baseline").empty() ? methods.front() : lookup(str(eff, "baseline"));
  const MethodPoint* ref = nullptr;
  if (!str(eff, "reference").empty()) {
    ref = &lookup(str(eff, "reference"));
  } else {
    for (const auto& m : methods) {
      if (!(m == base)) {
        ref = &m;
        break;
      }
    }
    if (!ref) throw Error(Errc::zero_normalizer, "no reference method besides the baseline");
  }
  const auto frontier = pareto_frontier(methods);
  CsvWriter w{"name", "accuracy", "cost", "fps", "power_w", "on_frontier", "rel_efficiency"};
  Json rows = Json::array();
  for (const auto& m : methods) {
    const bool on = std::find(frontier.begin(), frontier.end(), m) != frontier.end();
    const double rel = relative_efficiency(m, base, *ref);
    w.cell(m.name).cell(m.accuracy).cell(m.cost).cell(m.fps).cell(m.power_w).cell(on).cell(rel);
    w.end();
    rows.push_back(Json{{"name", m.name},
                        {"accuracy", m.accuracy},
                        {"cost", m.cost},
                        {"fps", m.fps},
                        {"power_w", m.power_w},
                        {"on_frontier", on},
                        {"rel_efficiency", rel}});
  }
  Json front = Json::array();
  for (const auto& m : frontier) front.push_back(m.name);
  Json rep = report_head(rc);
  rep["baseline"] = base.name;
  rep["reference"] = ref->name;
  rep["frontier"] = std::move(front);
  rep["methods"] = std::move(rows);
  o.write("pareto_report.json", dump_json(rep));
  if (o.csv) o.write("pareto.csv", w.str());
}

void cmd_simulate(const RunConfig& rc, Outputs& o) {
  const Json& eff = rc.effective;
  const auto cfg = experiment_config(eff);
  const auto records = sample_stream(cfg.scenario, integer(eff, "n_per_class"),
                                     integer(eff, "n_subjects"), eff.at("seed").get<std::uint64_t>());
  std::ostringstream log;
  write_log(records, log);
  o.write("predictions.log", log.str());

  std::array<std::size_t, kNumClasses> n{}, correct{}, flagged{};
  std::array<double, kNumClasses> conf{};
  for (const auto& r : records) {
    const auto k = static_cast<std::size_t>(r.true_class);
    ++n[k];
    conf[k] += r.confidence;
    if (is_correct(r)) ++correct[k];
    if (label_artifact(*r.ssim_vs_hr, *r.perceptual_loss)) ++flagged[k];
  }
  CsvWriter w{"class", "n", "mean_confidence", "accuracy", "artifact_flagged"};
  Json per_class = Json::array();
  std::size_t total_flagged = 0;
  for (int k = 0; k < kNumClasses; ++k) {
    const auto i = static_cast<std::size_t>(k);
    const double nn = static_cast<double>(n[i]);
    per_class.push_back(Json{{"class", std::string(class_name(k))},
                             {"n", n[i]},
                             {"mean_confidence", conf[i] / nn},
                             {"accuracy", static_cast<double>(correct[i]) / nn},
                             {"artifact_flagged", flagged[i]}});
    w.cell(std::string(class_name(k))).cell(n[i]).cell(conf[i] / nn);
    w.cell(static_cast<double>(correct[i]) / nn).cell(flagged[i]);
    w.end();
    total_flagged += flagged[i];
  }
  Json rep = report_head(rc);
  rep["n"] = records.size();
  rep["subjects"] = distinct_subjects(records).size();
  rep["artifact_flagged"] = total_flagged;
  rep["per_class"] = std::move(per_class);
  o.write("simulate_report.json", dump_json(rep));
  if (o.csv) o.write("simulate_classes.csv", w.str());
}

void cmd_loso(const RunConfig& rc, Outputs& o, std::ostream& err) {
  const Json& eff = rc.effective;
  const auto records = load_records(eff, err);
  const auto cfg = experiment_config(eff);
  auto report = run_experiment(records, policy_of(eff), cfg, eff.at("seed").get<std::uint64_t>());
  report.config = eff;
  Json rep = report_to_json(report);
  rep.erase("config");
  Json head{{"schema_version", kReportSchemaVersion},
            {"command", std::string(to_string(rc.command))}};
  head.update(rep);
  rep = std::move(head);
  rep["config"] = eff;
  o.write("experiment_report.json", dump_json(rep));
  if (!o.csv) return;
  CsvWriter w{"test_subject", "n",           "tau_low", "tau_high", "ece", "brier",
              "mean_gflops",  "critical_fp", "n_none",  "n_2x",     "n_4x"};
  for (const auto& f : report.folds) {
    w.cell(f.test_subject).cell(f.n).cell(f.tau_low).cell(f.tau_high).cell(f.ece).cell(f.brier);
    w.cell(f.mean_gflops).cell(f.critical_fp);
    for (auto h : f.histogram) w.cell(h);
    w.end();
  }
  o.write("folds.csv", w.str());
  o.write("reliability.csv", reliability_csv(report.calibration.bins));
}

// ---- parsing -------------------------------------------------------------

struct SubcommandFlags {
  CLI::App* app = nullptr;
  std::map<std::string, std::vector<std::string>> raw;
  std::map<std::string, CLI::Option*> opts;
  std::string config;
  std::string out = ".";
  int threads = 0;
};

constexpr std::string_view kPrecedence =
    "Precedence: command-line flags override values from --config, which override built-in "
    "defaults. Every report echoes the resolved config; passing that report (or its \"config\" "
    "object) back through --config repeats the run.";

std::string_view command_help(Command c) {
  switch (c) {
    case Command::quality: return "blur, lighting and SSIM of PGM images; artifact score of a clip";
    case Command::gate: return "per-record SR level decisions";
    case Command::calibrate: return "ECE, Brier, AUROC/AUPR with bootstrap intervals";
    case Command::guard: return "artifact guard outcomes for SR-gated records";
    case Command::sweep: return "threshold sensitivity sweep and grid optimum";
    case Command::pareto: return "Pareto frontier and relative efficiency of methods";
    case Command::simulate: return "synthetic prediction log";
    case Command::loso_eval: return "leave-one-subject-out evaluation of a policy";
  }
  return "";
}

RunConfig resolve(Command cmd, const SubcommandFlags& f, std::ostream& err) {
  RunConfig rc;
  rc.command = cmd;
  rc.out_dir = f.out;
  rc.threads = f.threads;
  Json eff = Json::object();
  eff["subcommand"] = std::string(to_string(cmd));
  for (const auto& s : key_specs()) {
    if (s.commands & bit(cmd)) eff[s.key] = default_value(s, cmd);
  }
  if (!f.config.empty()) {
    Json file = load_json_file(f.config, Errc::invalid_argument);
    if (file.is_object() && file.contains("config") && file.contains("schema_version")) {
      file = file["config"];
    }
    if (!file.is_object()) throw UsageError("config file must hold a JSON object");
    for (auto it = file.begin(); it != file.end(); ++it) {
      if (it.key() == "subcommand") {
        if (!it->is_string() || it->get<std::string>() != to_string(cmd)) {
          throw UsageError("config file is for subcommand " + it->dump() + ", not " +
                           std::string(to_string(cmd)));
        }
        continue;
      }
      const KeySpec* s = find_spec(it.key());
      if (!s) throw UsageError("unknown config key '" + it.key() + "'");
      if (!(s->commands & bit(cmd))) {
        err << "warning: config key '" << it.key() << "' does not apply to "
            << to_string(cmd) << "; ignored\n";
        continue;
      }
      assign(eff, *s, *it);
    }
  }
  for (const auto& s : key_specs()) {
    if (!(s.commands & bit(cmd))) continue;
    const auto it = f.opts.find(s.key);
    if (it == f.opts.end() || it->second->count() == 0) continue;
    assign(eff, s, flag_to_json(s, f.raw.at(s.key)));
  }
  rc.effective = std::move(eff);
  validate_run(rc);
  return rc;
}

int execute(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  std::filesystem::create_directories(rc.out_dir);
  Outputs o{rc.out_dir, out, rc.effective.at("format").get<std::string>() == "csv"};
  set_num_threads(rc.threads);
  struct Restore {
    ~Restore() { set_num_threads(0); }
  } restore;
  switch (rc.command) {
    case Command::quality: cmd_quality(rc, o); break;
    case Command::gate: cmd_gate(rc, o, err); break;
    case Command::calibrate: cmd_calibrate(rc, o, err); break;
    case Command::guard: cmd_guard(rc, o, err); break;
    case Command::sweep: cmd_sweep(rc, o, err); break;
    case Command::pareto: cmd_pareto(rc, o); break;
    case Command::simulate: cmd_simulate(rc, o); break;
    case Command::loso_eval: cmd_loso(rc, o, err); break;
  }
  return kExitOk;
}

}  // namespace

std::string_view to_string(Command command) noexcept {
  switch (command) {
    case Command::quality: return "quality";
    case Command::gate: return "gate";
    case Command::calibrate: return "calibrate";
    case Command::guard: return "guard";
    case Command::sweep: return "sweep";
    case Command::pareto: return "pareto";
    case Command::simulate: return "simulate";
    case Command::loso_eval: return "loso-eval";
  }
  return "";
}

std::optional<Command> parse_command(std::string_view name) {
  for (Command c : kCommands) {
    if (name == to_string(c)) return c;
  }
  return std::nullopt;
}

int exit_code_for(Errc code) noexcept { return code == Errc::io_failure ? kExitIo : kExitData; }

int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adaptive super-resolution gating and safety calibration toolkit", "adaptsr"};
  app.footer(std::string(kPrecedence));
  app.require_subcommand(1);
  std::map<Command, SubcommandFlags> subs;
  for (Command c : kCommands) {
    auto& f = subs[c];
    f.app = app.add_subcommand(std::string(to_string(c)), std::string(command_help(c)));
    f.app->footer(std::string(kPrecedence));
    f.app->add_option("--config", f.config, "JSON config file (or a report to repeat)");
    f.app->add_option("--out", f.out, "output directory")->capture_default_str();
    f.app->add_option("--threads", f.threads, "OpenMP threads (0: runtime default)")
        ->capture_default_str();
    for (const auto& s : key_specs()) {
      if (!(s.commands & bit(c))) continue;
      auto* opt = f.app->add_option(flag_name(s.key), f.raw[s.key], s.help);
      if (s.kind != Kind::str_list && s.kind != Kind::classes) {
        opt->expected(1);
        opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
      }
      f.opts[s.key] = opt;
    }
  }

  std::vector<const char*> argv{"adaptsr"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    const auto parsed = app.get_subcommands();
    out << (parsed.empty() ? app.help() : parsed.front()->help());
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const auto parsed = app.get_subcommands();
    err << (parsed.empty() ? app.help() : parsed.front()->help());
    return kExitUsage;
  }

  Command cmd = Command::gate;
  for (Command c : kCommands) {
    if (subs[c].app->parsed()) cmd = c;
  }
  RunConfig rc;
  try {
    rc = resolve(cmd, subs[cmd], err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n" << subs[cmd].app->help();
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == Errc::io_failure ? kExitIo : kExitUsage;
  }
  try {
    return execute(rc, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
}

int run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace adaptsr::cli
