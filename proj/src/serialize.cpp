#include "adaptsr/serialize.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace adaptsr {

namespace {

constexpr std::array<std::string_view, kNumLevels> kLevelKeys{"none", "2x", "4x"};

// Strict object reader: merges present keys, rejects unknown ones.
class Reader {
 public:
  Reader(const Json& j, std::string ctx, Errc errc = Errc::invalid_argument)
      : j_(j), ctx_(std::move(ctx)), errc_(errc) {
    if (!j_.is_object()) fail("expected an object");
  }

  const Json* find(std::string_view key) {
    seen_.emplace(key);
    auto it = j_.find(std::string(key));
    return it == j_.end() ? nullptr : &*it;
  }

  void num(std::string_view key, double& out) {
    if (const Json* v = find(key)) {
      if (!v->is_number()) fail(key, "expected a number");
      out = v->get<double>();
    }
  }

  template <class Int>
  void integer(std::string_view key, Int& out) {
    if (const Json* v = find(key)) {
      if (!v->is_number_integer()) fail(key, "expected an integer");
      if constexpr (std::is_unsigned_v<Int>) {
        if (!v->is_number_unsigned()) fail(key, "expected a non-negative integer");
      }
      out = v->get<Int>();
    }
  }

  void boolean(std::string_view key, bool& out) {
    if (const Json* v = find(key)) {
      if (!v->is_boolean()) fail(key, "expected true or false");
      out = v->get<bool>();
    }
  }

  void str(std::string_view key, std::string& out) {
    if (const Json* v = find(key)) {
      if (!v->is_string()) fail(key, "expected a string");
      out = v->get<std::string>();
    }
  }

  template <class T>
  void sub(std::string_view key, T& out) {
    if (const Json* v = find(key)) {
      try {
        from_json(*v, out);
      } catch (const Error& e) {
        if (e.code() != Errc::invalid_argument) throw;
        throw Error(errc_, path(key) + ": " + strip(e.what()));
      }
    }
  }

  const Json* required(std::string_view key) {
    const Json* v = find(key);
    if (!v) fail(key, "missing");
    return v;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) fail(it.key(), "unknown key");
    }
  }

  [[noreturn]] void fail(std::string_view key, std::string_view what) const {
    throw Error(errc_, path(key) + ": " + std::string(what));
  }
  [[noreturn]] void fail(std::string_view what) const {
    throw Error(errc_, (ctx_.empty() ? std::string("value") : ctx_) + ": " + std::string(what));
  }

  Errc errc() const { return errc_; }

 private:
  std::string path(std::string_view key) const {
    return "'" + (ctx_.empty() ? "" : ctx_ + ".") + std::string(key) + "'";
  }
  static std::string strip(const char* what) {
    std::string s(what);
    const auto pos = s.find(": ");
    return pos == std::string::npos ? s : s.substr(pos + 2);
  }

  const Json& j_;
  std::string ctx_;
  Errc errc_;
  std::set<std::string, std::less<>> seen_;
};

int class_from_key(const std::string& key) {
  const auto id = class_id(key);
  if (!id) throw Error(Errc::invalid_argument, "'" + key + "' is not a behavior class");
  return *id;
}

std::size_t level_from_key(const std::string& key) {
  for (std::size_t i = 0; i < kLevelKeys.size(); ++i) {
    if (key == kLevelKeys[i]) return i;
  }
  throw Error(Errc::invalid_argument, "'" + key + "' is not an SR level");
}

Json histogram_json(const std::array<std::size_t, kNumLevels>& h) {
  Json j = Json::object();
  for (std::size_t i = 0; i < kNumLevels; ++i) j[std::string(kLevelKeys[i])] = h[i];
  return j;
}

std::array<std::size_t, kNumLevels> histogram_from(const Json& j, Errc errc) {
  std::array<std::size_t, kNumLevels> h{};
  Reader r(j, "histogram", errc);
  for (std::size_t i = 0; i < kNumLevels; ++i) r.integer(kLevelKeys[i], h[i]);
  r.finish();
  return h;
}

Json class_map_json(const std::map<int, double>& m) {
  Json j = Json::object();
  for (const auto& [k, v] : m) j[std::string(class_name(k))] = v;
  return j;
}

std::map<int, double> class_map_from(const Json& j, Errc errc) {
  if (!j.is_object()) throw Error(errc, "expected a class-keyed object");
  std::map<int, double> m;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto id = class_id(it.key());
    if (!id || !it->is_number()) throw Error(errc, "bad class entry '" + it.key() + "'");
    m[*id] = it->get<double>();
  }
  return m;
}

}  // namespace

Json class_set_json(const ClassSet& set) {
  Json j;
  to_json(j, set);
  return j;
}

void to_json(Json& j, const ClassSet& set) {
  j = Json::array();
  for (int k = 0; k < kNumClasses; ++k) {
    if (set.test(static_cast<std::size_t>(k))) j.push_back(std::string(class_name(k)));
  }
}

void from_json(const Json& j, ClassSet& set) {
  if (!j.is_array()) throw Error(Errc::invalid_argument, "expected a list of behavior classes");
  ClassSet out;
  for (const auto& v : j) {
    if (v.is_string()) {
      out.set(static_cast<std::size_t>(class_from_key(v.get<std::string>())));
    } else if (v.is_number_integer() && valid_class(v.get<int>())) {
      out.set(static_cast<std::size_t>(v.get<int>()));
    } else {
      throw Error(Errc::invalid_argument, "expected behavior class names");
    }
  }
  set = out;
}

void to_json(Json& j, const Thresholds& t) {
  j = Json{{"tau_low", t.tau_low}, {"tau_high", t.tau_high}, {"critical_cut", t.critical_cut}};
}

void from_json(const Json& j, Thresholds& t) {
  Reader r(j, "");
  r.num("tau_low", t.tau_low);
  r.num("tau_high", t.tau_high);
  r.num("critical_cut", t.critical_cut);
  r.finish();
}

void to_json(Json& j, const AdaptiveTauConfig& c) {
  j = Json{{"tau_base", c.tau_base},   {"alpha_blur", c.alpha_blur}, {"alpha_light", c.alpha_light},
           {"clamp_lo", c.clamp_lo},   {"clamp_hi", c.clamp_hi},     {"blur_ref", c.blur_ref}};
}

void from_json(const Json& j, AdaptiveTauConfig& c) {
  Reader r(j, "");
  r.num("tau_base", c.tau_base);
  r.num("alpha_blur", c.alpha_blur);
  r.num("alpha_light", c.alpha_light);
  r.num("clamp_lo", c.clamp_lo);
  r.num("clamp_hi", c.clamp_hi);
  r.num("blur_ref", c.blur_ref);
  r.finish();
}

void to_json(Json& j, const DeltaAccTable& t) {
  j = Json::object();
  for (int k = 0; k < kNumClasses; ++k) {
    Json row = Json::object();
    for (SRLevel L : {SRLevel::X2, SRLevel::X4}) {
      const std::string key(kLevelKeys[static_cast<std::size_t>(level_index(L))]);
      if (t.contains(k, L)) {
        row[key] = t.at(k, L);
      } else {
        row[key] = nullptr;
      }
    }
    j[std::string(class_name(k))] = std::move(row);
  }
}

void from_json(const Json& j, DeltaAccTable& t) {
  if (!j.is_object()) throw Error(Errc::invalid_argument, "expected a class-keyed object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const int k = class_from_key(it.key());
    if (!it->is_object()) throw Error(Errc::invalid_argument, "expected a level-keyed object");
    for (auto lv = it->begin(); lv != it->end(); ++lv) {
      const auto L = static_cast<SRLevel>(level_from_key(lv.key()));
      if (lv->is_null()) {
        t.erase(k, L);
      } else if (lv->is_number()) {
        t.set(k, L, lv->get<double>());
      } else {
        throw Error(Errc::invalid_argument, "gain must be a number or null");
      }
    }
  }
}

void to_json(Json& j, const UtilityParams& p) {
  j = Json{{"lambda", p.lambda},
           {"w_crit", p.w_crit},
           {"w_normal", p.w_normal},
           {"critical_classes", class_set_json(p.critical)},
           {"delta_acc", Json(p.delta_acc)}};
}

void from_json(const Json& j, UtilityParams& p) {
  Reader r(j, "");
  r.num("lambda", p.lambda);
  r.num("w_crit", p.w_crit);
  r.num("w_normal", p.w_normal);
  r.sub("critical_classes", p.critical);
  r.sub("delta_acc", p.delta_acc);
  r.finish();
}

void to_json(Json& j, const LevelCost& c) {
  j = Json{{"gflops", c.gflops}, {"latency_ms", c.latency_ms}, {"power_w", c.power_w}};
}

void from_json(const Json& j, LevelCost& c) {
  Reader r(j, "");
  r.num("gflops", c.gflops);
  r.num("latency_ms", c.latency_ms);
  r.num("power_w", c.power_w);
  r.finish();
}

void to_json(Json& j, const CostProfile& p) {
  j = Json{{"utility_dimension", std::string(to_string(p.utility_dimension))}};
  for (std::size_t i = 0; i < kNumLevels; ++i) j[std::string(kLevelKeys[i])] = Json(p.levels[i]);
}

void from_json(const Json& j, CostProfile& p) {
  Reader r(j, "");
  std::string dim(to_string(p.utility_dimension));
  r.str("utility_dimension", dim);
  const auto d = parse_cost_dimension(dim);
  if (!d) r.fail("utility_dimension", "expected gflops, latency_ms or power_w");
  p.utility_dimension = *d;
  for (std::size_t i = 0; i < kNumLevels; ++i) r.sub(kLevelKeys[i], p.levels[i]);
  r.finish();
}

void to_json(Json& j, const GuardConfig& c) {
  j = Json{{"threshold", c.threshold},
           {"discount", c.discount},
           {"mode", std::string(to_string(c.mode))}};
}

void from_json(const Json& j, GuardConfig& c) {
  Reader r(j, "");
  r.num("threshold", c.threshold);
  r.num("discount", c.discount);
  std::string mode(to_string(c.mode));
  r.str("mode", mode);
  const auto m = parse_discount_mode(mode);
  if (!m) r.fail("mode", "expected relative or absolute");
  c.mode = *m;
  r.finish();
}

void to_json(Json& j, const TruncatedNormal& d) { j = Json{{"mean", d.mean}, {"sd", d.sd}}; }

void from_json(const Json& j, TruncatedNormal& d) {
  Reader r(j, "");
  r.num("mean", d.mean);
  r.num("sd", d.sd);
  r.finish();
}

void to_json(Json& j, const ConfidenceDistribution& d) {
  j = Json(d.first);
  if (d.second) {
    j["mix"] = d.mix;
    j["second"] = Json(*d.second);
  }
}

void from_json(const Json& j, ConfidenceDistribution& d) {
  Reader r(j, "");
  r.num("mean", d.first.mean);
  r.num("sd", d.first.sd);
  r.num("mix", d.mix);
  if (const Json* s = r.find("second")) {
    if (s->is_null()) {
      d.second.reset();
      d.mix = 1.0;
    } else {
      TruncatedNormal second = d.second.value_or(TruncatedNormal{});
      from_json(*s, second);
      d.second = second;
    }
  }
  r.finish();
}

void to_json(Json& j, const BehaviorConfidenceModel& m) {
  Json classes = Json::object();
  for (int k = 0; k < kNumClasses; ++k) {
    classes[std::string(class_name(k))] = Json(m.classes[static_cast<std::size_t>(k)]);
  }
  j = Json{{"classes", std::move(classes)},
           {"miscalibration", m.miscalibration},
           {"confidence_floor", m.confidence_floor}};
}

void from_json(const Json& j, BehaviorConfidenceModel& m) {
  Reader r(j, "");
  if (const Json* c = r.find("classes")) {
    if (!c->is_object()) r.fail("classes", "expected a class-keyed object");
    for (auto it = c->begin(); it != c->end(); ++it) {
      from_json(*it, m.classes[static_cast<std::size_t>(class_from_key(it.key()))]);
    }
  }
  r.num("miscalibration", m.miscalibration);
  r.num("confidence_floor", m.confidence_floor);
  r.finish();
}

void to_json(Json& j, const ArtifactModel& m) {
  j = Json{{"rate", m.rate},
           {"detector_hallucinated", Json(m.detector_hallucinated)},
           {"detector_clean", Json(m.detector_clean)}};
}

void from_json(const Json& j, ArtifactModel& m) {
  Reader r(j, "");
  r.num("rate", m.rate);
  r.sub("detector_hallucinated", m.detector_hallucinated);
  r.sub("detector_clean", m.detector_clean);
  r.finish();
}

void to_json(Json& j, const SrEffectModel& m) {
  Json uplift = Json::object();
  for (int k = 0; k < kNumClasses; ++k) {
    Json row = Json::object();
    for (std::size_t i = 0; i < kNumLevels; ++i) {
      row[std::string(kLevelKeys[i])] = m.odds_uplift[static_cast<std::size_t>(k)][i];
    }
    uplift[std::string(class_name(k))] = std::move(row);
  }
  j = Json{{"odds_uplift", std::move(uplift)},
           {"hallucination", m.hallucination},
           {"inflation", m.inflation},
           {"hallucination_target", std::string(class_name(m.hallucination_target))}};
}

void from_json(const Json& j, SrEffectModel& m) {
  Reader r(j, "");
  if (const Json* u = r.find("odds_uplift")) {
    if (!u->is_object()) r.fail("odds_uplift", "expected a class-keyed object");
    for (auto it = u->begin(); it != u->end(); ++it) {
      auto& row = m.odds_uplift[static_cast<std::size_t>(class_from_key(it.key()))];
      if (!it->is_object()) r.fail("odds_uplift", "expected level-keyed objects");
      for (auto lv = it->begin(); lv != it->end(); ++lv) {
        if (!lv->is_number()) r.fail("odds_uplift", "uplift must be a number");
        row[level_from_key(lv.key())] = lv->get<double>();
      }
    }
  }
  r.boolean("hallucination", m.hallucination);
  r.num("inflation", m.inflation);
  if (const Json* t = r.find("hallucination_target")) {
    if (!t->is_string()) r.fail("hallucination_target", "expected a behavior class name");
    m.hallucination_target = class_from_key(t->get<std::string>());
  }
  r.finish();
}

void to_json(Json& j, const Scenario& s) {
  j = Json{{"confidence", Json(s.confidence)},
           {"artifacts", Json(s.artifacts)},
           {"sr_effect", Json(s.sr_effect)},
           {"critical_classes", class_set_json(s.critical)}};
}

void from_json(const Json& j, Scenario& s) {
  Reader r(j, "");
  r.sub("confidence", s.confidence);
  r.sub("artifacts", s.artifacts);
  r.sub("sr_effect", s.sr_effect);
  r.sub("critical_classes", s.critical);
  r.finish();
}

void to_json(Json& j, const ExperimentConfig& c) {
  j = Json{{"thresholds", Json(c.thresholds)},
           {"adaptive", Json(c.adaptive)},
           {"utility", Json(c.utility)},
           {"costs", Json(c.costs)},
           {"guard_enabled", c.guard_enabled},
           {"guard", Json(c.guard)},
           {"scenario", Json(c.scenario)},
           {"bins", c.bins},
           {"n_resamples", c.n_resamples},
           {"ci_level", c.ci_level},
           {"tune_thresholds", c.tune_thresholds},
           {"grid_step", c.grid_step}};
}

void from_json(const Json& j, ExperimentConfig& c) {
  Reader r(j, "");
  r.sub("thresholds", c.thresholds);
  r.sub("adaptive", c.adaptive);
  r.sub("utility", c.utility);
  r.sub("costs", c.costs);
  r.boolean("guard_enabled", c.guard_enabled);
  r.sub("guard", c.guard);
  r.sub("scenario", c.scenario);
  r.integer("bins", c.bins);
  r.integer("n_resamples", c.n_resamples);
  r.num("ci_level", c.ci_level);
  r.boolean("tune_thresholds", c.tune_thresholds);
  r.num("grid_step", c.grid_step);
  r.finish();
}

Json to_json(const CalibrationReport& r) {
  Json bins = Json::array();
  for (const auto& b : r.bins) {
    bins.push_back(Json{{"lo", b.lo},
                        {"hi", b.hi},
                        {"count", b.count},
                        {"mean_conf", b.mean_conf},
                        {"accuracy", b.accuracy}});
  }
  Json ci = Json::object();
  for (const auto& [name, c] : r.ci) ci[name] = Json{{"lo", c.lo}, {"hi", c.hi}, {"level", c.level}};
  return Json{{"n", r.n},
              {"ece", r.ece},
              {"brier", r.brier},
              {"per_class_auroc", class_map_json(r.per_class_auroc)},
              {"per_class_aupr", class_map_json(r.per_class_aupr)},
              {"ci", std::move(ci)},
              {"bins", std::move(bins)}};
}

CalibrationReport calibration_report_from_json(const Json& j) {
  constexpr Errc e = Errc::schema_mismatch;
  CalibrationReport out;
  Reader r(j, "calibration", e);
  r.integer("n", out.n);
  r.num("ece", out.ece);
  r.num("brier", out.brier);
  out.per_class_auroc = class_map_from(*r.required("per_class_auroc"), e);
  out.per_class_aupr = class_map_from(*r.required("per_class_aupr"), e);
  const Json& ci = *r.required("ci");
  if (!ci.is_object()) r.fail("ci", "expected an object");
  for (auto it = ci.begin(); it != ci.end(); ++it) {
    ConfidenceInterval c;
    Reader cr(*it, "ci." + it.key(), e);
    cr.num("lo", c.lo);
    cr.num("hi", c.hi);
    cr.num("level", c.level);
    cr.finish();
    out.ci[it.key()] = c;
  }
  const Json& bins = *r.required("bins");
  if (!bins.is_array()) r.fail("bins", "expected an array");
  for (const auto& bj : bins) {
    ReliabilityBin b;
    Reader br(bj, "bins[]", e);
    br.num("lo", b.lo);
    br.num("hi", b.hi);
    br.integer("count", b.count);
    br.num("mean_conf", b.mean_conf);
    br.num("accuracy", b.accuracy);
    br.finish();
    out.bins.push_back(b);
  }
  r.finish();
  return out;
}

Json to_json(const CostSummary& s) {
  return Json{{"n", s.n},
              {"total", Json(s.total)},
              {"mean", Json(s.mean)},
              {"histogram", histogram_json(s.histogram)}};
}

Json to_json(const GateDecision& d) {
  Json u = Json::object();
  for (std::size_t i = 0; i < kNumLevels; ++i) u[std::string(kLevelKeys[i])] = d.utility_by_level[i];
  return Json{{"level", std::string(to_string(d.level))},
              {"tau_used", d.tau_used},
              {"reason", std::string(to_string(d.reason))},
              {"utility_by_level", std::move(u)}};
}

Json report_to_json(const ExperimentReport& rep) {
  const auto& g = rep.guard;
  Json folds = Json::array();
  for (const auto& f : rep.folds) {
    folds.push_back(Json{{"test_subject", f.test_subject},
                         {"n", f.n},
                         {"tau_low", f.tau_low},
                         {"tau_high", f.tau_high},
                         {"ece", f.ece},
                         {"brier", f.brier},
                         {"mean_gflops", f.mean_gflops},
                         {"critical_fp", f.critical_fp},
                         {"histogram", histogram_json(f.histogram)}});
  }
  return Json{{"schema_version", kReportSchemaVersion},
              {"policy", rep.policy},
              {"seed", rep.seed},
              {"calibration", to_json(rep.calibration)},
              {"cost", to_json(rep.cost)},
              {"guard",
               Json{{"sr_records", g.sr_records},
                    {"evaluated", g.evaluated},
                    {"triggered", g.triggered},
                    {"trigger_rate", g.trigger_rate},
                    {"hallucinated_sr", g.hallucinated_sr},
                    {"critical_fp", g.critical_fp},
                    {"critical_fp_rate", g.critical_fp_rate},
                    {"critical_fp_definition", g.critical_fp_definition}}},
              {"folds", std::move(folds)},
              {"config", rep.config}};
}

ExperimentReport report_from_json(const Json& j) {
  constexpr Errc e = Errc::schema_mismatch;
  if (!j.is_object()) throw Error(e, "report must be an object");
  const auto sv = j.find("schema_version");
  if (sv == j.end() || !sv->is_number_integer() || sv->get<long long>() != kReportSchemaVersion) {
    throw Error(e, "unsupported report schema version (expected " +
                       std::to_string(kReportSchemaVersion) + ")");
  }
  ExperimentReport rep;
  Reader r(j, "", e);
  r.find("schema_version");
  r.str("policy", rep.policy);
  r.integer("seed", rep.seed);
  rep.calibration = calibration_report_from_json(*r.required("calibration"));

  Reader cr(*r.required("cost"), "cost", e);
  cr.integer("n", rep.cost.n);
  if (const Json* v = cr.required("total")) {
    try {
      from_json(*v, rep.cost.total);
    } catch (const Error& x) {
      throw Error(e, std::string("cost.total: ") + x.what());
    }
  }
  if (const Json* v = cr.required("mean")) {
    try {
      from_json(*v, rep.cost.mean);
    } catch (const Error& x) {
      throw Error(e, std::string("cost.mean: ") + x.what());
    }
  }
  rep.cost.histogram = histogram_from(*cr.required("histogram"), e);
  cr.finish();

  auto& g = rep.guard;
  Reader gr(*r.required("guard"), "guard", e);
  gr.integer("sr_records", g.sr_records);
  gr.integer("evaluated", g.evaluated);
  gr.integer("triggered", g.triggered);
  gr.num("trigger_rate", g.trigger_rate);
  gr.integer("hallucinated_sr", g.hallucinated_sr);
  gr.integer("critical_fp", g.critical_fp);
  gr.num("critical_fp_rate", g.critical_fp_rate);
  gr.str("critical_fp_definition", g.critical_fp_definition);
  gr.finish();

  const Json& folds = *r.required("folds");
  if (!folds.is_array()) r.fail("folds", "expected an array");
  for (const auto& fj : folds) {
    FoldResult f;
    Reader fr(fj, "folds[]", e);
    fr.str("test_subject", f.test_subject);
    fr.integer("n", f.n);
    fr.num("tau_low", f.tau_low);
    fr.num("tau_high", f.tau_high);
    fr.num("ece", f.ece);
    fr.num("brier", f.brier);
    fr.num("mean_gflops", f.mean_gflops);
    fr.integer("critical_fp", f.critical_fp);
    f.histogram = histogram_from(*fr.required("histogram"), e);
    fr.finish();
    rep.folds.push_back(std::move(f));
  }
  rep.config = *r.required("config");
  r.finish();
  return rep;
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

Json load_json_file(const std::filesystem::path& path, Errc parse_errc) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_failure, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error(Errc::io_failure, "cannot read " + path.string());
  try {
    return Json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(parse_errc, path.string() + " is not valid JSON: " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io_failure, "cannot write " + path.string());
  out << text;
  out.flush();
  if (!out) throw Error(Errc::io_failure, "write failed for " + path.string());
}

void write_report(const ExperimentReport& report, const std::filesystem::path& path) {
  write_text_file(path, dump_json(report_to_json(report)));
}

ExperimentReport read_report(const std::filesystem::path& path) {
  return report_from_json(load_json_file(path, Errc::schema_mismatch));
}

}  // namespace adaptsr
