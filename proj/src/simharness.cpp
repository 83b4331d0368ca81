#include "adaptsr/simharness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "adaptsr/error.hpp"
#include "adaptsr/parallel.hpp"
#include "adaptsr/serialize.hpp"

namespace adaptsr {

namespace {

constexpr std::uint64_t kStreamTag = 0x5354524541ULL;
constexpr int kMaxRejections = 1000000;

double uniform01(std::mt19937_64& engine) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(engine);
}

double uniform(std::mt19937_64& engine, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(engine);
}

void check_normal(const TruncatedNormal& d, const char* what) {
  if (!std::isfinite(d.mean) || !(d.sd > 0.0) || !std::isfinite(d.sd)) {
    throw Error(Errc::invalid_model_params, std::string(what) + ": need finite mean and sd > 0");
  }
}

double odds(double p) { return p / (1.0 - p); }

std::string subject_name(int s) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "S%02d", s + 1);
  return buf;
}

// Keeps the predicted class on top while moving its probability to `conf`.
std::vector<double> rescale_top(const std::vector<double>& probs, int top, double conf) {
  std::vector<double> out = probs;
  const double old = probs[static_cast<std::size_t>(top)];
  const double rest = 1.0 - old;
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (static_cast<int>(k) == top) {
      out[k] = conf;
    } else if (rest > 0.0) {
      out[k] = probs[k] * (1.0 - conf) / rest;
    } else {
      out[k] = (1.0 - conf) / static_cast<double>(out.size() - 1);
    }
  }
  return out;
}

void set_prediction(PredictionRecord& r, int cls, double conf, const ClassSet& critical) {
  r.probs = spread_probs(cls, conf);
  r.confidence = conf;
  r.criticality = critical.test(static_cast<std::size_t>(cls)) ? 1 : 0;
}

}  // namespace

double sample_truncated_normal(const TruncatedNormal& dist, double lo, double hi,
                               std::mt19937_64& engine) {
  check_normal(dist, "truncated normal");
  if (!(lo < hi)) throw Error(Errc::invalid_model_params, "truncation interval is empty");
  for (int i = 0; i < kMaxRejections; ++i) {
    const double x = std::normal_distribution<double>(dist.mean, dist.sd)(engine);
    if (x >= lo && x <= hi) return x;
  }
  throw Error(Errc::invalid_model_params, "truncation interval has negligible mass");
}

BehaviorConfidenceModel BehaviorConfidenceModel::defaults() {
  BehaviorConfidenceModel m;
  auto single = [](double mu, double sd) { return ConfidenceDistribution{{mu, sd}, std::nullopt, 1.0}; };
  m.classes[static_cast<int>(Behavior::normal_driving)] = single(0.87, 0.12);
  m.classes[static_cast<int>(Behavior::texting)] = single(0.75, 0.15);
  m.classes[static_cast<int>(Behavior::phone_call)] =
      ConfidenceDistribution{{0.55, 0.10}, TruncatedNormal{0.85, 0.08}, 0.5};
  m.classes[static_cast<int>(Behavior::reaching_behind)] = single(0.72, 0.15);
  m.classes[static_cast<int>(Behavior::adjusting_radio)] = single(0.74, 0.15);
  m.classes[static_cast<int>(Behavior::drinking)] = single(0.76, 0.14);
  m.classes[static_cast<int>(Behavior::drowsiness)] = single(0.62, 0.23);
  return m;
}

void BehaviorConfidenceModel::validate() const {
  for (const auto& c : classes) {
    check_normal(c.first, "confidence distribution");
    if (c.second) check_normal(*c.second, "confidence mixture component");
    if (!(c.mix >= 0.0 && c.mix <= 1.0)) {
      throw Error(Errc::invalid_model_params, "mixture weight must be in [0,1]");
    }
  }
  if (!(miscalibration >= -1.0 && miscalibration <= 1.0)) {
    throw Error(Errc::invalid_model_params, "miscalibration offset must be in [-1,1]");
  }
  if (!(confidence_floor >= 1.0 / kNumClasses && confidence_floor < 1.0)) {
    throw Error(Errc::invalid_model_params, "confidence floor must be in [1/7, 1)");
  }
}

double BehaviorConfidenceModel::correctness_probability(double p) const noexcept {
  return std::clamp(p - miscalibration, 0.0, 1.0);
}

double BehaviorConfidenceModel::sample(int cls, std::mt19937_64& engine) const {
  const auto& c = classes.at(static_cast<std::size_t>(cls));
  const TruncatedNormal* d = &c.first;
  if (c.second && uniform01(engine) >= c.mix) d = &*c.second;
  return sample_truncated_normal(*d, confidence_floor, 1.0, engine);
}

void ArtifactModel::validate() const {
  if (!(rate >= 0.0 && rate <= 1.0)) {
    throw Error(Errc::invalid_model_params, "artifact rate must be in [0,1]");
  }
  check_normal(detector_hallucinated, "detector score (hallucinated)");
  check_normal(detector_clean, "detector score (clean)");
}

SrEffectModel SrEffectModel::defaults() {
  SrEffectModel m;
  for (int k = 0; k < kNumClasses; ++k) {
    const double x4 = odds(kCar4xClassAccuracy[k]) / odds(kLrClassAccuracy[k]);
    m.odds_uplift[k] = {1.0, std::sqrt(x4), x4};
  }
  return m;
}

void SrEffectModel::validate() const {
  for (const auto& row : odds_uplift) {
    for (double u : row) {
      if (!(u > 0.0) || !std::isfinite(u)) {
        throw Error(Errc::invalid_model_params, "odds uplift must be positive and finite");
      }
    }
  }
  if (!(inflation >= 0.0 && inflation <= 1.0)) {
    throw Error(Errc::invalid_model_params, "hallucination inflation must be in [0,1]");
  }
  if (!valid_class(hallucination_target)) {
    throw Error(Errc::invalid_model_params, "hallucination target is not a behavior class");
  }
}

double SrEffectModel::correctness_at(int cls, SRLevel level, double q_none) const {
  if (!valid_class(cls)) throw Error(Errc::invalid_argument, "class id out of range");
  if (q_none <= 0.0 || q_none >= 1.0) return q_none;
  const double u = odds_uplift[static_cast<std::size_t>(cls)][static_cast<std::size_t>(level_index(level))];
  const double o = odds(q_none) * u;
  return o / (1.0 + o);
}

void Scenario::validate() const {
  confidence.validate();
  artifacts.validate();
  sr_effect.validate();
}

std::vector<PredictionRecord> sample_stream(const Scenario& scenario, int n_per_class,
                                            int n_subjects, std::uint64_t seed) {
  if (n_per_class < 1 || n_subjects < 1) {
    throw Error(Errc::invalid_model_params, "n_per_class and n_subjects must be >= 1");
  }
  scenario.validate();
  std::mt19937_64 engine(derive_seed(seed, kStreamTag));
  std::vector<PredictionRecord> out;
  out.reserve(static_cast<std::size_t>(n_per_class) * kNumClasses);
  for (int i = 0; i < n_per_class; ++i) {
    for (int k = 0; k < kNumClasses; ++k) {
      PredictionRecord r;
      r.subject_id = subject_name(i % n_subjects);
      r.clip_id = r.subject_id + "_" + std::string(class_name(k)) + "_" + std::to_string(i);
      r.true_class = k;
      const double p = scenario.confidence.sample(k, engine);
      const double q0 = scenario.confidence.correctness_probability(p);
      const double u = uniform01(engine);
      std::array<int, kNumLevels> correct{};
      for (SRLevel L : kAllLevels) {
        correct[static_cast<std::size_t>(level_index(L))] =
            u < scenario.sr_effect.correctness_at(k, L, q0) ? 1 : 0;
      }
      int predicted = k;
      if (!correct[0]) {
        predicted = static_cast<int>(engine() % (kNumClasses - 1));
        if (predicted >= k) ++predicted;
      }
      set_prediction(r, predicted, p, scenario.critical);
      r.blur = uniform01(engine);
      r.lighting = uniform01(engine);
      if (uniform01(engine) < scenario.artifacts.rate) {
        r.ssim_vs_hr = uniform(engine, 0.45, 0.7);
        r.perceptual_loss = uniform(engine, 0.1, 0.5);
        r.artifact_score =
            sample_truncated_normal(scenario.artifacts.detector_hallucinated, 0.0, 1.0, engine);
      } else {
        r.ssim_vs_hr = uniform(engine, 0.72, 0.98);
        r.perceptual_loss = uniform(engine, 0.0, 0.3);
        r.artifact_score = sample_truncated_normal(scenario.artifacts.detector_clean, 0.0, 1.0, engine);
      }
      r.correct_by_level = correct;
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::vector<Fold> loso_splits(std::span<const PredictionRecord> records) {
  const auto subjects = distinct_subjects(records);
  if (subjects.size() < 2) {
    throw Error(Errc::too_few_subjects, "LOSO needs at least 2 subjects, found " +
                                            std::to_string(subjects.size()));
  }
  std::map<std::string, std::size_t> index;
  for (std::size_t s = 0; s < subjects.size(); ++s) index.emplace(subjects[s], s);
  std::vector<Fold> folds(subjects.size());
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    folds[s].test_subject = subjects[s];
    for (std::size_t t = 0; t < subjects.size(); ++t) {
      if (t != s) folds[s].train_subjects.push_back(subjects[t]);
    }
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    const std::size_t s = index.at(records[i].subject_id);
    for (std::size_t f = 0; f < folds.size(); ++f) {
      (f == s ? folds[f].test_indices : folds[f].train_indices).push_back(i);
    }
  }
  return folds;
}

std::string_view to_string(Policy policy) noexcept {
  switch (policy) {
    case Policy::fixed_none: return "fixed_none";
    case Policy::fixed_4x: return "fixed_4x";
    case Policy::gate: return "gate";
    case Policy::gate_adaptive: return "gate_adaptive";
  }
  return "gate";
}

std::optional<Policy> parse_policy(std::string_view text) {
  for (Policy p : {Policy::fixed_none, Policy::fixed_4x, Policy::gate, Policy::gate_adaptive}) {
    if (text == to_string(p)) return p;
  }
  return std::nullopt;
}

void ExperimentConfig::validate() const {
  thresholds.validate();
  adaptive.validate();
  utility.validate();
  costs.validate();
  guard.validate();
  scenario.validate();
  if (bins < 1) throw Error(Errc::invalid_argument, "bins must be >= 1");
  if (n_resamples < 1) throw Error(Errc::invalid_argument, "resamples must be >= 1");
  if (!(ci_level > 0.0 && ci_level < 1.0)) {
    throw Error(Errc::invalid_argument, "CI level must be in (0,1)");
  }
  if (!(grid_step > 0.0 && grid_step <= 0.25)) {
    throw Error(Errc::invalid_argument, "grid step must be in (0, 0.25]");
  }
}

bool is_critical_false_positive(const PredictionRecord& r, const ClassSet& critical) {
  if (critical.test(static_cast<std::size_t>(r.true_class))) return false;
  const int pred = predicted_class(r);
  return critical.test(static_cast<std::size_t>(pred)) && r.confidence > 0.5;
}

GateDecision decide(const PredictionRecord& record, Policy policy, const Thresholds& thresholds,
                    const ExperimentConfig& cfg) {
  if (policy == Policy::gate_adaptive) {
    return gate_adaptive(record, thresholds, cfg.adaptive, cfg.utility, cfg.costs);
  }
  GateDecision d;
  if (policy == Policy::gate) {
    d = gate(record.confidence, record.criticality, thresholds);
  } else {
    d.level = policy == Policy::fixed_none ? SRLevel::None : SRLevel::X4;
    d.tau_used = thresholds.tau_high;
    d.reason = GateReason::fixed_policy;
  }
  const int cls = predicted_class(record);
  for (SRLevel l : kAllLevels) {
    d.utility_by_level[static_cast<std::size_t>(level_index(l))] = expected_utility(
        delta_acc_estimate(cfg.utility, cls, l, record.confidence),
        cfg.utility.weight(record.criticality), utility_cost(cfg.costs, l), cfg.utility.lambda);
  }
  return d;
}

RecordTrace run_record(const PredictionRecord& record, Policy policy, const Thresholds& thresholds,
                       const ExperimentConfig& cfg) {
  RecordTrace tr;
  tr.decision = decide(record, policy, thresholds, cfg);

  PredictionRecord fin = record;
  fin.correct_by_level.reset();
  const SRLevel L = tr.decision.level;
  if (L != SRLevel::None) {
    const auto& sc = cfg.scenario;
    tr.hallucinated = sc.sr_effect.hallucination && record.ssim_vs_hr && record.perceptual_loss &&
                      label_artifact(*record.ssim_vs_hr, *record.perceptual_loss);
    if (tr.hallucinated) {
      const double conf = record.confidence + sc.sr_effect.inflation * (1.0 - record.confidence);
      set_prediction(fin, sc.sr_effect.hallucination_target, conf, cfg.utility.critical);
    } else if (record.correct_by_level) {
      const int lr_pred = predicted_class(record);
      const bool ok = (*record.correct_by_level)[static_cast<std::size_t>(level_index(L))] != 0;
      const double q0 = sc.confidence.correctness_probability(record.confidence);
      const double qL = sc.sr_effect.correctness_at(record.true_class, L, q0);
      const double conf = std::clamp(qL + sc.confidence.miscalibration,
                                     sc.confidence.confidence_floor, 1.0);
      set_prediction(fin, ok ? record.true_class : lr_pred, conf, cfg.utility.critical);
    }
    if (cfg.guard_enabled && record.artifact_score) {
      tr.guard = apply_guard(*record.artifact_score, tr.decision, record.confidence, cfg.guard);
      if (tr.guard->triggered) {
        const int lr_pred = predicted_class(record);
        fin.probs = rescale_top(record.probs, lr_pred, tr.guard->final_confidence);
        fin.confidence = tr.guard->final_confidence;
        fin.criticality = record.criticality;
      }
    }
  }
  tr.final_record = std::move(fin);
  return tr;
}

namespace {

Thresholds fold_thresholds(std::span<const PredictionRecord> records, const Fold& fold,
                           Policy policy, const ExperimentConfig& cfg) {
  Thresholds t = cfg.thresholds;
  if (!cfg.tune_thresholds || (policy != Policy::gate && policy != Policy::gate_adaptive)) return t;
  std::vector<PredictionRecord> train;
  train.reserve(fold.train_indices.size());
  for (std::size_t i : fold.train_indices) train.push_back(records[i]);
  const auto opt = optimize_thresholds(train, cfg.utility, cfg.costs, cfg.grid_step,
                                       cfg.thresholds.critical_cut);
  t.tau_low = opt.tau_low;
  t.tau_high = opt.tau_high;
  return t;
}

FoldResult evaluate_fold(const Fold& fold, const Thresholds& t, std::span<const RecordTrace> traces,
                         const ExperimentConfig& cfg) {
  std::vector<PredictionRecord> finals;
  std::vector<GateDecision> decisions;
  finals.reserve(fold.test_indices.size());
  decisions.reserve(fold.test_indices.size());
  FoldResult res;
  for (std::size_t i : fold.test_indices) {
    finals.push_back(traces[i].final_record);
    decisions.push_back(traces[i].decision);
    if (is_critical_false_positive(traces[i].final_record, cfg.utility.critical)) ++res.critical_fp;
  }
  res.test_subject = fold.test_subject;
  res.n = finals.size();
  res.tau_low = t.tau_low;
  res.tau_high = t.tau_high;
  res.ece = ece(finals, cfg.bins);
  res.brier = brier(finals);
  const auto cost = accumulate_cost(decisions, cfg.costs);
  res.mean_gflops = cost.mean.gflops;
  res.histogram = cost.histogram;
  return res;
}

void check_records(std::span<const PredictionRecord> records) {
  if (records.empty()) throw Error(Errc::empty_input, "no records to evaluate");
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto v = validate_record(records[i]);
    if (!v.empty()) {
      std::string msg;
      for (const auto& x : v) msg += (msg.empty() ? "" : "; ") + x.field + ": " + x.rule;
      throw Error(Errc::malformed_record, msg, i + 1);
    }
    if (records[i].probs.empty()) {
      throw Error(Errc::missing_probs, "experiment records need probs", i + 1);
    }
  }
}

ExperimentRun assemble(std::span<const PredictionRecord> records, Policy policy,
                       const ExperimentConfig& cfg, std::uint64_t seed,
                       std::vector<RecordTrace> traces, std::vector<FoldResult> folds) {
  ExperimentRun run;
  auto& rep = run.report;
  rep.policy = std::string(to_string(policy));
  rep.seed = seed;
  rep.folds = std::move(folds);

  std::vector<PredictionRecord> finals;
  std::vector<GateDecision> decisions;
  finals.reserve(traces.size());
  decisions.reserve(traces.size());
  auto& g = rep.guard;
  for (const auto& tr : traces) {
    finals.push_back(tr.final_record);
    decisions.push_back(tr.decision);
    if (tr.decision.level != SRLevel::None) {
      ++g.sr_records;
      if (tr.hallucinated) ++g.hallucinated_sr;
    }
    if (tr.guard) {
      ++g.evaluated;
      if (tr.guard->triggered) ++g.triggered;
    }
    if (is_critical_false_positive(tr.final_record, cfg.utility.critical)) ++g.critical_fp;
  }
  g.trigger_rate = g.evaluated ? static_cast<double>(g.triggered) / static_cast<double>(g.evaluated) : 0.0;
  g.critical_fp_rate = static_cast<double>(g.critical_fp) / static_cast<double>(traces.size());

  std::vector<MetricSpec> metrics{MetricSpec{MetricKind::ece, -1, cfg.bins}};
  for (int c = 0; c < kNumClasses; ++c) {
    if (!cfg.utility.critical.test(static_cast<std::size_t>(c))) continue;
    MetricSpec m{MetricKind::aupr, c, cfg.bins};
    if (m.try_evaluate(finals)) metrics.push_back(m);
  }
  BootstrapOptions opts;
  opts.n_resamples = cfg.n_resamples;
  opts.level = cfg.ci_level;
  opts.seed = seed;
  rep.calibration = calibration_report(finals, cfg.bins, metrics, opts);
  rep.cost = accumulate_cost(decisions, cfg.costs);
  rep.config = Json(cfg);
  (void)records;
  run.traces = std::move(traces);
  return run;
}

}  // namespace

ExperimentRun run_experiment_traced(std::span<const PredictionRecord> records, Policy policy,
                                    const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  check_records(records);
  const auto folds = loso_splits(records);
  std::vector<RecordTrace> traces(records.size());
  std::vector<FoldResult> results(folds.size());
  std::vector<std::exception_ptr> errors(folds.size());
  const auto nf = static_cast<std::ptrdiff_t>(folds.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t f = 0; f < nf; ++f) {
    const auto& fold = folds[static_cast<std::size_t>(f)];
    try {
      const Thresholds t = fold_thresholds(records, fold, policy, cfg);
      for (std::size_t i : fold.test_indices) traces[i] = run_record(records[i], policy, t, cfg);
      results[static_cast<std::size_t>(f)] = evaluate_fold(fold, t, traces, cfg);
    } catch (...) {
      errors[static_cast<std::size_t>(f)] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return assemble(records, policy, cfg, seed, std::move(traces), std::move(results));
}

ExperimentReport run_experiment(std::span<const PredictionRecord> records, Policy policy,
                                const ExperimentConfig& cfg, std::uint64_t seed) {
  return run_experiment_traced(records, policy, cfg, seed).report;
}

namespace reference {

ExperimentReport run_experiment(std::span<const PredictionRecord> records, Policy policy,
                                const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  check_records(records);
  const auto folds = loso_splits(records);
  std::vector<RecordTrace> traces(records.size());
  std::vector<FoldResult> results;
  for (const auto& fold : folds) {
    const Thresholds t = fold_thresholds(records, fold, policy, cfg);
    for (std::size_t i : fold.test_indices) traces[i] = run_record(records[i], policy, t, cfg);
    results.push_back(evaluate_fold(fold, t, traces, cfg));
  }
  return assemble(records, policy, cfg, seed, std::move(traces), std::move(results)).report;
}

}  // namespace reference

}  // namespace adaptsr
