#include <filesystem>
#include <functional>
#include <random>
#include <sstream>

#include "adaptsr/core.hpp"
#include "adaptsr/error.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace adaptsr;

namespace {

std::string line(const std::string& subject, const std::string& probs, double conf, int crit = 0,
                 const std::string& extra = "") {
  return R"({"subject_id":")" + subject + R"(","clip_id":"c","true_class":0,"probs":)" + probs +
         R"(,"confidence":)" + std::to_string(conf) + R"(,"criticality":)" + std::to_string(crit) +
         R"(,"blur":0.1,"lighting":0.5)" + extra + "}";
}

const std::string kOneHot = "[1,0,0,0,0,0,0]";

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an adaptsr::Error");
  return Errc::io_failure;
}

}  // namespace

TEST_CASE("behavior classes and critical set") {
  CHECK(class_name(0) == "normal_driving");
  CHECK(class_id("drowsiness") == 6);
  CHECK_FALSE(class_id("sleeping").has_value());
  const auto crit = default_critical_set();
  CHECK(crit.count() == 3);
  CHECK(behavior_class(static_cast<int>(Behavior::texting)).critical);
  CHECK(behavior_class(static_cast<int>(Behavior::phone_call)).critical);
  CHECK(behavior_class(static_cast<int>(Behavior::drowsiness)).critical);
  CHECK_FALSE(behavior_class(static_cast<int>(Behavior::drinking)).critical);
  CHECK(parse_level("2x") == SRLevel::X2);
  CHECK(to_string(SRLevel::X4) == "4x");
}

TEST_CASE("read_log keeps file order") {
  std::istringstream in(line("A", kOneHot, 1.0) + "\n" + line("B", kOneHot, 1.0) + "\n");
  const auto recs = read_log(in);
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].subject_id == "A");
  CHECK(recs[1].subject_id == "B");
}

TEST_CASE("probs summing to 0.8 raise ProbSumViolation at that line") {
  std::istringstream in(line("A", kOneHot, 1.0) + "\n" + line("B", "[0.8,0,0,0,0,0,0]", 0.8) + "\n");
  try {
    read_log(in);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::prob_sum_violation);
    CHECK(e.line() == 2);
  }
}

TEST_CASE("24 distinct subjects are reported") {
  std::ostringstream out;
  for (int s = 0; s < 48; ++s) out << line("S" + std::to_string(s % 24), kOneHot, 1.0) << "\n";
  std::istringstream in(out.str());
  CHECK(distinct_subjects(read_log(in)).size() == 24);
}

TEST_CASE("empty log and malformed lines") {
  std::istringstream empty("\n  \n");
  CHECK(code_of([&] { read_log(empty); }) == Errc::empty_log);
  CHECK(code_of([] { parse_record_line("{not json", 3); }) == Errc::malformed_record);
  CHECK(code_of([] { parse_record_line(R"({"subject_id":"A"})", 1); }) == Errc::malformed_record);
  CHECK(code_of([] { (void)ingest_log("/nonexistent/dir/preds.log"); }) == Errc::io_failure);
}

TEST_CASE("unknown keys: strict rejects, lenient warns") {
  const auto text = line("A", kOneHot, 1.0, 0, R"(,"camera":"ir")");
  CHECK(code_of([&] { parse_record_line(text, 1); }) == Errc::malformed_record);
  std::vector<std::string> warnings;
  IngestOptions lenient;
  lenient.strict = false;
  lenient.on_warning = [&](const std::string& w) { warnings.push_back(w); };
  const auto r = parse_record_line(text, 1, lenient);
  CHECK(r.subject_id == "A");
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("camera") != std::string::npos);
}

TEST_CASE("true_class accepts ids and names") {
  auto text = line("A", "[0,0,0,0,0,0,1]", 1.0);
  text.replace(text.find(R"("true_class":0)"), 14, R"("true_class":"drowsiness")");
  CHECK(parse_record_line(text, 1).true_class == 6);
}

TEST_CASE("validate_record examples") {
  auto r = testutil::make_record("A", 0, 0, 1.0);
  r.probs = {1, 0, 0, 0, 0, 0, 0};
  CHECK(validate_record(r).empty());

  auto mismatch = testutil::make_record("A", 0, 0, 0.7);
  mismatch.confidence = 0.9;
  const auto v1 = validate_record(mismatch);
  REQUIRE(v1.size() == 1);
  CHECK(v1[0].rule == "confidence≠top1");

  auto crit = testutil::make_record("A", 0, 0, 1.0, 2);
  const auto v2 = validate_record(crit);
  REQUIRE(v2.size() == 1);
  CHECK(v2[0].rule == "criticality not in {0,1}");
}

TEST_CASE("validate_record range checks") {
  auto r = testutil::make_record("A", 0, 0, 0.9);
  r.lighting = 1.5;
  r.blur = -1.0;
  r.artifact_score = 2.0;
  r.ssim_vs_hr = -2.0;
  r.perceptual_loss = -0.1;
  CHECK(validate_record(r).size() == 5);
  auto bad_outcome = testutil::make_record("A", 0, 1, 0.9);
  bad_outcome.correct_by_level = std::array<int, 3>{1, 1, 1};
  CHECK(validate_record(bad_outcome).size() == 1);
}

TEST_CASE("predicted_class and spread_probs") {
  const auto p = spread_probs(3, 0.4);
  CHECK(p[3] == 0.4);
  CHECK(p[0] == doctest::Approx(0.1));
  PredictionRecord r;
  r.probs = {0.3, 0.3, 0.4, 0, 0, 0, 0};
  CHECK(predicted_class(r) == 2);
  r.probs = {0.5, 0.5, 0, 0, 0, 0, 0};
  CHECK(predicted_class(r) == 0);
  r.probs.clear();
  CHECK(code_of([&] { predicted_class(r); }) == Errc::missing_probs);
}

TEST_CASE("property: write then ingest reproduces records; ingested records validate") {
  std::mt19937_64 g(11);
  std::vector<PredictionRecord> recs;
  for (int i = 0; i < 300; ++i) {
    auto r = testutil::random_record(g);
    if (i % 3 == 0) {
      r.artifact_score = 0.25;
      r.perceptual_loss = 0.125;
      r.ssim_vs_hr = 0.8;
    }
    if (i % 4 == 0) {
      const int ok = predicted_class(r) == r.true_class ? 1 : 0;
      r.correct_by_level = std::array<int, 3>{ok, 1, 1};
    }
    recs.push_back(r);
  }
  std::stringstream buf;
  write_log(recs, buf);
  const auto back = read_log(buf);
  REQUIRE(back.size() == recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    CHECK(back[i] == recs[i]);
    CHECK(validate_record(back[i]).empty());
  }
}

TEST_CASE("ingest_log from a file") {
  const auto path = std::filesystem::temp_directory_path() / "adaptsr_core_test.log";
  const std::vector<PredictionRecord> recs{testutil::make_record("A", 1, 1, 0.9),
                                           testutil::make_record("B", 2, 1, 0.6)};
  write_log(recs, path);
  CHECK(ingest_log(path) == recs);
  std::filesystem::remove(path);
}

TEST_CASE("DeltaAccTable defaults and errors") {
  const auto t = DeltaAccTable::defaults();
  CHECK(t.complete());
  CHECK(t.at(static_cast<int>(Behavior::drowsiness), SRLevel::X4) == 0.263);
  CHECK(t.at(0, SRLevel::None) == 0.0);
  auto partial = t;
  partial.erase(1, SRLevel::X2);
  CHECK_FALSE(partial.complete());
  CHECK(code_of([&] { partial.at(1, SRLevel::X2); }) == Errc::missing_table_entry);
  CHECK(code_of([&] { partial.set(1, SRLevel::None, 0.1); }) == Errc::invalid_argument);
}

TEST_CASE("Error carries code and line") {
  const Error e(Errc::prob_sum_violation, "bad", 7);
  CHECK(e.code() == Errc::prob_sum_violation);
  CHECK(e.line() == 7);
  CHECK(std::string(e.what()).find("ProbSumViolation") != std::string::npos);
}
