#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "adaptsr/cli.hpp"
#include "doctest.h"

namespace fs = std::filesystem;
using adaptsr::Json;
using adaptsr::cli::run_cli;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("adaptsr_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Small simulated log shared by the tests below.
fs::path sample_log() {
  static const fs::path log = [] {
    const auto dir = scratch("log");
    const auto r = run({"simulate", "--seed", "11", "--n-per-class", "30", "--n-subjects", "5",
                        "--out", dir.string()});
    REQUIRE(r.code == 0);
    return dir / "predictions.log";
  }();
  return log;
}

void write_pgm(const fs::path& p, int w, int h, int value) {
  std::ofstream out(p);
  out << "P2\n" << w << ' ' << h << "\n255\n";
  for (int i = 0; i < w * h; ++i) out << (value + (i % 3) * 20) << '\n';
}

int shell(const std::string& cmd) {
  const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("gate writes per-record decisions") {
  const auto dir = scratch("gate");
  const auto r = run({"gate", "--log", sample_log().string(), "--tau-low", "0.60", "--tau-high",
                      "0.85", "--out", dir.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("decisions.csv") != std::string::npos);
  const auto csv = slurp(dir / "decisions.csv");
  CHECK(csv.rfind("clip_id,subject_id,confidence,criticality,level,reason", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 30 * 7);
  const auto rep = Json::parse(slurp(dir / "gate_report.json"));
  CHECK(rep.at("config").at("tau_low") == 0.60);
  CHECK(rep.at("config").at("subcommand") == "gate");
}

TEST_CASE("calibrate reports bootstrap intervals") {
  const auto dir = scratch("calibrate");
  const auto r = run({"calibrate", "--log", sample_log().string(), "--bins", "10", "--resamples",
                      "200", "--seed", "7", "--out", dir.string()});
  REQUIRE(r.code == 0);
  const auto rep = Json::parse(slurp(dir / "calibration_report.json"));
  const auto& ci = rep.at("calibration").at("ci");
  CHECK(ci.at("ece").at("level") == 0.95);
  CHECK(ci.at("ece").at("lo").get<double>() <= ci.at("ece").at("hi").get<double>());
  CHECK(rep.at("calibration").at("bins").size() == 10);
}

TEST_CASE("usage errors exit 2") {
  CHECK(run({"gate", "--bogus"}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({}).code == 2);
  CHECK(run({"calibrate", "--log", sample_log().string()}).code == 2);  // no seed
  CHECK(run({"gate", "--log", sample_log().string(), "--tau-low", "0.9", "--tau-high", "0.5"}).code == 2);
  CHECK(run({"gate", "--log", sample_log().string(), "--format", "xml"}).code == 2);
  CHECK(run({"gate", "--help"}).code == 0);
}

TEST_CASE("data errors exit 3, I/O errors exit 4") {
  const auto dir = scratch("errors");
  std::ofstream(dir / "bad.log") << R"({"subject_id":"A"})" << '\n';
  CHECK(run({"gate", "--log", (dir / "bad.log").string(), "--out", dir.string()}).code == 3);
  CHECK(run({"gate", "--log", (dir / "missing.log").string(), "--out", dir.string()}).code == 4);
  // Simulated logs carry artifact scores; a plain record does not.
  std::ofstream(dir / "plain.log")
      << R"({"subject_id":"A","clip_id":"c","true_class":0,"probs":[0.4,0.1,0.1,0.1,0.1,0.1,0.1],)"
      << R"("confidence":0.4,"criticality":0,"blur":0.1,"lighting":0.5})" << '\n';
  CHECK(run({"guard", "--log", (dir / "plain.log").string(), "--out", dir.string()}).code == 3);
}

TEST_CASE("every subcommand runs and repeats byte-identically") {
  const auto dir = scratch("all");
  write_pgm(dir / "a.pgm", 8, 8, 100);
  write_pgm(dir / "b.pgm", 8, 8, 120);
  std::ofstream(dir / "methods.csv") << "name,accuracy,cost,fps,power_w\n"
                                     << "bicubic,0.70,2.3,60,8.3\nlight,0.76,4.0,40,10\n"
                                     << "car4x,0.80,18.7,7,26.4\nworse,0.69,20,5,30\n";
  const auto log = sample_log().string();
  const std::vector<std::pair<std::string, std::vector<std::string>>> runs{
      {"quality_report.json",
       {"quality", "--images", (dir / "a.pgm").string(), (dir / "b.pgm").string(),
        "--reference-image", (dir / "a.pgm").string(), "--sr-frames", (dir / "a.pgm").string(),
        (dir / "b.pgm").string(), "--lr-frames", (dir / "a.pgm").string(), (dir / "a.pgm").string()}},
      {"gate_report.json", {"gate", "--log", log, "--policy", "gate_adaptive"}},
      {"calibration_report.json", {"calibrate", "--log", log, "--seed", "3", "--resamples", "50", "--format", "csv"}},
      {"guard_report.json", {"guard", "--log", log}},
      {"sweep_report.json", {"sweep", "--log", log, "--grid-step", "0.1"}},
      {"pareto_report.json", {"pareto", "--methods", (dir / "methods.csv").string()}},
      {"simulate_report.json", {"simulate", "--seed", "5", "--n-per-class", "10", "--n-subjects", "3"}},
      {"experiment_report.json", {"loso-eval", "--log", log, "--seed", "5", "--resamples", "30"}},
  };
  for (const auto& [report, args] : runs) {
    CAPTURE(report);
    auto first = args;
    first.insert(first.end(), {"--out", (dir / "one").string()});
    auto second = args;
    second.insert(second.end(), {"--out", (dir / "two").string()});
    const auto a = run(first);
    REQUIRE(a.code == 0);
    REQUIRE(run(second).code == 0);
    const auto body = slurp(dir / "one" / report);
    CHECK_FALSE(body.empty());
    CHECK(body == slurp(dir / "two" / report));

    // The echoed config, fed back, reproduces the report.
    const auto echo = dir / "echo.json";
    std::ofstream(echo) << Json::parse(body).at("config").dump();
    REQUIRE(run({args[0], "--config", echo.string(), "--out", (dir / "three").string()}).code == 0);
    CHECK(slurp(dir / "three" / report) == body);
  }
  const auto pareto = slurp(dir / "one" / "pareto.csv");
  CHECK(pareto.find("on_frontier") != std::string::npos);
  CHECK(fs::exists(dir / "one" / "reliability.csv"));
  CHECK(fs::exists(dir / "one" / "pr_curve_drowsiness.csv"));
}

TEST_CASE("config files: flags win, unknown keys are rejected") {
  const auto dir = scratch("config");
  std::ofstream(dir / "cfg.json") << R"({"tau_low":0.5,"tau_high":0.9,"log":")" << sample_log().string()
                                  << R"("})";
  REQUIRE(run({"gate", "--config", (dir / "cfg.json").string(), "--tau-high", "0.8", "--out",
               dir.string()})
              .code == 0);
  const auto cfg = Json::parse(slurp(dir / "gate_report.json")).at("config");
  CHECK(cfg.at("tau_low") == 0.5);
  CHECK(cfg.at("tau_high") == 0.8);

  std::ofstream(dir / "unknown.json") << R"({"tau_lo":0.5})";
  CHECK(run({"gate", "--config", (dir / "unknown.json").string(), "--log", sample_log().string()}).code == 2);
  std::ofstream(dir / "other.json") << R"({"subcommand":"sweep"})";
  CHECK(run({"gate", "--config", (dir / "other.json").string(), "--log", sample_log().string()}).code == 2);
}

TEST_CASE("the installed binary maps errors to exit codes") {
  const std::string bin = ADAPTSR_CLI_PATH;
  CHECK(shell(bin + " --help") == 0);
  CHECK(shell(bin + " gate --nope") == 2);
  CHECK(shell(bin + " gate --log /nonexistent/preds.log") == 4);
}
