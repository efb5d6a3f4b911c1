#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "cli/app.hpp"

namespace fs = std::filesystem;
using tcilab::cli::run_cli;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("tcilab-cli-" + name);
  fs::remove_all(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path printed_dir(const Outcome& o) {
  std::istringstream s(o.out);
  std::string line;
  std::getline(s, line);
  return line;
}

}  // namespace

TEST_CASE("simulate writes artifacts and a manifest, and is reproducible") {
  const auto a = fresh_dir("sim-a"), b = fresh_dir("sim-b");
  const std::vector<std::string> common{"simulate", "--driver", "rlfbm", "--n", "32", "--paths", "2", "--seed", "9",
                                        "--set", "driver.hurst=0.3"};
  auto args_a = common, args_b = common;
  args_a.insert(args_a.end(), {"--output", a.string()});
  args_b.insert(args_b.end(), {"--output", b.string(), "--threads", "1"});
  const auto ra = run(args_a), rb = run(args_b);
  REQUIRE(ra.code == 0);
  REQUIRE(rb.code == 0);
  const fs::path da = printed_dir(ra), db = printed_dir(rb);
  CHECK(da.filename() == db.filename());
  for (const char* f : {"path-0.csv", "path-1.csv", "report.json"}) {
    REQUIRE(fs::exists(da / f));
    CHECK(slurp(da / f) == slurp(db / f));
  }
  const auto manifest = nlohmann::json::parse(slurp(da / "MANIFEST"));
  CHECK(manifest["command"] == "simulate");
  CHECK(manifest["seed"] == 9);
  CHECK(manifest["artifacts"].size() == 3);
  CHECK(manifest.contains("git_describe"));

  const auto rerun = run({"rerun", (da / "MANIFEST").string()});
  CHECK(rerun.code == 0);
  CHECK(rerun.out.find("identical") != std::string::npos);
}

TEST_CASE("a tampered manifest is reported as differing") {
  const auto dir = fresh_dir("tamper");
  const auto r = run({"simulate", "--n", "16", "--output", dir.string()});
  REQUIRE(r.code == 0);
  const fs::path manifest_path = printed_dir(r) / "MANIFEST";
  auto m = nlohmann::json::parse(slurp(manifest_path));
  m["artifacts"][1]["fnv1a"] = "0000000000000000";
  std::ofstream(manifest_path) << m.dump(2);
  const auto again = run({"rerun", manifest_path.string()});
  CHECK(again.code == tcilab::cli::kExitMismatch);
  CHECK(again.out.find("path-0.csv") != std::string::npos);
}

TEST_CASE("different seeds give different directories and paths") {
  const auto dir = fresh_dir("seeds");
  const auto r1 = run({"simulate", "--n", "16", "--seed", "1", "--output", dir.string()});
  const auto r2 = run({"simulate", "--n", "16", "--seed", "2", "--output", dir.string()});
  REQUIRE(r1.code == 0);
  REQUIRE(r2.code == 0);
  CHECK(printed_dir(r1) != printed_dir(r2));
  CHECK(slurp(printed_dir(r1) / "path-0.csv") != slurp(printed_dir(r2) / "path-0.csv"));
}

TEST_CASE("config errors exit 2 and leave no artifacts") {
  const auto dir = fresh_dir("bad");
  const fs::path cfg = fs::temp_directory_path() / "tcilab-cli-bad.yaml";
  std::ofstream(cfg) << "command: simulate\ngrid: {steps: 16, stpes: 3}\n";
  const auto r = run({"simulate", "--config", cfg.string(), "--output", dir.string()});
  CHECK(r.code == tcilab::cli::kExitConfig);
  CHECK(r.err.find("grid.stpes") != std::string::npos);
  CHECK(r.err.find("line 2") != std::string::npos);
  CHECK((!fs::exists(dir) || fs::is_empty(dir)));

  CHECK(run({"simulate", "--set", "grid.steps=abc", "--output", dir.string()}).code == 2);
  CHECK(run({"simulate", "--set", "driver.kind=levy", "--output", dir.string()}).code == 2);
  CHECK(run({"simulate", "--set", "driver.hurst=1.5", "--output", dir.string()}).code == 2);
  CHECK(run({"tci", "--preset", "no-such-preset", "--output", dir.string()}).code == 2);
  CHECK(run({"tci", "--preset", "pam-solve", "--output", dir.string()}).code == 2);
  CHECK(run({"simulate", "--preset", "sampler-rlfbm-h03", "--config", cfg.string()}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"tci", "--set", "tci.cost_exponent=0.7", "--output", dir.string()}).code == 2);
  CHECK((!fs::exists(dir) || fs::is_empty(dir)));

  std::ofstream(cfg) << "command: lift\n";
  CHECK(run({"simulate", "--config", cfg.string(), "--output", dir.string()}).code == 2);
  std::ofstream(cfg) << "grid: [1, 2\n";
  CHECK(run({"simulate", "--config", cfg.string(), "--output", dir.string()}).code == 2);
}

TEST_CASE("presets list covers every command used by the suite") {
  const auto r = run({"presets"});
  REQUIRE(r.code == 0);
  for (const char* name : {"chen-geometric", "rde-fbm-h04", "tails-rde-fbm-h04", "deviations-rde-fbm-h04",
                           "logprice-h03", "pam-cauchy", "wlsi-polynomial"})
    CHECK(r.out.find(name) != std::string::npos);
}

TEST_CASE("reduced tci preset reports per-point verdicts") {
  const auto dir = fresh_dir("tci");
  const auto r = run({"tci", "--preset", "tci-identity-bm", "--set", "tci.samples=64", "--set", "tci.ot_samples=32",
                      "--set", "ray.count=3", "--output", dir.string()});
  REQUIRE(r.code == 0);
  const auto report = nlohmann::json::parse(slurp(printed_dir(r) / "report.json"));
  CHECK(report["command"] == "tci");
  CHECK(report.contains("pass"));
}

TEST_CASE("lift preset checks Chen on a small run") {
  const auto dir = fresh_dir("lift");
  const auto r = run({"lift", "--preset", "chen-geometric", "--set", "lift.paths=4", "--output", dir.string()});
  REQUIRE(r.code == 0);
  const auto report = nlohmann::json::parse(slurp(printed_dir(r) / "report.json"));
  CHECK(report["pass"] == true);
  CHECK(fs::exists(printed_dir(r) / "lift-0.tcip"));
}
