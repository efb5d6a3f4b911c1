#include "app.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "presets.hpp"
#include "tcilab/core.hpp"

#ifndef TCILAB_GIT_DESCRIBE
#define TCILAB_GIT_DESCRIBE "unknown"
#endif

namespace tcilab::cli {

namespace fs = std::filesystem;

namespace {

struct Request {
  std::string command;
  std::string config_path;
  std::string preset;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::string output;
  std::vector<std::string> overrides;
};

struct Prepared {
  std::string command;
  std::uint64_t seed = 1;
  std::string canonical;
  std::string hash;
  Job job;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Prepared prepare(const Request& req, const std::string& text, const std::string& origin) {
  YAML::Node root = parse_yaml(text, origin);
  if (root["command"]) {
    std::string stated;
    try {
      stated = root["command"].as<std::string>();
    } catch (const YAML::Exception&) {
      throw ConfigError(origin + ": 'command' must be a string");
    }
    if (stated != req.command)
      throw ConfigError(origin + ": config is for '" + stated + "' but the subcommand is '" + req.command + "'");
  }
  root["command"] = req.command;
  for (const auto& o : req.overrides) apply_override(root, o);
  if (req.seed) root["seed"] = *req.seed;
  Block top(root, "");
  Prepared p;
  p.command = top.require<std::string>("command");
  p.seed = top.get<std::uint64_t>("seed", 1);
  root["seed"] = p.seed;
  p.job = plan_command(p.command, top, p.seed);
  top.finish();
  p.canonical = canonical_yaml(root);
  p.hash = hex64(fnv1a(p.canonical));
  return p;
}

int default_threads() { return std::max(1, omp_get_num_procs() - 1); }

std::string utc_now() {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

std::string report_bytes(const Prepared& p, RunResult& r) {
  Json doc;
  doc["command"] = p.command;
  doc["seed"] = p.seed;
  doc["config_hash"] = p.hash;
  for (auto& [k, v] : r.report.items()) doc[k] = v;
  return doc.dump(2) + "\n";
}

Json artifact_list(const std::vector<Artifact>& files) {
  Json list = Json::array();
  for (const auto& f : files) list.push_back({{"name", f.name}, {"bytes", f.bytes.size()}, {"fnv1a", hex64(fnv1a(f.bytes))}});
  return list;
}

struct Executed {
  std::vector<Artifact> files;
  double seconds = 0.0;
};

Executed execute(const Prepared& p, int threads) {
  omp_set_num_threads(threads);
  const auto start = std::chrono::steady_clock::now();
  RunResult r = p.job();
  Executed e;
  e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  e.files.push_back({"report.json", report_bytes(p, r)});
  for (auto& f : r.files) e.files.push_back(std::move(f));
  return e;
}

// Writes into a hidden staging directory and renames it into place, so a
// failed run leaves nothing behind.
fs::path publish(const fs::path& out_dir, const std::string& name, const std::vector<Artifact>& files,
                 const Json& manifest) {
  fs::create_directories(out_dir);
  const fs::path staging = out_dir / ("." + name + ".partial");
  const fs::path target = out_dir / name;
  fs::remove_all(staging);
  try {
    fs::create_directories(staging);
    for (const auto& f : files) {
      std::ofstream o(staging / f.name, std::ios::binary);
      o.write(f.bytes.data(), static_cast<std::streamsize>(f.bytes.size()));
      if (!o) throw std::runtime_error("cannot write " + (staging / f.name).string());
    }
    std::ofstream m(staging / "MANIFEST", std::ios::binary);
    m << manifest.dump(2) << "\n";
    if (!m) throw std::runtime_error("cannot write MANIFEST");
    m.close();
    fs::remove_all(target);
    fs::rename(staging, target);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(staging, ec);
    throw;
  }
  return target;
}

fs::path output_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("TCILAB_OUTPUT"); env && *env) return env;
  return "tcilab-out";
}

int run_command(const Request& req, std::ostream& out) {
  if (!req.preset.empty() && !req.config_path.empty()) throw ConfigError("--preset and --config are exclusive");
  std::string text = "{}", origin = "command line";
  if (!req.preset.empty()) {
    const auto& p = find_preset(req.preset);
    if (p.command != req.command)
      throw ConfigError("preset '" + p.name + "' belongs to '" + p.command + "', not '" + req.command + "'");
    text = p.yaml;
    origin = "preset " + p.name;
  } else if (!req.config_path.empty()) {
    text = read_file(req.config_path);
    origin = req.config_path;
  }
  const Prepared p = prepare(req, text, origin);
  const int threads = req.threads > 0 ? req.threads : default_threads();
  const std::string started = utc_now();
  const Executed e = execute(p, threads);
  const std::string name = p.command + "-" + std::to_string(p.seed) + "-" + p.hash;
  Json manifest = {{"name", name},
                   {"command", p.command},
                   {"seed", p.seed},
                   {"threads", threads},
                   {"preset", req.preset},
                   {"config_file", req.config_path},
                   {"overrides", req.overrides},
                   {"config", p.canonical},
                   {"config_hash", p.hash},
                   {"git_describe", TCILAB_GIT_DESCRIBE},
                   {"started_utc", started},
                   {"wall_clock_seconds", e.seconds},
                   {"artifacts", artifact_list(e.files)}};
  const fs::path dir = publish(output_dir(req.output), name, e.files, manifest);
  out << dir.string() << "\n";
  return kExitOk;
}

int run_rerun(const std::string& manifest_path, int threads_flag, const std::string& output, std::ostream& out) {
  Json m;
  try {
    m = Json::parse(read_file(manifest_path));
  } catch (const Json::exception& e) {
    throw ConfigError("manifest '" + manifest_path + "': " + e.what());
  }
  if (!m.contains("command") || !m.contains("config") || !m.contains("artifacts"))
    throw ConfigError("manifest '" + manifest_path + "' lacks command, config or artifacts");
  Request req;
  req.command = m["command"].get<std::string>();
  const Prepared p = prepare(req, m["config"].get<std::string>(), manifest_path);
  const int threads = threads_flag > 0 ? threads_flag : m.value("threads", default_threads());
  const Executed e = execute(p, threads);
  const Json now = artifact_list(e.files);
  std::vector<std::string> differing;
  for (const auto& old : m["artifacts"]) {
    const auto it = std::find_if(now.begin(), now.end(), [&](const Json& a) { return a["name"] == old["name"]; });
    if (it == now.end() || (*it)["fnv1a"] != old["fnv1a"]) differing.push_back(old["name"].get<std::string>());
  }
  if (now.size() != m["artifacts"].size()) differing.push_back("(artifact count)");
  if (!output.empty()) {
    Json manifest = m;
    manifest["threads"] = threads;
    manifest["wall_clock_seconds"] = e.seconds;
    manifest["started_utc"] = utc_now();
    manifest["artifacts"] = now;
    out << publish(output, m.value("name", p.command), e.files, manifest).string() << "\n";
  }
  if (differing.empty()) {
    out << "identical: " << now.size() << " artifacts\n";
    return kExitOk;
  }
  out << "differs:";
  for (const auto& d : differing) out << " " << d;
  out << "\n";
  return kExitMismatch;
}

void add_common(CLI::App* sub, Request& req) {
  sub->add_option("--config", req.config_path, "YAML experiment config");
  sub->add_option("--preset", req.preset, "named preset (see 'tcilab presets')");
  sub->add_option("--seed", req.seed, "master seed (overrides the config)");
  sub->add_option("--threads", req.threads, "OpenMP threads (default: cores - 1)")->check(CLI::NonNegativeNumber);
  sub->add_option("--output", req.output, "output directory (default: $TCILAB_OUTPUT or ./tcilab-out)");
  sub->add_option("--set", req.overrides, "override a config key, e.g. --set tci.samples=512");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"tcilab: concentration experiments for Gaussian rough functionals"};
  app.require_subcommand(1);
  Request req;
  std::string driver, manifest;
  std::optional<std::size_t> steps, paths;
  for (const auto& name : command_names()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
    add_common(sub, req);
    if (name == "simulate") {
      sub->add_option("--driver", driver, "driver kind (bm, fbm, rlfbm, ou, bridge)");
      sub->add_option("--n", steps, "grid steps");
      sub->add_option("--paths", paths, "number of paths written");
    }
  }
  auto* rerun = app.add_subcommand("rerun", "re-run an experiment from its MANIFEST and compare artifacts");
  rerun->add_option("manifest", manifest, "path to MANIFEST")->required();
  rerun->add_option("--threads", req.threads, "OpenMP threads (default: as recorded)");
  rerun->add_option("--output", req.output, "also write the re-run artifacts here");
  app.add_subcommand("presets", "list presets");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, r;
    const int code = app.exit(e, o, r);
    out << o.str();
    err << r.str();
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (app.got_subcommand("presets")) {
      for (const auto& p : presets()) out << p.name << "  [" << p.command << "]  " << p.summary << "\n";
      return kExitOk;
    }
    if (app.got_subcommand("rerun")) return run_rerun(manifest, req.threads, req.output, out);
    req.command = app.get_subcommands().front()->get_name();
    if (!driver.empty()) req.overrides.insert(req.overrides.begin(), "driver.kind=" + driver);
    if (steps) req.overrides.insert(req.overrides.begin(), "grid.steps=" + std::to_string(*steps));
    if (paths) req.overrides.insert(req.overrides.begin(), "simulate.paths=" + std::to_string(*paths));
    return run_command(req, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const BlowupError& e) {
    err << "numerical error: " << e.what() << " (last valid time " << e.last_valid_time() << ")\n";
    return kExitNumeric;
  } catch (const ConvergenceError& e) {
    err << "numerical error: " << e.what() << " (residual " << e.residual() << ")\n";
    return kExitNumeric;
  } catch (const Error& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
}

}  // namespace tcilab::cli
