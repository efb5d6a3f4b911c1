#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"

namespace tcilab::cli {

using Json = nlohmann::ordered_json;

struct Artifact {
  std::string name;
  std::string bytes;
};

struct RunResult {
  Json report;
  std::vector<Artifact> files;
};

using Job = std::function<RunResult()>;

const std::vector<std::string>& command_names();

// Reads and validates every block the command uses; the returned job does the
// numerical work. Unknown keys are detected by the caller via root.finish().
Job plan_command(const std::string& command, Block& root, std::uint64_t seed);

}  // namespace tcilab::cli
