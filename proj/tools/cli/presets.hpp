#pragma once

#include <string>
#include <vector>

namespace tcilab::cli {

struct Preset {
  std::string name;
  std::string command;
  std::string summary;
  std::string yaml;
};

const std::vector<Preset>& presets();
// Throws ConfigError for unknown names.
const Preset& find_preset(const std::string& name);

}  // namespace tcilab::cli
