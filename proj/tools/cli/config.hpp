#pragma once

#include <cstdint>
#include <list>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "tcilab/core.hpp"
#include "tcilab/gauss_sim.hpp"
#include "tcilab/tci_verify.hpp"

namespace tcilab::cli {

// Read-tracking view of one YAML mapping. Every key read through get/child is
// marked; finish() raises ConfigError with line:column for the first key that
// was never read, recursively over child blocks.
class Block {
 public:
  Block(YAML::Node node, std::string path);

  bool has(const std::string& key) const;
  template <class T>
  T get(const std::string& key, const T& fallback);
  template <class T>
  T require(const std::string& key);
  // Missing keys give an empty block; non-mapping values are errors.
  Block& child(const std::string& key);

  void finish() const;
  const std::string& path() const { return path_; }
  [[noreturn]] void fail(const std::string& key, const std::string& message) const;

 private:
  template <class T>
  T convert(const std::string& key, const YAML::Node& value) const;

  YAML::Node node_;
  std::string path_;
  std::set<std::string> used_;
  std::list<Block> children_;
};

template <class T>
T Block::convert(const std::string& key, const YAML::Node& value) const {
  try {
    return value.as<T>();
  } catch (const YAML::Exception&) {
    fail(key, "has the wrong type");
  }
}

template <class T>
T Block::get(const std::string& key, const T& fallback) {
  used_.insert(key);
  if (!node_ || !node_[key]) return fallback;
  return convert<T>(key, node_[key]);
}

template <class T>
T Block::require(const std::string& key) {
  used_.insert(key);
  if (!node_ || !node_[key]) fail(key, "is required");
  return convert<T>(key, node_[key]);
}

// Parses YAML text; syntax errors become ConfigError with line:column.
YAML::Node parse_yaml(const std::string& text, const std::string& origin);
// Sets a dotted key ("tci.samples") to a YAML scalar or flow value.
void apply_override(YAML::Node& root, const std::string& assignment);

DriverSpec parse_driver(Block& b, std::size_t default_dim = 1);
GridPtr parse_grid(Block& b, double horizon = 1.0, std::size_t steps = 64);
FunctionalConfig parse_functional(Block& b);
TailFitOptions parse_tail_options(Block& b, TailFitOptions defaults = {});

std::string canonical_yaml(const YAML::Node& root);
std::uint64_t fnv1a(const std::string& bytes);
std::string hex64(std::uint64_t v);

}  // namespace tcilab::cli
