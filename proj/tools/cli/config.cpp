#include "config.hpp"

#include <cstdio>

namespace tcilab::cli {

namespace {

std::string where(const YAML::Node& node) {
  if (!node || node.Mark().is_null()) return "";
  return "line " + std::to_string(node.Mark().line + 1) + ", column " + std::to_string(node.Mark().column + 1) + ": ";
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

}  // namespace

Block::Block(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
  if (node_ && !node_.IsNull() && !node_.IsMap())
    throw ConfigError(where(node_) + "'" + (path_.empty() ? "config" : path_) + "' must be a mapping");
}

bool Block::has(const std::string& key) const { return node_ && node_.IsMap() && node_[key]; }

Block& Block::child(const std::string& key) {
  used_.insert(key);
  YAML::Node sub = has(key) ? node_[key] : YAML::Node();
  children_.emplace_back(sub, join(path_, key));
  return children_.back();
}

void Block::fail(const std::string& key, const std::string& message) const {
  const YAML::Node at = has(key) ? node_[key] : node_;
  throw ConfigError(where(at) + "key '" + join(path_, key) + "' " + message);
}

void Block::finish() const {
  if (node_ && node_.IsMap())
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!used_.count(key)) throw ConfigError(where(kv.first) + "unknown key '" + join(path_, key) + "'");
    }
  for (const auto& c : children_) c.finish();
}

YAML::Node parse_yaml(const std::string& text, const std::string& origin) {
  try {
    YAML::Node root = YAML::Load(text);
    if (root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
    if (!root.IsMap()) throw ConfigError(origin + ": top level must be a mapping");
    return root;
  } catch (const YAML::ParserException& e) {
    throw ConfigError(origin + ": line " + std::to_string(e.mark.line + 1) + ", column " +
                      std::to_string(e.mark.column + 1) + ": " + e.msg);
  }
}

void apply_override(YAML::Node& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' must be key=value");
  const std::string key = assignment.substr(0, eq);
  YAML::Node value;
  try {
    value = YAML::Load(assignment.substr(eq + 1));
  } catch (const YAML::Exception& e) {
    throw ConfigError("override '" + assignment + "': " + e.msg);
  }
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    parts.push_back(key.substr(start, dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  // yaml-cpp nodes are handles; walk with fresh handles so assignment does
  // not rebind the parent.
  std::vector<YAML::Node> chain{root};
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    YAML::Node next = chain.back()[parts[i]];
    if (!next.IsDefined() || next.IsNull()) {
      chain.back()[parts[i]] = YAML::Node(YAML::NodeType::Map);
      next = chain.back()[parts[i]];
    }
    if (!next.IsMap()) throw ConfigError("override '" + assignment + "': '" + parts[i] + "' is not a mapping");
    chain.push_back(next);
  }
  chain.back()[parts.back()] = value;
}

DriverSpec parse_driver(Block& b, std::size_t default_dim) {
  DriverSpec d;
  try {
    d.kind = driver_kind_from_string(b.get<std::string>("kind", "bm"));
  } catch (const ConfigError& e) {
    b.fail("kind", e.what());
  }
  d.dim = b.get<std::size_t>("dim", default_dim);
  d.hurst = b.get<double>("hurst", 0.5);
  d.ou_theta = b.get<double>("theta", 1.0);
  d.ou_sigma = b.get<double>("sigma", 1.0);
  d.embedding_constant = b.get<double>("embedding_constant", 1.0);
  try {
    d.validate();
  } catch (const Error& e) {
    throw ConfigError(b.path() + ": " + e.what());
  }
  return d;
}

GridPtr parse_grid(Block& b, double horizon, std::size_t steps) {
  horizon = b.get<double>("horizon", horizon);
  steps = b.get<std::size_t>("steps", steps);
  if (!(horizon > 0.0) || steps < 1) throw ConfigError(b.path() + ": need horizon > 0 and steps >= 1");
  return make_uniform_grid(horizon, steps);
}

FunctionalConfig parse_functional(Block& b) {
  FunctionalConfig f;
  try {
    f.kind = functional_kind_from_string(b.get<std::string>("kind", to_string(f.kind)));
  } catch (const Error& e) {
    b.fail("kind", e.what());
  }
  if (b.has("driver")) {
    f.driver = parse_driver(b.child("driver"));
  } else {
    b.child("driver");
  }
  f.horizon = b.get("horizon", f.horizon);
  f.steps = b.get("steps", f.steps);
  f.p = b.get("p", f.p);
  f.q = b.get("q", f.q);
  f.field_scale = b.get("field_scale", f.field_scale);
  f.hurst = b.get("hurst", f.hurst);
  f.kappa = b.get("kappa", f.kappa);
  f.anchors = b.get("anchors", f.anchors);
  f.scale_min = b.get("scale_min", f.scale_min);
  f.scale_max = b.get("scale_max", f.scale_max);
  f.volatility = b.get("volatility", f.volatility);
  f.holder = b.get("holder", f.holder);
  f.gamma = b.get("gamma", f.gamma);
  try {
    f.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(b.path() + ": " + e.what());
  }
  return f;
}

TailFitOptions parse_tail_options(Block& b, TailFitOptions o) {
  o.min_samples = b.get("min_samples", o.min_samples);
  o.min_exceedances = b.get("min_exceedances", o.min_exceedances);
  o.max_survival = b.get("max_survival", o.max_survival);
  o.levels = b.get("levels", o.levels);
  return o;
}

std::string canonical_yaml(const YAML::Node& root) {
  YAML::Emitter out;
  out.SetMapFormat(YAML::Block);
  out.SetSeqFormat(YAML::Flow);
  out.SetDoublePrecision(17);
  out << root;
  return std::string(out.c_str()) + "\n";
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace tcilab::cli
