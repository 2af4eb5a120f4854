#include "config.hpp"

#include <fstream>
#include <sstream>

namespace qpww::cli {

namespace {

void check_unused(const YAML::Node& n, const std::string& prefix, const std::set<std::string>& used) {
  for (const auto& kv : n) {
    const std::string key = kv.first.as<std::string>();
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!used.count(path)) throw ConfigError(path + ": unknown key");
    if (kv.second.IsMap()) check_unused(kv.second, path, used);
  }
}

}  // namespace

Config Config::parse(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  if (root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  if (!root.IsMap()) throw ConfigError("malformed config: top level must be a table");
  return Config(root, "", std::make_shared<std::set<std::string>>());
}

Config Config::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return parse(s.str());
}

bool Config::has(const std::string& key) const {
  const YAML::Node n = node_[key];
  return n && !n.IsNull();
}

Config Config::table(const std::string& key) {
  mark(key);
  YAML::Node n = node_[key];
  if (!n || n.IsNull()) return Config(YAML::Node(YAML::NodeType::Map), path_of(key), used_);
  if (!n.IsMap()) throw ConfigError(path_of(key) + ": expected a table");
  return Config(n, path_of(key), used_);
}

void Config::finish() const {
  if (node_.IsMap()) check_unused(node_, prefix_, *used_);
}

}  // namespace qpww::cli
