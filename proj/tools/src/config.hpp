#pragma once

// Declarative experiment configuration (YAML subset: maps, sequences, scalars).
// Every key read is recorded; finish() rejects anything left unread.

#include <yaml-cpp/yaml.h>

#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <typeinfo>
#include <vector>

namespace qpww::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Config {
 public:
  static Config load_file(const std::string& path);
  static Config parse(const std::string& text);

  /// True when the key is present (does not mark it as read).
  bool has(const std::string& key) const;

  template <class T>
  T get(const std::string& key, T fallback) {
    auto v = optional<T>(key);
    return v ? std::move(*v) : std::move(fallback);
  }

  template <class T>
  T require(const std::string& key) {
    auto v = optional<T>(key);
    if (!v) throw ConfigError(path_of(key) + ": required key missing");
    return std::move(*v);
  }

  template <class T>
  std::optional<T> optional(const std::string& key) {
    mark(key);
    const YAML::Node n = node_[key];
    if (!n || n.IsNull()) return std::nullopt;
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(path_of(key) + ": expected " + type_name<T>());
    }
  }

  /// Nested table; an absent key gives an empty table.
  Config table(const std::string& key);

  /// Throws on keys never read, anywhere below the root.
  void finish() const;

  const std::string& prefix() const { return prefix_; }
  std::string path_of(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

 private:
  Config(YAML::Node node, std::string prefix, std::shared_ptr<std::set<std::string>> used)
      : node_(std::move(node)), prefix_(std::move(prefix)), used_(std::move(used)) {}
  void mark(const std::string& key) { used_->insert(path_of(key)); }

  template <class T>
  static std::string type_name() {
    if constexpr (std::is_same_v<T, bool>) return "a boolean";
    else if constexpr (std::is_integral_v<T>) return "an integer";
    else if constexpr (std::is_floating_point_v<T>) return "a number";
    else if constexpr (std::is_same_v<T, std::string>) return "a string";
    else return "a list";
  }

  YAML::Node node_;
  std::string prefix_;
  std::shared_ptr<std::set<std::string>> used_;
};

}  // namespace qpww::cli
