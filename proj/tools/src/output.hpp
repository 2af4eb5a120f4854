#pragma once

// Artifact serialization: JSON with every double at 17 significant digits,
// CSV with ',' separators and LF endings, SHA-256 digests.

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"

namespace qpww::cli {

using Json = nlohmann::ordered_json;

/// Two-space indented; non-finite doubles become null.
std::string dump_json(const Json& j);

std::string sha256_hex(std::string_view data);

/// Finite values as numbers, infinities and NaN as null.
Json number(double v);
Json array(std::span<const double> v);
Json array(std::span<const int> v);
Json array(std::span<const long> v);
Json complex_pair(std::complex<double> z);

class Csv {
 public:
  using Cell = std::variant<double, long long, std::string>;
  explicit Csv(std::vector<std::string> header);
  void row(const std::vector<Cell>& cells);
  std::string str() const { return text_; }

 private:
  std::size_t width_;
  std::string text_;
};

/// Named files produced by one experiment, written only after it succeeds.
struct Artifacts {
  std::vector<std::pair<std::string, std::string>> files;
  void json(const std::string& name, const Json& j) { files.emplace_back(name, dump_json(j)); }
  void csv(const std::string& name, const Csv& c) { files.emplace_back(name, c.str()); }
};

}  // namespace qpww::cli
