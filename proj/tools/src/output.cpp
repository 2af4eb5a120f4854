#include "output.hpp"

#include <fmt/format.h>
#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qpww::cli {

namespace {

void put_string(std::string& out, const std::string& s) { out += Json(s).dump(); }

void put(std::string& out, const Json& j, int depth) {
  const std::string pad(static_cast<std::size_t>(2 * (depth + 1)), ' ');
  const std::string close(static_cast<std::size_t>(2 * depth), ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad;
        put_string(out, it.key());
        out += ": ";
        put(out, it.value(), depth + 1);
      }
      out += "\n" + close + "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      // Arrays of scalars stay on one line.
      const bool flat = std::none_of(j.begin(), j.end(), [](const Json& e) { return e.is_structured(); });
      out += flat ? "[" : "[\n";
      bool first = true;
      for (const auto& e : j) {
        if (!first) out += flat ? ", " : ",\n";
        first = false;
        if (!flat) out += pad;
        put(out, e, depth + 1);
      }
      out += flat ? "]" : "\n" + close + "]";
      return;
    }
    case Json::value_t::number_float: {
      const double v = j.get<double>();
      out += std::isfinite(v) ? fmt::format("{:.17g}", v) : "null";
      return;
    }
    default:
      out += j.dump();
  }
}

}  // namespace

std::string dump_json(const Json& j) {
  std::string out;
  put(out, j, 0);
  out += '\n';
  return out;
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json array(std::span<const double> v) {
  Json a = Json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

Json array(std::span<const int> v) { return Json(std::vector<int>(v.begin(), v.end())); }
Json array(std::span<const long> v) { return Json(std::vector<long>(v.begin(), v.end())); }

Json complex_pair(std::complex<double> z) { return Json::array({number(z.real()), number(z.imag())}); }

Csv::Csv(std::vector<std::string> header) : width_(header.size()) {
  for (std::size_t i = 0; i < header.size(); ++i) text_ += (i ? "," : "") + header[i];
  text_ += '\n';
}

void Csv::row(const std::vector<Cell>& cells) {
  if (cells.size() != width_) throw std::logic_error("Csv: row width differs from header");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) text_ += ',';
    if (const auto* d = std::get_if<double>(&cells[i]))
      text_ += fmt::format("{:.17g}", *d);
    else if (const auto* n = std::get_if<long long>(&cells[i]))
      text_ += fmt::format("{}", *n);
    else
      text_ += std::get<std::string>(cells[i]);
  }
  text_ += '\n';
}

}  // namespace qpww::cli
