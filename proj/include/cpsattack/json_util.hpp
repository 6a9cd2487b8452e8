#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "cpsattack/error.hpp"

namespace cpsattack {

using Json = nlohmann::json;

namespace detail {

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("cannot read " + path.string());
  return buf.str();
}

inline void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

inline Json parse_json_text(std::string_view text, std::string_view what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string(what) + ": " + e.what());
  }
}

inline Json read_json_file(const std::filesystem::path& path) {
  return parse_json_text(read_text_file(path), path.string());
}

// Reports keys of `obj` not in `allowed`.
inline void check_keys(const Json& obj, std::initializer_list<std::string_view> allowed,
                       const std::string& subject, ValidationReport& report) {
  if (!obj.is_object()) return;
  for (const auto& [key, _] : obj.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) report.add(subject, "unknown key \"" + key + "\"");
  }
}

// Typed field access that records a violation instead of throwing.
template <typename T>
bool read_field(const Json& obj, std::string_view key, T& out, const std::string& subject,
                ValidationReport& report, bool required = true) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (required) report.add(subject, "missing field \"" + std::string(key) + "\"");
    return false;
  }
  try {
    out = it->template get<T>();
    return true;
  } catch (const Json::exception&) {
    report.add(subject, "field \"" + std::string(key) + "\" has the wrong type");
    return false;
  }
}

}  // namespace detail
}  // namespace cpsattack
