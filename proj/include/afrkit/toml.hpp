#pragma once

// Small TOML subset reader, enough for the pipeline config profiles:
// [section] tables, key = value with strings, integers, floats, booleans and
// flat arrays of those. Keys are exposed as "section.key".

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "afrkit/common.hpp"

namespace afrkit {

struct TomlValue {
  enum class Kind { String, Number, Boolean, Array } kind = Kind::String;
  std::string str;
  double num = 0.0;
  bool boolean = false;
  std::vector<TomlValue> array;
};

class TomlFile {
 public:
  static TomlFile parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return parse(text, path);
  }

  static TomlFile parse(const std::string& text, const std::string& origin = "<string>") {
    TomlFile file;
    std::string section;
    std::size_t line_no = 0;
    for (const auto& raw_line : split(text, '\n')) {
      ++line_no;
      std::string line = strip_comment(raw_line);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw ConfigError(origin + ":" + std::to_string(line_no) + ": bad table header");
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (key.empty() || value.empty())
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key or value");
      const std::string full_key = section.empty() ? key : section + "." + key;
      file.values_[full_key] = parse_value(value, origin, line_no);
    }
    return file;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  double number(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second.kind != TomlValue::Kind::Number)
      throw ConfigError("config key " + key + " is not a number");
    return it->second.num;
  }

  std::string string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second.kind != TomlValue::Kind::String)
      throw ConfigError("config key " + key + " is not a string");
    return it->second.str;
  }

  bool boolean(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second.kind != TomlValue::Kind::Boolean)
      throw ConfigError("config key " + key + " is not a boolean");
    return it->second.boolean;
  }

  std::vector<double> number_array(const std::string& key,
                                   const std::vector<double>& fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second.kind != TomlValue::Kind::Array)
      throw ConfigError("config key " + key + " is not an array");
    std::vector<double> out;
    for (const auto& v : it->second.array) {
      if (v.kind != TomlValue::Kind::Number)
        throw ConfigError("config key " + key + " has non-numeric elements");
      out.push_back(v.num);
    }
    return out;
  }

  const std::map<std::string, TomlValue>& values() const { return values_; }

 private:
  static std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') in_string = !in_string;
      if (line[i] == '#' && !in_string) return line.substr(0, i);
    }
    return line;
  }

  static TomlValue parse_value(const std::string& value, const std::string& origin,
                               std::size_t line_no) {
    TomlValue v;
    if (value.front() == '"') {
      if (value.size() < 2 || value.back() != '"')
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": unterminated string");
      v.kind = TomlValue::Kind::String;
      v.str = value.substr(1, value.size() - 2);
      return v;
    }
    if (value == "true" || value == "false") {
      v.kind = TomlValue::Kind::Boolean;
      v.boolean = (value == "true");
      return v;
    }
    if (value.front() == '[') {
      if (value.back() != ']')
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": unterminated array");
      v.kind = TomlValue::Kind::Array;
      const std::string body = trim(value.substr(1, value.size() - 2));
      if (!body.empty())
        for (const auto& item : split(body, ','))
          v.array.push_back(parse_value(trim(item), origin, line_no));
      return v;
    }
    try {
      std::size_t pos = 0;
      v.num = std::stod(value, &pos);
      if (pos != value.size()) throw std::invalid_argument("junk");
      v.kind = TomlValue::Kind::Number;
      return v;
    } catch (const std::exception&) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": cannot parse value '" +
                        value + "'");
    }
  }

  std::map<std::string, TomlValue> values_;
};

}  // namespace afrkit
