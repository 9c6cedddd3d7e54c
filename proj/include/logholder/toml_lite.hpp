#pragma once

#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace logholder {

// Minimal TOML reader covering the configuration subset: comments,
// [table] and [a.b] headers, dotted keys, strings, booleans, numbers and
// flat arrays. Nested inline tables are not supported.

namespace toml_detail {

inline std::string strip(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline nlohmann::ordered_json parse_scalar(const std::string& raw) {
  std::string t = strip(raw);
  if (t.empty()) throw std::runtime_error("toml: empty value");
  if (t.front() == '"') {
    if (t.size() < 2 || t.back() != '"') throw std::runtime_error("toml: unterminated string");
    return t.substr(1, t.size() - 2);
  }
  if (t == "true") return true;
  if (t == "false") return false;
  try {
    std::size_t used = 0;
    if (t.find_first_of(".eE") == std::string::npos) {
      long long v = std::stoll(t, &used);
      if (used == t.size()) return v;
    }
    double d = std::stod(t, &used);
    if (used == t.size()) return d;
  } catch (const std::exception&) {
  }
  throw std::runtime_error("toml: cannot parse value: " + t);
}

inline nlohmann::ordered_json parse_value(const std::string& raw) {
  std::string t = strip(raw);
  if (!t.empty() && t.front() == '[') {
    if (t.back() != ']') throw std::runtime_error("toml: unterminated array");
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    std::string inner = t.substr(1, t.size() - 2);
    std::string item;
    int depth = 0;
    bool in_string = false;
    for (char c : inner) {
      if (c == '"') in_string = !in_string;
      if (!in_string && c == '[') ++depth;
      if (!in_string && c == ']') --depth;
      if (c == ',' && depth == 0 && !in_string) {
        if (!strip(item).empty()) arr.push_back(parse_value(item));
        item.clear();
      } else {
        item.push_back(c);
      }
    }
    if (!strip(item).empty()) arr.push_back(parse_value(item));
    return arr;
  }
  return parse_scalar(t);
}

inline nlohmann::ordered_json* descend(nlohmann::ordered_json& root, const std::string& dotted) {
  nlohmann::ordered_json* node = &root;
  std::stringstream ss(dotted);
  std::string part;
  while (std::getline(ss, part, '.')) {
    part = strip(part);
    if (part.empty()) throw std::runtime_error("toml: empty key segment in " + dotted);
    node = &(*node)[part];
  }
  return node;
}

}  // namespace toml_detail

inline nlohmann::ordered_json parse_toml(std::istream& in) {
  nlohmann::ordered_json root = nlohmann::ordered_json::object();
  nlohmann::ordered_json* section = &root;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = toml_detail::strip(line);
    // Strip trailing comments outside strings.
    bool in_string = false;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t[i] == '"') in_string = !in_string;
      if (t[i] == '#' && !in_string) {
        t = toml_detail::strip(t.substr(0, i));
        break;
      }
    }
    if (t.empty()) continue;
    try {
      if (t.front() == '[') {
        if (t.back() != ']') throw std::runtime_error("toml: malformed table header");
        section = toml_detail::descend(root, t.substr(1, t.size() - 2));
        if (!section->is_object() && !section->is_null()) {
          throw std::runtime_error("toml: table redefines a value");
        }
        if (section->is_null()) *section = nlohmann::ordered_json::object();
        continue;
      }
      std::size_t eq = std::string::npos;
      in_string = false;
      for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] == '"') in_string = !in_string;
        if (t[i] == '=' && !in_string) {
          eq = i;
          break;
        }
      }
      if (eq == std::string::npos) throw std::runtime_error("toml: expected key = value");
      std::string key = toml_detail::strip(t.substr(0, eq));
      nlohmann::ordered_json* slot = toml_detail::descend(*section, key);
      if (!slot->is_null()) throw std::runtime_error("toml: duplicate key " + key);
      *slot = toml_detail::parse_value(t.substr(eq + 1));
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string(e.what()) + " (line " + std::to_string(lineno) + ")");
    }
  }
  return root;
}

inline nlohmann::ordered_json parse_toml_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return parse_toml(in);
}

}  // namespace logholder
