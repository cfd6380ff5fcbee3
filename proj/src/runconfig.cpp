#include "osanet/runconfig.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace osanet::config {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool valid_key_part(std::string_view s) {
  if (s.empty()) return false;
  for (char ch : s) {
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '_' && ch != '-') return false;
  }
  return true;
}

}  // namespace

RunConfig RunConfig::parse(std::string_view text) {
  RunConfig cfg;
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;

    line = trim(line);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;

    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("line " + std::to_string(line_no) + ": unterminated section header");
      }
      std::string_view name = trim(line.substr(1, line.size() - 2));
      if (!valid_key_part(name)) {
        throw ConfigError("line " + std::to_string(line_no) + ": bad section name '" +
                          std::string(name) + "'");
      }
      section = std::string(name);
      continue;
    }

    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    std::string_view key = trim(line.substr(0, eq));
    std::string_view value = trim(line.substr(eq + 1));
    if (!valid_key_part(key)) {
      throw ConfigError("line " + std::to_string(line_no) + ": bad key '" + std::string(key) + "'");
    }
    std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
    if (cfg.values_.count(full)) {
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + full + "'");
    }
    cfg.values_.emplace(std::move(full), std::string(value));
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open config '" + path.string() + "'");
  std::ostringstream buf;
  buf << f.rdbuf();
  try {
    return parse(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::optional<std::string> RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string RunConfig::get_string(const std::string& key, std::string fallback) const {
  auto v = get(key);
  return v ? *v : std::move(fallback);
}

std::int64_t RunConfig::get_int(const std::string& key, std::int64_t fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  std::int64_t out = 0;
  const char* begin = v->data();
  const char* end = begin + v->size();
  auto [p, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc() || p != end) {
    throw ConfigError("key '" + key + "': '" + *v + "' is not an integer");
  }
  return out;
}

std::uint64_t RunConfig::get_uint(const std::string& key, std::uint64_t fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  std::uint64_t out = 0;
  const char* begin = v->data();
  const char* end = begin + v->size();
  auto [p, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc() || p != end) {
    throw ConfigError("key '" + key + "': '" + *v + "' is not a non-negative integer");
  }
  return out;
}

double RunConfig::get_double(const std::string& key, double fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  char* end = nullptr;
  const double out = std::strtod(v->c_str(), &end);
  if (end != v->c_str() + v->size() || v->empty()) {
    throw ConfigError("key '" + key + "': '" + *v + "' is not a number");
  }
  return out;
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw ConfigError("key '" + key + "': '" + *v + "' is not a boolean");
}

void RunConfig::set(const std::string& key, std::string value) {
  values_[key] = std::move(value);
}

void RunConfig::set_int(const std::string& key, std::int64_t value) {
  set(key, std::to_string(value));
}

void RunConfig::set_uint(const std::string& key, std::uint64_t value) {
  set(key, std::to_string(value));
}

void RunConfig::set_double(const std::string& key, double value) {
  // Shortest decimal form that parses back to the same double.
  char buf[64];
  for (int prec = 6; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, value);
    if (std::strtod(buf, nullptr) == value) break;
  }
  set(key, buf);
}

void RunConfig::set_bool(const std::string& key, bool value) {
  set(key, value ? "true" : "false");
}

std::string RunConfig::serialize() const {
  // Bare keys first, then each section in key order (std::map keeps both
  // passes sorted), so the byte stream only depends on the contents.
  std::ostringstream out;
  bool wrote_any = false;
  for (const auto& [key, value] : values_) {
    if (key.find('.') != std::string::npos) continue;
    out << key << " = " << value << "\n";
    wrote_any = true;
  }
  std::string current_section;
  for (const auto& [key, value] : values_) {
    const std::size_t dot = key.find('.');
    if (dot == std::string::npos) continue;
    const std::string section = key.substr(0, dot);
    if (section != current_section) {
      if (wrote_any) out << "\n";
      out << "[" << section << "]\n";
      current_section = section;
    }
    out << key.substr(dot + 1) << " = " << value << "\n";
    wrote_any = true;
  }
  return out.str();
}

void RunConfig::save(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open '" + path.string() + "' for writing");
  f << serialize();
  if (!f) throw ConfigError("write failed for '" + path.string() + "'");
}

}  // namespace osanet::config
