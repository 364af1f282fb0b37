#include "pearle/config.hpp"

#include <fstream>
#include <sstream>

namespace pearle {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

bool valid_name(const std::string& s) {
  if (s.empty()) return false;
  for (const char c : s) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '_' || c == '-' || c == '.';
    if (!ok) return false;
  }
  return true;
}

}  // namespace

ConfigError::ConfigError(int line, std::string key, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + (key.empty() ? "" : ", key '" + key + "'") +
                         ": " + message),
      line_(line),
      key_(std::move(key)) {}

Config Config::parse(std::istream& in) {
  Config cfg;
  cfg.sections_[""];
  std::string current;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    if (const auto c = line.find_first_of("#;"); c != std::string::npos) line.erase(c);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(line_no, "", "unterminated section header");
      current = trim(std::string_view(line).substr(1, line.size() - 2));
      if (!valid_name(current)) throw ConfigError(line_no, current, "invalid section name");
      if (cfg.section_lines_.contains(current)) throw ConfigError(line_no, current, "duplicate section");
      cfg.sections_[current];
      cfg.section_lines_[current] = line_no;
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(line_no, "", "expected 'key = value'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (!valid_name(key)) throw ConfigError(line_no, key, "invalid key name");
    auto& section = cfg.sections_[current];
    if (section.contains(key)) throw ConfigError(line_no, key, "duplicate key");
    section[key] = ConfigValue{value, line_no};
  }
  if (in.bad()) throw std::runtime_error("error while reading configuration");
  return cfg;
}

Config Config::parse(const std::string& text) {
  std::istringstream in(text);
  return parse(in);
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read configuration file " + path.string());
  return parse(in);
}

const Config::Section* Config::section(const std::string& name) const {
  const auto it = sections_.find(name);
  return it == sections_.end() ? nullptr : &it->second;
}

int Config::section_line(const std::string& name) const {
  const auto it = section_lines_.find(name);
  return it == section_lines_.end() ? 0 : it->second;
}

std::string to_string(const Diagnostic& d) {
  std::string out;
  if (d.line > 0) out += "line " + std::to_string(d.line) + ": ";
  if (!d.section.empty()) out += "[" + d.section + "] ";
  if (!d.key.empty()) out += d.key + ": ";
  if (!d.invariant.empty()) out += d.invariant + ": ";
  out += d.message;
  return out;
}

}  // namespace pearle
