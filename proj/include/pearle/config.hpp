#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace pearle {

/// Malformed configuration text. line is 1-based; 0 when the problem does not
/// come from a file line (command-line overrides).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(int line, std::string key, const std::string& message);
  int line() const noexcept { return line_; }
  const std::string& key() const noexcept { return key_; }

 private:
  int line_;
  std::string key_;
};

struct ConfigValue {
  std::string value;
  int line = 0;
};

/// Flat `key = value` configuration with optional `[section]` headers.
/// Keys before the first header belong to the unnamed section "". `#` and `;`
/// start comments; blank lines are ignored. Duplicate keys in one section are
/// an error.
class Config {
 public:
  using Section = std::map<std::string, ConfigValue>;

  static Config parse(std::istream& in);
  static Config parse(const std::string& text);
  /// Throws std::runtime_error when the file cannot be read.
  static Config load(const std::filesystem::path& path);

  const std::map<std::string, Section>& sections() const noexcept { return sections_; }
  const Section* section(const std::string& name) const;
  int section_line(const std::string& name) const;

 private:
  std::map<std::string, Section> sections_;
  std::map<std::string, int> section_lines_;
};

/// One problem found while checking a configuration. invariant names the
/// violated type invariant or rule, e.g. "DiffusionSpec.intensity".
struct Diagnostic {
  int line = 0;
  std::string section;
  std::string key;
  std::string invariant;
  std::string message;
};

std::string to_string(const Diagnostic& d);

}  // namespace pearle
