#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pearle/config.hpp"

namespace pearle {

enum class ExitCode : int {
  ok = 0,
  unknown_scenario = 1,
  config_error = 2,
  invariant_violation = 3,
  io_error = 4,
};

using ParamMap = std::map<std::string, std::string>;

struct ParamSpec {
  std::string name;
  std::string default_value;
  std::string help;
  /// Does not affect any result file (only scheduling).
  bool inert = false;
};

const std::vector<std::string>& scenario_names();
bool is_scenario(std::string_view name);

/// Parameters accepted by a scenario, including the common keys seed and
/// threads. Throws std::invalid_argument for an unknown scenario.
const std::vector<ParamSpec>& scenario_parameters(std::string_view scenario);

struct ResolvedConfig {
  std::string scenario;
  ParamMap values;
  std::map<std::string, int> lines;  // source line of each value, 0 if not from a file
};

/// Merges defaults < unnamed file section < [scenario] file section <
/// overrides. Keys the scenario does not know are reported in diags.
ResolvedConfig resolve_config(std::string_view scenario, const Config* file, const ParamMap& overrides,
                              std::vector<Diagnostic>& diags);

/// Type checks every value and the domain invariants they must satisfy.
std::vector<Diagnostic> check_config(const ResolvedConfig& config);

/// Parses the file and checks every scenario section it contains (the unnamed
/// section alone is checked against the common keys). An empty list means the
/// file is valid. Throws std::runtime_error if the file cannot be read.
std::vector<Diagnostic> validate_config(const std::filesystem::path& path);
std::vector<Diagnostic> validate_config(const Config& config);

/// Text of a manifest: comment lines with the artifact version, RNG algorithm
/// and scenario, then a `[scenario]` section holding every resolved key. The
/// manifest is itself a valid configuration file.
std::string manifest_text(const ResolvedConfig& config);

struct RunRequest {
  std::string scenario;
  std::optional<std::filesystem::path> config_path;
  std::filesystem::path out_dir;
  std::optional<std::uint64_t> seed;
  ParamMap overrides;
};

struct RunOutcome {
  ExitCode code = ExitCode::ok;
  std::string message;
  std::vector<Diagnostic> diagnostics;
  std::vector<std::filesystem::path> files;
  std::vector<std::pair<std::string, std::string>> summary;
};

/// Executes one scenario and writes its CSV files, manifest.txt and
/// summary.txt into out_dir. Never throws for configuration or run failures;
/// those are reported through the exit code and message.
RunOutcome run_scenario(const RunRequest& request);

/// Environment variable naming the default output directory.
inline constexpr const char* kOutDirEnv = "PEARLELAB_OUT_DIR";

}  // namespace pearle
