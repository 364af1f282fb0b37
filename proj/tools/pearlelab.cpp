// Command-line front end: `pearlelab run <scenario> ...` and
// `pearlelab validate --config FILE`.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pearle/scenarios.hpp"

namespace {

// Turns ["--key", "value", "--other=v"] into a map. Returns false on a
// dangling key.
bool parse_overrides(const std::vector<std::string>& extras, pearle::ParamMap& out, std::string& error) {
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& tok = extras[i];
    if (tok.rfind("--", 0) != 0 || tok.size() <= 2) {
      error = "unexpected argument '" + tok + "'";
      return false;
    }
    const std::string body = tok.substr(2);
    if (const auto eq = body.find('='); eq != std::string::npos) {
      out[body.substr(0, eq)] = body.substr(eq + 1);
      continue;
    }
    if (i + 1 >= extras.size()) {
      error = "missing value for '" + tok + "'";
      return false;
    }
    out[body] = extras[++i];
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pearlelab: stochastic reduction laboratory"};
  app.require_subcommand(1);

  std::string scenario;
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;

  auto* run = app.add_subcommand("run", "run a scenario: blocks, proximity, pearle, fokker-planck, epr, crosscheck");
  run->add_option("scenario", scenario, "scenario name")->required();
  run->add_option("--config", config_path, "key = value configuration file");
  run->add_option("--out", out_dir, std::string("output directory (default: $") + pearle::kOutDirEnv +
                                        " or ./pearlelab-out/<scenario>)");
  auto* seed_opt = run->add_option("--seed", seed, "master seed");
  run->allow_extras();
  run->footer("Any scenario parameter may be overridden with --key value.");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "check a configuration file");
  validate->add_option("--config", validate_path, "configuration file")->required();

  std::string params_scenario;
  auto* params = app.add_subcommand("params", "list the parameters of a scenario with defaults");
  params->add_option("scenario", params_scenario)->required();

  CLI11_PARSE(app, argc, argv);

  if (*params) {
    if (!pearle::is_scenario(params_scenario)) {
      std::cerr << "unknown scenario '" << params_scenario << "'\n";
      return static_cast<int>(pearle::ExitCode::unknown_scenario);
    }
    for (const auto& p : pearle::scenario_parameters(params_scenario)) {
      std::cout << p.name << " = " << p.default_value << "    # " << p.help << (p.inert ? " (inert)" : "")
                << '\n';
    }
    return 0;
  }

  if (*validate) {
    try {
      const auto diags = pearle::validate_config(validate_path);
      for (const auto& d : diags) std::cout << validate_path << ": " << pearle::to_string(d) << '\n';
      if (diags.empty()) std::cout << validate_path << ": ok\n";
      return diags.empty() ? 0 : static_cast<int>(pearle::ExitCode::config_error);
    } catch (const std::exception& e) {
      std::cerr << e.what() << '\n';
      return static_cast<int>(pearle::ExitCode::io_error);
    }
  }

  pearle::RunRequest request;
  request.scenario = scenario;
  if (!config_path.empty()) request.config_path = config_path;
  if (*seed_opt) request.seed = seed;
  std::string error;
  if (!parse_overrides(run->remaining(), request.overrides, error)) {
    std::cerr << error << '\n';
    return static_cast<int>(pearle::ExitCode::config_error);
  }
  if (!out_dir.empty()) {
    request.out_dir = out_dir;
  } else if (const char* env = std::getenv(pearle::kOutDirEnv); env && *env) {
    request.out_dir = env;
  } else {
    request.out_dir = std::filesystem::path("pearlelab-out") / scenario;
  }

  const pearle::RunOutcome outcome = pearle::run_scenario(request);
  for (const auto& d : outcome.diagnostics) {
    std::cerr << (request.config_path ? request.config_path->string() + ": " : "") << pearle::to_string(d)
              << '\n';
  }
  if (outcome.code != pearle::ExitCode::ok) {
    std::cerr << "error: " << outcome.message << '\n';
    return static_cast<int>(outcome.code);
  }
  for (const auto& [k, v] : outcome.summary) std::cout << k << " = " << v << '\n';
  std::cout << "# wrote " << outcome.files.size() << " files to " << request.out_dir.string() << '\n';
  return 0;
}
