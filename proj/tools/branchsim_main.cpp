// Command-line front end: scenario configs in, CSV/JSON artifacts out.
//
// Exit codes: 0 success, 1 named criterion failed, 2 budget exceeded,
// 3 numeric failure, 4 usage or config error.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "branchsim/errors.hpp"
#include "branchsim/scenario.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw branchsim::ConfigError("cannot read config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "branchsim: simulation and statistical verification of branching "
      "random walks on the half-line and their small-scale limits"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool seed_set = false;
  unsigned threads = 0;
  std::uint64_t max_atoms = 0;

  const char* commands[] = {"simulate-brw",      "simulate-stable",
                            "simulate-uchiyama", "converge",
                            "metrics",           "oracle"};
  for (const char* name : commands) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "scenario config (JSON)")
        ->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option_function<std::uint64_t>(
           "--seed",
           [&seed, &seed_set](std::uint64_t v) {
             seed = v;
             seed_set = true;
           },
           "master seed (overrides the config)");
    sub->add_option("--threads", threads, "worker threads");
    sub->add_option("--max-atoms", max_atoms,
                    "population cap override (atoms or particles)");
  }

  CLI11_PARSE(app, argc, argv);

  try {
    branchsim::Scenario scenario;
    {
      const std::string text = read_file(config_path);
      // Parse leniently first so the CLI seed can satisfy the seed
      // requirement, then re-validate.
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(text);
      } catch (const nlohmann::json::parse_error& e) {
        throw branchsim::ConfigError(std::string("JSON parse error: ") +
                                     e.what());
      }
      if (!j.is_object()) throw branchsim::ConfigError("config must be a JSON object");
      const std::string sub = app.get_subcommands().front()->get_name();
      if (j.contains("command")) {
        if (!j["command"].is_string() || j["command"] != sub) {
          throw branchsim::ConfigError(
              "command", "config command does not match the subcommand " + sub);
        }
      } else {
        j["command"] = sub;
      }
      if (seed_set) j["seed"] = seed;
      if (threads > 0) j["threads"] = threads;
      if (max_atoms > 0) {
        if (j.contains("max_atoms") || sub == "simulate-brw" || sub == "converge") {
          j["max_atoms"] = max_atoms;
        }
        if (sub == "simulate-uchiyama" || sub == "simulate-stable") {
          j["max_particles"] = max_atoms;
        }
      }
      scenario = branchsim::parse_config(j.dump());
    }
    return branchsim::run_scenario(scenario, out_dir);
  } catch (const branchsim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 4;
  } catch (const branchsim::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
