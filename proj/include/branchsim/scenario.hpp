#ifndef BRANCHSIM_SCENARIO_HPP
#define BRANCHSIM_SCENARIO_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "branchsim/experiments.hpp"
#include "branchsim/offspring.hpp"
#include "branchsim/rational.hpp"
#include "branchsim/stable.hpp"

namespace branchsim {

/// Declarative description of a directional law (shape of birth clusters).
struct DirectionalConfig {
  std::string type = "point";  // "point" | "mixture"
  std::vector<double> atoms;   // for "point"
  std::vector<double> weights;               // for "mixture"
  std::vector<std::vector<double>> atom_sets;  // for "mixture"

  DirectionalLaw build() const;
};

/// Declarative description of an offspring law family.
struct LawConfig {
  std::string family = "two-atom";  // | "two-atom-slowly-varying" | "product-cluster"
  double alpha = 1.0;
  double slowly_varying_c = 0.0;
  std::optional<DirectionalConfig> directional;

  OffspringLaw build() const;
};

struct StableConfig {
  double alpha = 1.0;
  DirectionalConfig rho;

  StableSpec build() const;
};

struct BrwScenario {
  LawConfig law;
  std::uint64_t replicas = 1;
  // Raw mode: dump generations 0..steps.
  std::uint64_t steps = 0;
  // Magnified mode (n present): dump a_n^{-1} Z(floor(t n)) at each grid t;
  // with b also present, the trimmed chain instead.
  std::optional<std::uint64_t> n;
  std::vector<Rational> t_grid;
  std::optional<double> b;
  std::size_t max_atoms = 10'000'000;
  double position_cap = 0.0;  // 0: none
};

struct UchiyamaScenario {
  double rate = 1.0;
  DirectionalConfig offspring;  // cluster law; atoms need not start at 1 here
  double horizon = 1.0;
  std::uint64_t replicas = 1;
  std::size_t max_particles = 10'000'000;
  bool event_log = false;
};

struct StableScenario {
  StableConfig stable;
  double t = 1.0;
  std::vector<double> thresholds;
  std::uint64_t replicas = 1;
  std::size_t max_particles = 10'000'000;
};

struct ConvergeScenario {
  LawConfig law;
  std::optional<StableConfig> stable;  // defaults to the law's limit spec
  std::vector<std::uint64_t> n_grid;
  std::vector<Rational> t_grid;
  double b = 1.0;
  double r = 1.0;
  std::uint64_t replicas = 10'000;
  std::uint64_t identity_replicas = 0;
  double window = 0.0;
  std::size_t max_atoms = 10'000'000;
  double ks_cap = 10.0;
  double count_limit = 1.0;
  double trend_slack = 1.05;
  double final_p = 0.01;

  struct PathBlock {
    std::vector<std::uint64_t> n_values;
    std::vector<double> b_values;  // empty: b_n = ln n
    std::vector<Rational> t_grid;
    std::uint64_t replicas = 200;
    double window = 0.0;
  };
  std::optional<PathBlock> path_discrepancy;
};

struct MetricsScenario {
  std::vector<double> x_atoms;
  std::vector<double> y_atoms;
  std::vector<double> r_values{1.0};
};

struct OracleScenario {
  double alpha = 1.0;
  double b = 1.0;
  double theta = 1.0;
  double t = 1.0;
  std::uint64_t n = 100;
  std::optional<DirectionalConfig> rho;
};

struct Scenario {
  enum class Command {
    simulate_brw,
    simulate_stable,
    simulate_uchiyama,
    converge,
    metrics,
    oracle,
  };

  Command command = Command::oracle;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  std::variant<BrwScenario, StableScenario, UchiyamaScenario, ConvergeScenario,
               MetricsScenario, OracleScenario>
      payload;
};

const char* command_name(Scenario::Command c);

/// Strict parse: unknown keys are rejected by name, numeric ranges are
/// validated (alpha > 0, b > 0, replicas >= 100 for converge, ...); a seed is
/// mandatory for every sampling command.  Throws ConfigError.
Scenario parse_config(const std::string& text);

/// Canonical re-serialization; parse_config(scenario_to_json(s)) yields an
/// equivalent scenario (defaults filled in).
std::string scenario_to_json(const Scenario& s);

/// Runs the scenario, writing its artifacts under `out_dir`.
/// Exit codes: 0 success, 1 named criterion failed, 2 budget exceeded,
/// 3 numeric failure.
int run_scenario(const Scenario& s, const std::string& out_dir);

}  // namespace branchsim

#endif  // BRANCHSIM_SCENARIO_HPP
