#include "branchsim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "branchsim/brw.hpp"
#include "branchsim/errors.hpp"
#include "branchsim/uchiyama.hpp"

namespace branchsim {

namespace {

using nlohmann::json;

// Stream path tags for the CLI commands.
constexpr std::uint64_t kTagSimBrw = 10;
constexpr std::uint64_t kTagSimUchiyama = 11;
constexpr std::uint64_t kTagSimStable = 12;

class StrictObject {
 public:
  StrictObject(const json& j, std::string context)
      : j_(j), context_(std::move(context)) {
    if (!j_.is_object()) {
      throw ConfigError(context_.empty() ? "<root>" : context_,
                        "must be a JSON object");
    }
  }

  std::string path(const std::string& key) const {
    return context_.empty() ? key : context_ + "." + key;
  }

  const json* optional(const std::string& key) {
    used_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  const json& require(const std::string& key) {
    const json* v = optional(key);
    if (v == nullptr) throw ConfigError(path(key), "missing required key");
    return *v;
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (used_.find(it.key()) == used_.end()) {
        throw ConfigError(context_.empty() ? it.key() : context_ + "." + it.key(),
                          "unknown key (strict parsing)");
      }
    }
  }

 private:
  const json& j_;
  std::string context_;
  std::set<std::string> used_;
};

double as_double(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path, "must be a number");
  return v.get<double>();
}

double positive_double(const json& v, const std::string& path) {
  const double x = as_double(v, path);
  if (!(x > 0.0)) throw ConfigError(path, "must be > 0");
  return x;
}

double nonneg_double(const json& v, const std::string& path) {
  const double x = as_double(v, path);
  if (x < 0.0) throw ConfigError(path, "must be >= 0");
  return x;
}

std::uint64_t as_uint(const json& v, const std::string& path) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw ConfigError(path, "must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

std::vector<double> number_array(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path, "must be an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& e : v) {
    if (!e.is_number()) throw ConfigError(path, "must contain only numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

Rational rational_value(const json& v, const std::string& path) {
  try {
    if (v.is_number_integer() || v.is_number_unsigned()) {
      return Rational(v.get<std::int64_t>(), 1);
    }
    if (v.is_string()) return Rational::parse(v.get<std::string>());
  } catch (const std::exception& e) {
    throw ConfigError(path, e.what());
  }
  throw ConfigError(path,
                    "times must be integers or rational strings like \"1/2\" "
                    "(floats would make floor(t n) float-dependent)");
}

std::vector<Rational> rational_array(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) {
    throw ConfigError(path, "must be a nonempty array");
  }
  std::vector<Rational> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(rational_value(v[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

DirectionalConfig parse_directional(const json& j, const std::string& ctx) {
  StrictObject s(j, ctx);
  DirectionalConfig cfg;
  const json& type = s.require("type");
  if (!type.is_string()) throw ConfigError(s.path("type"), "must be a string");
  cfg.type = type.get<std::string>();
  if (cfg.type == "point") {
    cfg.atoms = number_array(s.require("atoms"), s.path("atoms"));
    if (cfg.atoms.empty()) throw ConfigError(s.path("atoms"), "must be nonempty");
  } else if (cfg.type == "mixture") {
    const json& comps = s.require("components");
    if (!comps.is_array() || comps.empty()) {
      throw ConfigError(s.path("components"), "must be a nonempty array");
    }
    for (std::size_t i = 0; i < comps.size(); ++i) {
      const std::string cctx = s.path("components") + "[" + std::to_string(i) + "]";
      StrictObject comp(comps[i], cctx);
      cfg.weights.push_back(positive_double(comp.require("weight"), cctx + ".weight"));
      cfg.atom_sets.push_back(number_array(comp.require("atoms"), cctx + ".atoms"));
      if (cfg.atom_sets.back().empty()) {
        throw ConfigError(cctx + ".atoms", "must be nonempty");
      }
      comp.finish();
    }
  } else {
    throw ConfigError(s.path("type"), "must be \"point\" or \"mixture\"");
  }
  s.finish();
  return cfg;
}

LawConfig parse_law(const json& j, const std::string& ctx) {
  StrictObject s(j, ctx);
  LawConfig cfg;
  const json& family = s.require("family");
  if (!family.is_string()) throw ConfigError(s.path("family"), "must be a string");
  cfg.family = family.get<std::string>();
  cfg.alpha = positive_double(s.require("alpha"), s.path("alpha"));
  if (cfg.family == "two-atom") {
    // no extra keys
  } else if (cfg.family == "two-atom-slowly-varying") {
    cfg.slowly_varying_c = nonneg_double(s.require("c"), s.path("c"));
  } else if (cfg.family == "product-cluster") {
    cfg.directional =
        parse_directional(s.require("directional"), s.path("directional"));
  } else {
    throw ConfigError(s.path("family"),
                      "must be \"two-atom\", \"two-atom-slowly-varying\" or "
                      "\"product-cluster\"");
  }
  s.finish();
  return cfg;
}

StableConfig parse_stable(const json& j, const std::string& ctx) {
  StrictObject s(j, ctx);
  StableConfig cfg;
  cfg.alpha = positive_double(s.require("alpha"), s.path("alpha"));
  cfg.rho = parse_directional(s.require("rho"), s.path("rho"));
  s.finish();
  return cfg;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << text;
}

json directional_to_json(const DirectionalConfig& d) {
  json j;
  j["type"] = d.type;
  if (d.type == "point") {
    j["atoms"] = d.atoms;
  } else {
    json comps = json::array();
    for (std::size_t i = 0; i < d.weights.size(); ++i) {
      comps.push_back({{"weight", d.weights[i]}, {"atoms", d.atom_sets[i]}});
    }
    j["components"] = comps;
  }
  return j;
}

json law_to_json(const LawConfig& l) {
  json j;
  j["family"] = l.family;
  j["alpha"] = l.alpha;
  if (l.family == "two-atom-slowly-varying") j["c"] = l.slowly_varying_c;
  if (l.directional) j["directional"] = directional_to_json(*l.directional);
  return j;
}

json stable_to_json(const StableConfig& s) {
  return json{{"alpha", s.alpha}, {"rho", directional_to_json(s.rho)}};
}

json rationals_to_json(const std::vector<Rational>& ts) {
  json a = json::array();
  for (const Rational& t : ts) a.push_back(t.str());
  return a;
}

}  // namespace

DirectionalLaw DirectionalConfig::build() const {
  if (type == "point") return point_directional(atoms);
  return mixture_directional(weights, atom_sets);
}

OffspringLaw LawConfig::build() const {
  if (family == "two-atom") return two_atom_power_law(alpha);
  if (family == "two-atom-slowly-varying") {
    return two_atom_slowly_varying(alpha, slowly_varying_c);
  }
  if (family == "product-cluster") {
    if (!directional) {
      throw ConfigError("law.directional", "required for product-cluster");
    }
    return product_cluster_law(alpha, directional->build());
  }
  throw ConfigError("law.family", "unknown family " + family);
}

StableSpec StableConfig::build() const { return StableSpec{alpha, rho.build()}; }

const char* command_name(Scenario::Command c) {
  switch (c) {
    case Scenario::Command::simulate_brw: return "simulate-brw";
    case Scenario::Command::simulate_stable: return "simulate-stable";
    case Scenario::Command::simulate_uchiyama: return "simulate-uchiyama";
    case Scenario::Command::converge: return "converge";
    case Scenario::Command::metrics: return "metrics";
    case Scenario::Command::oracle: return "oracle";
  }
  return "?";
}

Scenario parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("JSON parse error: ") + e.what());
  }
  StrictObject root(j, "");

  Scenario s;
  const json& cmd = root.require("command");
  if (!cmd.is_string()) throw ConfigError("command", "must be a string");
  const std::string name = cmd.get<std::string>();
  bool needs_seed = true;
  if (name == "simulate-brw") {
    s.command = Scenario::Command::simulate_brw;
  } else if (name == "simulate-stable") {
    s.command = Scenario::Command::simulate_stable;
  } else if (name == "simulate-uchiyama") {
    s.command = Scenario::Command::simulate_uchiyama;
  } else if (name == "converge") {
    s.command = Scenario::Command::converge;
  } else if (name == "metrics") {
    s.command = Scenario::Command::metrics;
    needs_seed = false;
  } else if (name == "oracle") {
    s.command = Scenario::Command::oracle;
    needs_seed = false;
  } else {
    throw ConfigError("command", "unknown command " + name);
  }

  if (const json* v = root.optional("seed")) s.seed = as_uint(*v, "seed");
  if (const json* v = root.optional("threads")) {
    const std::uint64_t t = as_uint(*v, "threads");
    if (t == 0) throw ConfigError("threads", "must be >= 1");
    s.threads = static_cast<unsigned>(t);
  }
  if (needs_seed && !s.seed) {
    throw ConfigError("seed", "mandatory for any sampling command");
  }

  switch (s.command) {
    case Scenario::Command::simulate_brw: {
      BrwScenario p;
      p.law = parse_law(root.require("law"), "law");
      if (const json* v = root.optional("replicas")) {
        p.replicas = as_uint(*v, "replicas");
        if (p.replicas == 0) throw ConfigError("replicas", "must be >= 1");
      }
      if (const json* v = root.optional("n")) {
        p.n = as_uint(*v, "n");
        if (*p.n == 0) throw ConfigError("n", "must be >= 1");
        p.t_grid = rational_array(root.require("t_grid"), "t_grid");
      } else {
        p.steps = as_uint(root.require("steps"), "steps");
        if (root.has("t_grid")) {
          throw ConfigError("t_grid", "only valid together with n");
        }
      }
      if (const json* v = root.optional("b")) {
        if (!p.n) throw ConfigError("b", "trimming requires n");
        p.b = positive_double(*v, "b");
      }
      if (const json* v = root.optional("max_atoms")) {
        p.max_atoms = as_uint(*v, "max_atoms");
      }
      if (const json* v = root.optional("position_cap")) {
        p.position_cap = positive_double(*v, "position_cap");
      }
      s.payload = std::move(p);
      break;
    }
    case Scenario::Command::simulate_uchiyama: {
      UchiyamaScenario p;
      p.rate = positive_double(root.require("rate"), "rate");
      p.offspring = parse_directional(root.require("offspring"), "offspring");
      p.horizon = nonneg_double(root.require("horizon"), "horizon");
      if (const json* v = root.optional("replicas")) {
        p.replicas = as_uint(*v, "replicas");
        if (p.replicas == 0) throw ConfigError("replicas", "must be >= 1");
      }
      if (const json* v = root.optional("max_particles")) {
        p.max_particles = as_uint(*v, "max_particles");
      }
      if (const json* v = root.optional("event_log")) {
        if (!v->is_boolean()) throw ConfigError("event_log", "must be a boolean");
        p.event_log = v->get<bool>();
      }
      s.payload = std::move(p);
      break;
    }
    case Scenario::Command::simulate_stable: {
      StableScenario p;
      p.stable = parse_stable(root.require("stable"), "stable");
      p.t = nonneg_double(root.require("t"), "t");
      p.thresholds = number_array(root.require("thresholds"), "thresholds");
      if (p.thresholds.empty()) {
        throw ConfigError("thresholds", "must be nonempty");
      }
      for (double b : p.thresholds) {
        if (!(b > 0.0)) throw ConfigError("thresholds", "must be positive");
      }
      if (!std::is_sorted(p.thresholds.begin(), p.thresholds.end())) {
        throw ConfigError("thresholds", "must be increasing");
      }
      if (const json* v = root.optional("replicas")) {
        p.replicas = as_uint(*v, "replicas");
        if (p.replicas == 0) throw ConfigError("replicas", "must be >= 1");
      }
      if (const json* v = root.optional("max_particles")) {
        p.max_particles = as_uint(*v, "max_particles");
      }
      s.payload = std::move(p);
      break;
    }
    case Scenario::Command::converge: {
      ConvergeScenario p;
      p.law = parse_law(root.require("law"), "law");
      if (const json* v = root.optional("stable")) {
        p.stable = parse_stable(*v, "stable");
      }
      const json& ngrid = root.require("n_grid");
      if (!ngrid.is_array() || ngrid.empty()) {
        throw ConfigError("n_grid", "must be a nonempty array");
      }
      for (std::size_t i = 0; i < ngrid.size(); ++i) {
        const std::uint64_t n =
            as_uint(ngrid[i], "n_grid[" + std::to_string(i) + "]");
        if (n == 0) throw ConfigError("n_grid", "entries must be >= 1");
        p.n_grid.push_back(n);
      }
      if (const json* v = root.optional("t_grid")) {
        p.t_grid = rational_array(*v, "t_grid");
      } else {
        p.t_grid = {Rational(1, 1)};
      }
      if (const json* v = root.optional("b")) p.b = positive_double(*v, "b");
      if (const json* v = root.optional("r")) p.r = positive_double(*v, "r");
      if (const json* v = root.optional("replicas")) {
        p.replicas = as_uint(*v, "replicas");
      }
      if (p.replicas < 100) throw ConfigError("replicas", "must be >= 100");
      if (const json* v = root.optional("identity_replicas")) {
        p.identity_replicas = as_uint(*v, "identity_replicas");
        if (p.identity_replicas == 1) {
          throw ConfigError("identity_replicas", "must be 0 (default) or >= 2");
        }
      }
      if (const json* v = root.optional("window")) {
        p.window = positive_double(*v, "window");
      }
      if (const json* v = root.optional("max_atoms")) {
        p.max_atoms = as_uint(*v, "max_atoms");
      }
      if (const json* v = root.optional("ks_cap")) {
        p.ks_cap = positive_double(*v, "ks_cap");
      }
      if (const json* v = root.optional("count_limit")) {
        p.count_limit = positive_double(*v, "count_limit");
      }
      if (const json* v = root.optional("trend_slack")) {
        p.trend_slack = as_double(*v, "trend_slack");
        if (p.trend_slack < 1.0) {
          throw ConfigError("trend_slack", "must be >= 1");
        }
      }
      if (const json* v = root.optional("final_p")) {
        p.final_p = as_double(*v, "final_p");
        if (!(p.final_p > 0.0) || p.final_p >= 1.0) {
          throw ConfigError("final_p", "must lie in (0, 1)");
        }
      }
      if (const json* v = root.optional("path_discrepancy")) {
        StrictObject pd(*v, "path_discrepancy");
        ConvergeScenario::PathBlock block;
        const json& nv = pd.require("n_values");
        if (!nv.is_array() || nv.empty()) {
          throw ConfigError("path_discrepancy.n_values", "must be nonempty");
        }
        for (std::size_t i = 0; i < nv.size(); ++i) {
          block.n_values.push_back(
              as_uint(nv[i], "path_discrepancy.n_values[" + std::to_string(i) + "]"));
        }
        if (const json* bv = pd.optional("b_values")) {
          block.b_values = number_array(*bv, "path_discrepancy.b_values");
          if (block.b_values.size() != block.n_values.size()) {
            throw ConfigError("path_discrepancy.b_values",
                              "must match n_values in length");
          }
        }
        if (const json* tg = pd.optional("t_grid")) {
          block.t_grid = rational_array(*tg, "path_discrepancy.t_grid");
        } else {
          block.t_grid = p.t_grid;
        }
        if (const json* rp = pd.optional("replicas")) {
          block.replicas = as_uint(*rp, "path_discrepancy.replicas");
          if (block.replicas < 2) {
            throw ConfigError("path_discrepancy.replicas", "must be >= 2");
          }
        }
        if (const json* w = pd.optional("window")) {
          block.window = positive_double(*w, "path_discrepancy.window");
        }
        pd.finish();
        p.path_discrepancy = std::move(block);
      }
      s.payload = std::move(p);
      break;
    }
    case Scenario::Command::metrics: {
      MetricsScenario p;
      p.x_atoms = number_array(root.require("x"), "x");
      p.y_atoms = number_array(root.require("y"), "y");
      if (const json* v = root.optional("r_values")) {
        p.r_values = number_array(*v, "r_values");
        if (p.r_values.empty()) throw ConfigError("r_values", "must be nonempty");
        for (double r : p.r_values) {
          if (!(r > 0.0)) throw ConfigError("r_values", "must be positive");
        }
      }
      s.payload = std::move(p);
      break;
    }
    case Scenario::Command::oracle: {
      OracleScenario p;
      if (const json* v = root.optional("alpha")) p.alpha = positive_double(*v, "alpha");
      if (const json* v = root.optional("b")) p.b = positive_double(*v, "b");
      if (const json* v = root.optional("theta")) p.theta = positive_double(*v, "theta");
      if (const json* v = root.optional("t")) p.t = nonneg_double(*v, "t");
      if (const json* v = root.optional("n")) {
        p.n = as_uint(*v, "n");
        if (p.n == 0) throw ConfigError("n", "must be >= 1");
      }
      if (const json* v = root.optional("rho")) {
        p.rho = parse_directional(*v, "rho");
      }
      s.payload = std::move(p);
      break;
    }
  }
  root.finish();
  return s;
}

std::string scenario_to_json(const Scenario& s) {
  json j;
  j["command"] = command_name(s.command);
  if (s.seed) j["seed"] = *s.seed;
  j["threads"] = s.threads;
  switch (s.command) {
    case Scenario::Command::simulate_brw: {
      const auto& p = std::get<BrwScenario>(s.payload);
      j["law"] = law_to_json(p.law);
      j["replicas"] = p.replicas;
      if (p.n) {
        j["n"] = *p.n;
        j["t_grid"] = rationals_to_json(p.t_grid);
      } else {
        j["steps"] = p.steps;
      }
      if (p.b) j["b"] = *p.b;
      j["max_atoms"] = p.max_atoms;
      if (p.position_cap > 0.0) j["position_cap"] = p.position_cap;
      break;
    }
    case Scenario::Command::simulate_uchiyama: {
      const auto& p = std::get<UchiyamaScenario>(s.payload);
      j["rate"] = p.rate;
      j["offspring"] = directional_to_json(p.offspring);
      j["horizon"] = p.horizon;
      j["replicas"] = p.replicas;
      j["max_particles"] = p.max_particles;
      j["event_log"] = p.event_log;
      break;
    }
    case Scenario::Command::simulate_stable: {
      const auto& p = std::get<StableScenario>(s.payload);
      j["stable"] = stable_to_json(p.stable);
      j["t"] = p.t;
      j["thresholds"] = p.thresholds;
      j["replicas"] = p.replicas;
      j["max_particles"] = p.max_particles;
      break;
    }
    case Scenario::Command::converge: {
      const auto& p = std::get<ConvergeScenario>(s.payload);
      j["law"] = law_to_json(p.law);
      if (p.stable) j["stable"] = stable_to_json(*p.stable);
      j["n_grid"] = p.n_grid;
      j["t_grid"] = rationals_to_json(p.t_grid);
      j["b"] = p.b;
      j["r"] = p.r;
      j["replicas"] = p.replicas;
      if (p.identity_replicas > 0) j["identity_replicas"] = p.identity_replicas;
      if (p.window > 0.0) j["window"] = p.window;
      j["max_atoms"] = p.max_atoms;
      j["ks_cap"] = p.ks_cap;
      j["count_limit"] = p.count_limit;
      j["trend_slack"] = p.trend_slack;
      j["final_p"] = p.final_p;
      if (p.path_discrepancy) {
        json pd;
        pd["n_values"] = p.path_discrepancy->n_values;
        if (!p.path_discrepancy->b_values.empty()) {
          pd["b_values"] = p.path_discrepancy->b_values;
        }
        pd["t_grid"] = rationals_to_json(p.path_discrepancy->t_grid);
        pd["replicas"] = p.path_discrepancy->replicas;
        if (p.path_discrepancy->window > 0.0) {
          pd["window"] = p.path_discrepancy->window;
        }
        j["path_discrepancy"] = pd;
      }
      break;
    }
    case Scenario::Command::metrics: {
      const auto& p = std::get<MetricsScenario>(s.payload);
      j["x"] = p.x_atoms;
      j["y"] = p.y_atoms;
      j["r_values"] = p.r_values;
      break;
    }
    case Scenario::Command::oracle: {
      const auto& p = std::get<OracleScenario>(s.payload);
      j["alpha"] = p.alpha;
      j["b"] = p.b;
      j["theta"] = p.theta;
      j["t"] = p.t;
      j["n"] = p.n;
      if (p.rho) j["rho"] = directional_to_json(*p.rho);
      break;
    }
  }
  return j.dump(2);
}

namespace {

int run_simulate_brw(const Scenario& s, const BrwScenario& p,
                     const std::filesystem::path& out) {
  const OffspringLaw law = p.law.build();
  std::ostringstream csv;
  csv << "replica,generation,atom_location\n";
  const auto write_generation = [&csv](std::uint64_t replica, std::uint64_t gen,
                                       const CountingMeasure& m) {
    char buf[64];
    for (double a : m.atoms()) {
      std::snprintf(buf, sizeof(buf), "%.17g", a);
      csv << replica << ',' << gen << ',' << buf << '\n';
    }
  };

  WalkLimits limits;
  limits.max_atoms = p.max_atoms;
  if (p.position_cap > 0.0) limits.position_cap = p.position_cap;

  for (std::uint64_t rep = 0; rep < p.replicas; ++rep) {
    RngStream rng = RngStream::from_path(*s.seed, {kTagSimBrw, rep});
    if (!p.n) {
      const auto trajectory = run_trajectory(law, p.steps, rng, limits);
      for (const Generation& g : trajectory) {
        write_generation(rep, g.index, g.measure);
      }
      continue;
    }
    // Magnified (optionally trimmed) marginals at the grid times, from one
    // chain per replica.
    std::uint64_t max_gen = 0;
    for (const Rational& t : p.t_grid) {
      max_gen = std::max(max_gen, t.floor_times(*p.n));
    }
    std::vector<std::uint64_t> wanted;
    for (const Rational& t : p.t_grid) wanted.push_back(t.floor_times(*p.n));

    if (p.b) {
      Generation g{CountingMeasure::delta(0.0), 0};
      const TrimmedChainParams params{*p.n, *p.b};
      for (std::uint64_t k = 0; k <= max_gen; ++k) {
        if (k > 0) g = trimmed_step(g, law, params, rng, limits);
        for (std::size_t i = 0; i < wanted.size(); ++i) {
          if (wanted[i] == k) write_generation(rep, k, g.measure);
        }
      }
    } else {
      const double scale = 1.0 / compute_a_n(law, *p.n);
      Generation g{CountingMeasure::delta(0.0), 0};
      for (std::uint64_t k = 0; k <= max_gen; ++k) {
        if (k > 0) {
          // step in raw coordinates via the rescaled engine: one generation
          // at a time so intermediate grid marginals can be dumped.
          std::vector<double> next;
          next.reserve(g.measure.size() * 2);
          for (double parent : g.measure.atoms()) {
            const CountingMeasure cluster = law.sample(rng);
            for (double d : cluster.atoms()) {
              const double child = parent + d * scale;
              if (child > limits.position_cap) continue;
              next.push_back(child);
            }
            if (next.size() > limits.max_atoms) {
              throw ExplosionError("magnified walk exceeded max_atoms",
                                   std::move(next), static_cast<double>(k));
            }
          }
          std::sort(next.begin(), next.end());
          g = Generation{CountingMeasure::from_sorted(std::move(next)), k};
        }
        for (std::size_t i = 0; i < wanted.size(); ++i) {
          if (wanted[i] == k) write_generation(rep, k, g.measure);
        }
      }
    }
  }
  write_text_file(out / "trajectory.csv", csv.str());
  return 0;
}

int run_simulate_uchiyama(const Scenario& s, const UchiyamaScenario& p,
                          const std::filesystem::path& out) {
  ReproductionMeasure rm;
  if (p.offspring.type == "point") {
    rm = fixed_cluster_reproduction(p.rate, p.offspring.atoms);
  } else {
    // Mixture cluster law.
    std::vector<CountingMeasure> clusters;
    double total_w = 0.0, mean = 0.0;
    for (double w : p.offspring.weights) total_w += w;
    std::vector<double> cdf;
    double acc = 0.0;
    for (std::size_t i = 0; i < p.offspring.weights.size(); ++i) {
      clusters.emplace_back(std::vector<double>(p.offspring.atom_sets[i]));
      acc += p.offspring.weights[i] / total_w;
      cdf.push_back(acc);
      mean += p.offspring.weights[i] / total_w *
              static_cast<double>(clusters.back().size());
    }
    cdf.back() = 1.0;
    rm.rate = p.rate;
    rm.mean_offspring_count = mean;
    rm.offspring = [clusters, cdf](RngStream& rng) {
      const double u = rng.uniform01();
      const std::size_t idx = static_cast<std::size_t>(
          std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
      return clusters[std::min(idx, cdf.size() - 1)];
    };
    rm.offspring_laplace = [clusters, cdf](double theta) {
      double v = 0.0;
      double prev = 0.0;
      for (std::size_t i = 0; i < clusters.size(); ++i) {
        v += (cdf[i] - prev) * laplace_functional(clusters[i], theta);
        prev = cdf[i];
      }
      return v;
    };
  }

  std::ostringstream ensemble;
  ensemble << "replica_id,time,location\n";
  std::ostringstream events;
  events << "time,parent_position,child_positions\n";

  const SimLimits limits{p.max_particles};
  for (std::uint64_t rep = 0; rep < p.replicas; ++rep) {
    RngStream rng = RngStream::from_path(*s.seed, {kTagSimUchiyama, rep});
    EventLog log;
    const CountingMeasure state =
        simulate(CountingMeasure::delta(0.0), rm, p.horizon, rng, limits,
                 p.event_log ? &log : nullptr);
    append_csv_rows(ensemble, rep, p.horizon, state);
    if (p.event_log) {
      char buf[64];
      for (const EventRecord& e : log) {
        std::snprintf(buf, sizeof(buf), "%.17g", e.time);
        events << buf;
        std::snprintf(buf, sizeof(buf), "%.17g", e.parent_position);
        events << ',' << buf;
        for (double c : e.child_positions) {
          std::snprintf(buf, sizeof(buf), "%.17g", c);
          events << ',' << buf;
        }
        events << '\n';
      }
    }
  }
  write_text_file(out / "ensemble.csv", ensemble.str());
  if (p.event_log) write_text_file(out / "events.csv", events.str());
  return 0;
}

int run_simulate_stable(const Scenario& s, const StableScenario& p,
                        const std::filesystem::path& out) {
  const StableSpec spec = p.stable.build();
  std::vector<std::ostringstream> files(p.thresholds.size());
  for (auto& f : files) f << "replica_id,time,location\n";
  const SimLimits limits{p.max_particles};
  std::vector<double> step_sums(
      p.thresholds.size() > 1 ? p.thresholds.size() - 1 : 0, 0.0);
  std::vector<double> bound_sums(step_sums.size(), 0.0);
  for (std::uint64_t rep = 0; rep < p.replicas; ++rep) {
    RngStream rng = RngStream::from_path(*s.seed, {kTagSimStable, rep});
    const TrimmedSampleSet set =
        sample_coupled(spec, p.t, p.thresholds, rng, limits);
    for (std::size_t i = 0; i < set.measures.size(); ++i) {
      append_csv_rows(files[i], rep, p.t, set.measures[i]);
    }
    if (!step_sums.empty()) {
      const ThresholdConvergence conv = threshold_convergence(set, 1.0);
      for (std::size_t i = 0; i < step_sums.size(); ++i) {
        step_sums[i] += conv.d_r_steps[i];
        bound_sums[i] += conv.mass_bounds[i];
      }
    }
  }
  for (std::size_t i = 0; i < files.size(); ++i) {
    std::ostringstream name;
    name << "samples_b" << p.thresholds[i] << ".csv";
    write_text_file(out / name.str(), files[i].str());
  }
  if (!step_sums.empty()) {
    // How close the largest threshold is to the untrimmed process, measured
    // through the d_1 steps between consecutive thresholds.
    json rows = json::array();
    for (std::size_t i = 0; i < step_sums.size(); ++i) {
      rows.push_back(
          json{{"from_b", p.thresholds[i]},
               {"to_b", p.thresholds[i + 1]},
               {"mean_d1", step_sums[i] / static_cast<double>(p.replicas)},
               {"mean_bound", bound_sums[i] / static_cast<double>(p.replicas)}});
    }
    write_text_file(out / "convergence.json",
                    json{{"threshold_steps", rows}}.dump(2));
  }
  return 0;
}

json ks_to_json(const KsResult& ks) {
  return json{{"statistic", ks.statistic},
              {"p_value", ks.p_value},
              {"n1", ks.n1},
              {"n2", ks.n2},
              {"tie_warning", ks.tie_warning}};
}

int run_converge(const Scenario& s, const ConvergeScenario& p,
                 const std::filesystem::path& out) {
  StableConfig stable_cfg;
  if (p.stable) {
    stable_cfg = *p.stable;
  } else {
    // The law's own scaling limit: same alpha; the direction is the law's
    // cluster shape ({1} for the two-atom families).
    stable_cfg.alpha = p.law.alpha;
    if (p.law.directional) {
      stable_cfg.rho = *p.law.directional;
    } else {
      stable_cfg.rho.type = "point";
      stable_cfg.rho.atoms = {1.0};
    }
  }

  ExperimentConfig cfg{p.law.build(), stable_cfg.build()};
  cfg.n_grid = p.n_grid;
  cfg.t_grid = p.t_grid;
  cfg.b = p.b;
  cfg.r = p.r;
  cfg.replicas = p.replicas;
  cfg.identity_replicas = p.identity_replicas;
  cfg.window = p.window;
  cfg.max_atoms = p.max_atoms;
  cfg.ks_cap = p.ks_cap;
  cfg.count_limit = p.count_limit;
  cfg.trend_slack = p.trend_slack;
  cfg.final_p_threshold = p.final_p;
  cfg.seed = *s.seed;
  cfg.threads = s.threads;

  const EnsembleReport report = convergence_experiment(cfg);

  json j;
  j["config"] = json::parse(scenario_to_json(s));
  j["seed"] = report.seed;
  j["runtime_seconds"] = report.runtime_seconds;
  json cells = json::array();
  std::ostringstream csv;
  csv << "n,t,statistic,ks_statistic,p_value,identity_mean,identity_target,"
         "identity_z,status\n";
  for (const CellReport& c : report.cells) {
    json cj;
    cj["n"] = c.n;
    cj["t"] = c.t.str();
    cj["status"] = c.status == CellStatus::ok ? "ok" : "budget-exceeded";
    if (!c.note.empty()) cj["note"] = c.note;
    if (c.status == CellStatus::ok) {
      json ks;
      for (const StatComparison& sc : c.comparisons) {
        ks[sc.name] = ks_to_json(sc.ks);
        csv << c.n << ',' << c.t.str() << ',' << sc.name << ','
            << sc.ks.statistic << ',' << sc.ks.p_value << ','
            << c.identity.mc_mean << ',' << c.identity.target << ','
            << c.identity.z << ",ok\n";
      }
      cj["ks"] = ks;
      cj["identity"] = json{{"mc_mean", c.identity.mc_mean},
                            {"se", c.identity.se},
                            {"target", c.identity.target},
                            {"z", c.identity.z},
                            {"pass", c.identity.pass}};
    } else {
      csv << c.n << ',' << c.t.str() << ",,,,,,,budget-exceeded\n";
    }
    cells.push_back(cj);
  }
  j["cells"] = cells;

  bool overall = report.overall_pass;
  json criteria = json::array();
  for (const CriterionVerdict& v : report.criteria) {
    criteria.push_back(json{{"name", v.name},
                            {"threshold", v.threshold},
                            {"evaluable", v.evaluable},
                            {"pass", v.pass}});
  }

  if (p.path_discrepancy) {
    PathDiscrepancyConfig pd{cfg.law};
    pd.r = p.r;
    pd.n_values = p.path_discrepancy->n_values;
    pd.b_values = p.path_discrepancy->b_values;
    pd.t_grid = p.path_discrepancy->t_grid;
    pd.replicas = p.path_discrepancy->replicas;
    pd.window = p.path_discrepancy->window;
    pd.max_atoms = p.max_atoms;
    pd.seed = *s.seed;
    pd.threads = s.threads;
    const PathDiscrepancyResult res = path_discrepancy_experiment(pd);
    json rows = json::array();
    for (const PathDiscrepancyRow& r : res.rows) {
      rows.push_back(json{{"n", r.n},
                          {"b", r.b},
                          {"mean_sup_dr", r.mean_sup},
                          {"se", r.se},
                          {"bound_violations", r.bound_violations}});
    }
    j["path_discrepancy"] =
        json{{"rows", rows}, {"decreasing", res.decreasing}, {"bound_ok", res.bound_ok}};
    criteria.push_back(json{{"name", "path-discrepancy-bound"},
                            {"threshold", "d_r <= weighted mass of difference, every replica"},
                            {"evaluable", true},
                            {"pass", res.bound_ok}});
    criteria.push_back(json{{"name", "path-discrepancy-decreasing"},
                            {"threshold", "ensemble mean non-increasing in n"},
                            {"evaluable", res.rows.size() >= 2},
                            {"pass", res.decreasing}});
    overall = overall && res.bound_ok &&
              (res.rows.size() < 2 || res.decreasing);
  }
  j["criteria"] = criteria;
  j["overall_pass"] = overall;
  j["budget_exceeded"] = report.any_budget_exceeded;

  write_text_file(out / "report.json", j.dump(2));
  write_text_file(out / "report.csv", csv.str());

  if (report.any_budget_exceeded) return 2;
  return overall ? 0 : 1;
}

int run_metrics(const MetricsScenario& p, const std::filesystem::path& out) {
  const CountingMeasure x{std::vector<double>(p.x_atoms)};
  const CountingMeasure y{std::vector<double>(p.y_atoms)};
  json j;
  // Unweighted distance: unit mass per atom.
  j["levy_prokhorov"] = levy_prokhorov(
      WeightedMeasure(x.atoms(), std::vector<double>(x.size(), 1.0)),
      WeightedMeasure(y.atoms(), std::vector<double>(y.size(), 1.0)));
  json dr;
  for (double r : p.r_values) {
    dr[std::to_string(r)] = d_r(x, y, r);
  }
  j["d_r"] = dr;
  write_text_file(out / "metrics.json", j.dump(2));
  return 0;
}

int run_oracle(const OracleScenario& p, const std::filesystem::path& out) {
  DirectionalConfig rho;
  if (p.rho) {
    rho = *p.rho;
  } else {
    rho.type = "point";
    rho.atoms = {1.0};
  }
  const StableSpec spec{p.alpha, rho.build()};
  const double kappa_b = cumulant(spec, p.theta, p.b);
  const double kappa_inf = cumulant(spec, p.theta, kUntrimmed);
  const ReproductionMeasure rm = trimmed_reproduction(spec, p.b);

  const OffspringLaw law = two_atom_power_law(p.alpha);
  const double a_n = compute_a_n(law, p.n);

  json j;
  j["alpha"] = p.alpha;
  j["b"] = p.b;
  j["theta"] = p.theta;
  j["t"] = p.t;
  j["n"] = p.n;
  j["kappa_b"] = kappa_b;
  j["kappa_inf"] = kappa_inf;
  j["mean_laplace"] = std::exp(p.t * kappa_b);
  j["mean_mass"] = mean_count_oracle(rm, p.t);
  j["rate"] = rm.rate;
  j["a_n"] = a_n;
  j["n_psi"] = static_cast<double>(p.n) * law.psi(1.0 / a_n);
  write_text_file(out / "oracle.json", j.dump(2));
  return 0;
}

}  // namespace

int run_scenario(const Scenario& s, const std::string& out_dir) {
  const std::filesystem::path out(out_dir.empty() ? "." : out_dir);
  std::filesystem::create_directories(out);
  try {
    switch (s.command) {
      case Scenario::Command::simulate_brw:
        return run_simulate_brw(s, std::get<BrwScenario>(s.payload), out);
      case Scenario::Command::simulate_uchiyama:
        return run_simulate_uchiyama(s, std::get<UchiyamaScenario>(s.payload), out);
      case Scenario::Command::simulate_stable:
        return run_simulate_stable(s, std::get<StableScenario>(s.payload), out);
      case Scenario::Command::converge:
        return run_converge(s, std::get<ConvergeScenario>(s.payload), out);
      case Scenario::Command::metrics:
        return run_metrics(std::get<MetricsScenario>(s.payload), out);
      case Scenario::Command::oracle:
        return run_oracle(std::get<OracleScenario>(s.payload), out);
    }
  } catch (const ExplosionError& e) {
    json j{{"error", "budget-exceeded"},
           {"detail", e.what()},
           {"time_reached", e.time_reached()},
           {"partial_atoms", e.partial_atoms().size()}};
    write_text_file(out / "error.json", j.dump(2));
    return 2;
  } catch (const NumericError& e) {
    json j{{"error", "numeric-failure"}, {"detail", e.what()}};
    write_text_file(out / "error.json", j.dump(2));
    return 3;
  }
  return 0;
}

}  // namespace branchsim
