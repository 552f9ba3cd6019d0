#include "branchsim/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "branchsim/errors.hpp"
#include "branchsim/parallel.hpp"
#include "branchsim/specfun.hpp"

namespace branchsim {

namespace {

// Stream path tags; a report cell is reproducible from (seed, tag, cell,
// replica) alone.
constexpr std::uint64_t kTagChain = 1;
constexpr std::uint64_t kTagStable = 2;
constexpr std::uint64_t kTagIdentity = 3;
constexpr std::uint64_t kTagPath = 4;
constexpr std::uint64_t kTagCalibration = 5;

}  // namespace

MeanSE mean_and_se(const std::vector<double>& values) {
  if (values.size() < 2) {
    throw std::invalid_argument("mean_and_se: need at least 2 values");
  }
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double var = ss / (n - 1.0);
  return MeanSE{mean, std::sqrt(var / n), values.size()};
}

MeanSE laplace_estimate(const std::vector<CountingMeasure>& samples,
                        double theta) {
  std::vector<double> values(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    values[i] = laplace_functional(samples[i], theta);
  }
  return mean_and_se(values);
}

KsResult ks_two_sample(std::vector<double> xs, std::vector<double> ys) {
  if (xs.size() < 20 || ys.size() < 20) {
    throw std::invalid_argument("ks_two_sample: need >= 20 values per side");
  }
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  const double n1 = static_cast<double>(xs.size());
  const double n2 = static_cast<double>(ys.size());
  double d = 0.0;
  std::size_t i = 0, j = 0, tied = 0;
  while (i < xs.size() && j < ys.size()) {
    const double v = std::min(xs[i], ys[j]);
    const std::size_t i0 = i, j0 = j;
    while (i < xs.size() && xs[i] == v) ++i;
    while (j < ys.size() && ys[j] == v) ++j;
    if ((i - i0) + (j - j0) >= 2) tied += (i - i0) + (j - j0);
    d = std::max(d, std::fabs(static_cast<double>(i) / n1 -
                              static_cast<double>(j) / n2));
  }
  const double ne = n1 * n2 / (n1 + n2);
  const double sq = std::sqrt(ne);
  KsResult result;
  result.statistic = d;
  result.p_value = kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d);
  result.n1 = xs.size();
  result.n2 = ys.size();
  result.tie_warning = tied * 2 > xs.size() + ys.size();
  return result;
}

KsResult ks_uniform(std::vector<double> xs) {
  if (xs.size() < 20) {
    throw std::invalid_argument("ks_uniform: need >= 20 values");
  }
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double u = std::min(1.0, std::max(0.0, xs[i]));
    d = std::max(d, std::fabs(static_cast<double>(i + 1) / n - u));
    d = std::max(d, std::fabs(u - static_cast<double>(i) / n));
  }
  const double sq = std::sqrt(n);
  KsResult result;
  result.statistic = d;
  result.p_value = kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d);
  result.n1 = xs.size();
  result.n2 = 0;
  return result;
}

double cdf_sup_distance(std::vector<double> xs,
                        const std::function<double(double)>& cdf) {
  if (xs.empty()) throw std::invalid_argument("cdf_sup_distance: empty sample");
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max(d, std::fabs(static_cast<double>(i + 1) / n - f));
    d = std::max(d, std::fabs(f - static_cast<double>(i) / n));
  }
  return d;
}

double leftmost_positive_atom(const CountingMeasure& m, double cap) {
  for (double a : m.atoms()) {
    if (a > 0.0) return std::min(a, cap);
  }
  return cap;
}

double atom_count_up_to(const CountingMeasure& m, double limit) {
  const auto& atoms = m.atoms();
  return static_cast<double>(
      std::upper_bound(atoms.begin(), atoms.end(), limit) - atoms.begin());
}

namespace {

struct ScalarTriple {
  double laplace;
  double leftmost;
  double count;
};

ScalarTriple scalar_stats(const CountingMeasure& m,
                          const ExperimentConfig& cfg) {
  return ScalarTriple{laplace_functional(m, cfg.r),
                      leftmost_positive_atom(m, cfg.ks_cap),
                      atom_count_up_to(m, cfg.count_limit)};
}

}  // namespace

EnsembleReport convergence_experiment(const ExperimentConfig& cfg) {
  if (cfg.n_grid.empty() || cfg.t_grid.empty()) {
    throw std::invalid_argument("convergence_experiment: grids must be nonempty");
  }
  if (cfg.replicas < 100) {
    throw std::invalid_argument("convergence_experiment: replicas must be >= 100");
  }
  if (!(cfg.r > 0.0)) {
    throw std::invalid_argument("convergence_experiment: r must be > 0");
  }
  const auto wall_start = std::chrono::steady_clock::now();

  const double window = cfg.window > 0.0 ? cfg.window : 40.0 / cfg.r;
  const std::uint64_t identity_replicas =
      cfg.identity_replicas > 0 ? cfg.identity_replicas : cfg.replicas;

  EnsembleReport report;
  report.seed = cfg.seed;

  const char* stat_names[3] = {"laplace", "leftmost", "count"};

  for (std::size_t ti = 0; ti < cfg.t_grid.size(); ++ti) {
    for (std::size_t ni = 0; ni < cfg.n_grid.size(); ++ni) {
      const std::uint64_t n = cfg.n_grid[ni];
      const Rational t = cfg.t_grid[ti];
      const std::uint64_t cell = ti * cfg.n_grid.size() + ni;
      const std::uint64_t gens = t.floor_times(n);

      CellReport cr;
      cr.n = n;
      cr.t = t;

      // Trimmed chain ensemble.
      std::vector<ScalarTriple> chain_stats(cfg.replicas);
      const TrimmedChainParams params{n, cfg.b};
      try {
        parallel_for(cfg.replicas, cfg.threads, [&](std::size_t i) {
          RngStream rng = RngStream::from_path(cfg.seed, {kTagChain, cell, i});
          Generation g{CountingMeasure::delta(0.0), 0};
          WalkLimits limits;
          limits.max_atoms = cfg.max_atoms;
          for (std::uint64_t k = 0; k < gens; ++k) {
            g = trimmed_step(g, cfg.law, params, rng, limits);
          }
          chain_stats[i] = scalar_stats(g.measure, cfg);
        });
      } catch (const ExplosionError&) {
        cr.status = CellStatus::budget_exceeded;
        cr.note = "trimmed chain exceeded max_atoms";
        report.cells.push_back(std::move(cr));
        report.any_budget_exceeded = true;
        continue;
      }

      // Trimmed continuous-time ensemble at the matched threshold.
      std::vector<ScalarTriple> stable_stats(cfg.replicas);
      try {
        parallel_for(cfg.replicas, cfg.threads, [&](std::size_t i) {
          RngStream rng = RngStream::from_path(cfg.seed, {kTagStable, cell, i});
          SimLimits limits{cfg.max_atoms};
          const CountingMeasure s =
              sample_trimmed(cfg.stable, t.value(), cfg.b, rng, limits);
          stable_stats[i] = scalar_stats(s, cfg);
        });
      } catch (const ExplosionError&) {
        cr.status = CellStatus::budget_exceeded;
        cr.note = "continuous-time sampler exceeded max_particles";
        report.cells.push_back(std::move(cr));
        report.any_budget_exceeded = true;
        continue;
      }

      for (int s = 0; s < 3; ++s) {
        std::vector<double> a(cfg.replicas), b2(cfg.replicas);
        for (std::size_t i = 0; i < cfg.replicas; ++i) {
          a[i] = s == 0   ? chain_stats[i].laplace
                 : s == 1 ? chain_stats[i].leftmost
                          : chain_stats[i].count;
          b2[i] = s == 0   ? stable_stats[i].laplace
                  : s == 1 ? stable_stats[i].leftmost
                           : stable_stats[i].count;
        }
        cr.comparisons.push_back(
            StatComparison{stat_names[s], ks_two_sample(std::move(a), std::move(b2))});
      }

      // Intensity identity for the untrimmed magnified walk (windowed).
      const double a_n = compute_a_n(cfg.law, n);
      const double target =
          std::exp(static_cast<double>(gens) * cfg.law.psi(cfg.r / a_n));
      const double log_expected_mass =
          static_cast<double>(gens) * std::log(cfg.law.mean_total());
      if (log_expected_mass > std::log(static_cast<double>(cfg.max_atoms)) &&
          !(window < std::numeric_limits<double>::infinity())) {
        cr.status = CellStatus::budget_exceeded;
        cr.note = "untrimmed walk outside budget and no window configured";
        report.cells.push_back(std::move(cr));
        report.any_budget_exceeded = true;
        continue;
      }
      std::vector<double> identity_values(identity_replicas);
      try {
        parallel_for(identity_replicas, cfg.threads, [&](std::size_t i) {
          RngStream rng =
              RngStream::from_path(cfg.seed, {kTagIdentity, cell, i});
          WalkLimits limits;
          limits.max_atoms = cfg.max_atoms;
          limits.position_cap = window;
          const CountingMeasure m = rescaled_marginal(cfg.law, n, t, rng, limits);
          identity_values[i] = laplace_functional(m, cfg.r);
        });
      } catch (const ExplosionError&) {
        cr.status = CellStatus::budget_exceeded;
        cr.note = "untrimmed windowed walk exceeded max_atoms";
        report.cells.push_back(std::move(cr));
        report.any_budget_exceeded = true;
        continue;
      }
      const MeanSE identity = mean_and_se(identity_values);
      cr.identity.mc_mean = identity.mean;
      cr.identity.se = identity.se;
      cr.identity.target = target;
      cr.identity.z = identity.se > 0.0
                          ? (identity.mean - target) / identity.se
                          : (identity.mean == target ? 0.0 : INFINITY);
      cr.identity.pass = std::fabs(identity.mean - target) <=
                         3.0 * identity.se + 1e-12;

      report.cells.push_back(std::move(cr));
    }
  }

  // Verdicts: per (t, statistic) trend across the n grid, final-n p-value,
  // and the identity at every evaluable cell.
  bool overall = true;
  for (std::size_t ti = 0; ti < cfg.t_grid.size(); ++ti) {
    const std::string t_label = "t=" + cfg.t_grid[ti].str();
    for (int s = 0; s < 3; ++s) {
      std::vector<const CellReport*> ok_cells;
      bool all_ok = true;
      for (std::size_t ni = 0; ni < cfg.n_grid.size(); ++ni) {
        const CellReport& cr = report.cells[ti * cfg.n_grid.size() + ni];
        if (cr.status == CellStatus::ok) {
          ok_cells.push_back(&cr);
        } else {
          all_ok = false;
        }
      }
      CriterionVerdict trend;
      trend.name = std::string("trend-") + stat_names[s] + "@" + t_label;
      trend.threshold =
          "ks[i+1] <= ks[i] * " + std::to_string(cfg.trend_slack);
      trend.evaluable = all_ok && ok_cells.size() >= 2;
      trend.pass = trend.evaluable;
      for (std::size_t i = 0; trend.evaluable && i + 1 < ok_cells.size(); ++i) {
        const double prev = ok_cells[i]->comparisons[s].ks.statistic;
        const double next = ok_cells[i + 1]->comparisons[s].ks.statistic;
        if (next > prev * cfg.trend_slack) trend.pass = false;
      }
      overall = overall && (!trend.evaluable || trend.pass);
      report.criteria.push_back(trend);

      CriterionVerdict finalp;
      finalp.name = std::string("final-p-") + stat_names[s] + "@" + t_label;
      finalp.threshold = "p > " + std::to_string(cfg.final_p_threshold);
      finalp.evaluable = !ok_cells.empty() &&
                         ok_cells.back() ==
                             &report.cells[ti * cfg.n_grid.size() +
                                           cfg.n_grid.size() - 1];
      finalp.pass = finalp.evaluable &&
                    ok_cells.back()->comparisons[s].ks.p_value >
                        cfg.final_p_threshold;
      overall = overall && (!finalp.evaluable || finalp.pass);
      report.criteria.push_back(finalp);
    }
  }
  {
    CriterionVerdict identity;
    identity.name = "intensity-identity";
    identity.threshold = "|mc - exp(floor(tn) psi(r/a_n))| <= 3 SE at every cell";
    identity.evaluable = false;
    identity.pass = true;
    for (const CellReport& cr : report.cells) {
      if (cr.status != CellStatus::ok) continue;
      identity.evaluable = true;
      identity.pass = identity.pass && cr.identity.pass;
    }
    overall = overall && (!identity.evaluable || identity.pass);
    report.criteria.push_back(identity);
  }
  report.overall_pass = overall;
  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                    wall_start)
          .count();
  return report;
}

double path_discrepancy_replica(const OffspringLaw& law, std::uint64_t n,
                                double b, double r,
                                const std::vector<Rational>& t_grid,
                                const WalkLimits& limits, RngStream& rng,
                                bool* bound_ok) {
  std::uint64_t gens = 0;
  for (const Rational& t : t_grid) gens = std::max(gens, t.floor_times(n));
  const auto marginals = coupled_trajectory(law, n, b, gens, rng, limits);
  double sup = 0.0;
  for (const Rational& t : t_grid) {
    const CoupledMarginal& cm = marginals[t.floor_times(n)];
    const double d = d_r(cm.untrimmed, cm.trimmed, r);
    const double bound = laplace_functional(
        multiset_difference(cm.untrimmed, cm.trimmed), r);
    if (bound_ok && d > bound + 1e-9) *bound_ok = false;
    sup = std::max(sup, d);
  }
  return sup;
}

PathDiscrepancyResult path_discrepancy_experiment(
    const PathDiscrepancyConfig& cfg) {
  if (cfg.n_values.empty() || cfg.t_grid.empty()) {
    throw std::invalid_argument("path discrepancy: grids must be nonempty");
  }
  if (!cfg.b_values.empty() && cfg.b_values.size() != cfg.n_values.size()) {
    throw std::invalid_argument(
        "path discrepancy: b_values must match n_values");
  }
  const double window = cfg.window > 0.0 ? cfg.window : 40.0 / cfg.r;

  PathDiscrepancyResult result;
  result.bound_ok = true;
  for (std::size_t ni = 0; ni < cfg.n_values.size(); ++ni) {
    const std::uint64_t n = cfg.n_values[ni];
    const double b = cfg.b_values.empty()
                         ? std::log(static_cast<double>(n))
                         : cfg.b_values[ni];
    if (!(b > 0.0)) {
      throw std::invalid_argument("path discrepancy: need b > 0 (n >= 2)");
    }
    std::vector<double> sups(cfg.replicas);
    std::vector<char> ok(cfg.replicas, 1);
    WalkLimits limits;
    limits.max_atoms = cfg.max_atoms;
    limits.position_cap = window;
    parallel_for(cfg.replicas, cfg.threads, [&](std::size_t i) {
      RngStream rng = RngStream::from_path(cfg.seed, {kTagPath, ni, i});
      bool replica_ok = true;
      sups[i] = path_discrepancy_replica(cfg.law, n, b, cfg.r, cfg.t_grid,
                                         limits, rng, &replica_ok);
      ok[i] = replica_ok ? 1 : 0;
    });
    PathDiscrepancyRow row;
    row.n = n;
    row.b = b;
    const MeanSE stats = mean_and_se(sups);
    row.mean_sup = stats.mean;
    row.se = stats.se;
    for (char c : ok) {
      if (!c) ++row.bound_violations;
    }
    if (row.bound_violations > 0) result.bound_ok = false;
    result.rows.push_back(row);
  }
  result.decreasing = true;
  for (std::size_t i = 0; i + 1 < result.rows.size(); ++i) {
    if (result.rows[i + 1].mean_sup > result.rows[i].mean_sup) {
      result.decreasing = false;
    }
  }
  return result;
}

CalibrationResult ks_calibration(const CalibrationConfig& cfg) {
  if (cfg.seeds < 2) {
    throw std::invalid_argument("ks_calibration: need at least 2 seeds");
  }
  CalibrationResult result;
  result.p_values.resize(cfg.seeds);
  parallel_for(cfg.seeds, cfg.threads, [&](std::size_t s) {
    std::vector<double> a(cfg.per_side), b(cfg.per_side);
    for (std::size_t side = 0; side < 2; ++side) {
      auto& dest = side == 0 ? a : b;
      for (std::size_t i = 0; i < cfg.per_side; ++i) {
        RngStream rng =
            RngStream::from_path(cfg.seed, {kTagCalibration, s, side, i});
        dest[i] = laplace_functional(
            sample_trimmed(cfg.spec, cfg.t, cfg.b, rng), cfg.theta);
      }
    }
    result.p_values[s] = ks_two_sample(std::move(a), std::move(b)).p_value;
  });
  std::size_t below = 0;
  for (double p : result.p_values) {
    if (p < 0.05) ++below;
  }
  result.fraction_below_05 =
      static_cast<double>(below) / static_cast<double>(cfg.seeds);
  result.pass =
      result.fraction_below_05 >= 0.01 && result.fraction_below_05 <= 0.12;
  return result;
}

}  // namespace branchsim
