#ifndef BRANCHSIM_EXPERIMENTS_HPP
#define BRANCHSIM_EXPERIMENTS_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "branchsim/brw.hpp"
#include "branchsim/measures.hpp"
#include "branchsim/offspring.hpp"
#include "branchsim/rational.hpp"
#include "branchsim/stable.hpp"

namespace branchsim {

struct MeanSE {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

MeanSE mean_and_se(const std::vector<double>& values);

/// Ensemble mean and standard error of <., e^{-theta .}>.
MeanSE laplace_estimate(const std::vector<CountingMeasure>& samples,
                        double theta);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  /// More than half of the pooled data sits in tied values; the asymptotic
  /// p-value is then conservative (discrete-statistic caveat).
  bool tie_warning = false;
};

/// Classical two-sample Kolmogorov-Smirnov with the asymptotic p-value
/// (effective-sample-size correction of Stephens).  Requires >= 20 values
/// per side.
KsResult ks_two_sample(std::vector<double> xs, std::vector<double> ys);

/// One-sample KS against the uniform law on [0,1].
KsResult ks_uniform(std::vector<double> xs);

/// sup_t |F_hat(t) - cdf(t)| over all reals, computed at the order statistics.
double cdf_sup_distance(std::vector<double> xs,
                        const std::function<double(double)>& cdf);

// --- scalar statistics used by the convergence comparisons ------------------

/// Location of the left-most strictly positive atom, capped at `cap`;
/// measures with no positive atom map to the cap (absence encoded as +inf,
/// then capped, which keeps KS comparisons well defined).
double leftmost_positive_atom(const CountingMeasure& m, double cap);

/// Number of atoms in [0, limit].
double atom_count_up_to(const CountingMeasure& m, double limit);

// --- convergence experiment ---------------------------------------------------

struct ExperimentConfig {
  ExperimentConfig(OffspringLaw law_, StableSpec stable_)
      : law(std::move(law_)), stable(std::move(stable_)) {}

  OffspringLaw law;
  StableSpec stable;
  std::vector<std::uint64_t> n_grid;
  std::vector<Rational> t_grid;
  double b = 1.0;
  double r = 1.0;
  std::uint64_t replicas = 10'000;
  /// Replicas for the untrimmed intensity identity; 0 means `replicas`.
  std::uint64_t identity_replicas = 0;
  /// Position cap for the untrimmed magnified runs; 0 means the default
  /// 40 / r, at which the discarded e^{-r .}-weighted tail is negligible
  /// against the Monte Carlo error.
  double window = 0.0;
  std::size_t max_atoms = 10'000'000;
  double ks_cap = 10.0;
  double count_limit = 1.0;
  double trend_slack = 1.05;
  double final_p_threshold = 0.01;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

enum class CellStatus { ok, budget_exceeded };

struct StatComparison {
  std::string name;
  KsResult ks;
};

struct IdentityCheck {
  double mc_mean = 0.0;
  double se = 0.0;
  double target = 0.0;
  double z = 0.0;
  bool pass = false;
};

struct CellReport {
  std::uint64_t n = 0;
  Rational t;
  CellStatus status = CellStatus::ok;
  std::vector<StatComparison> comparisons;
  IdentityCheck identity;
  std::string note;
};

struct CriterionVerdict {
  std::string name;
  std::string threshold;
  bool pass = false;
  bool evaluable = true;
};

struct EnsembleReport {
  std::vector<CellReport> cells;
  std::vector<CriterionVerdict> criteria;
  bool overall_pass = false;
  bool any_budget_exceeded = false;
  double runtime_seconds = 0.0;
  std::uint64_t seed = 0;
};

/// For every (n, t) cell: ensembles of the magnified trimmed chain at
/// generation floor(t n) and of the trimmed continuous-time process at time
/// t, compared through three scalar statistics (Laplace functional at
/// theta = r, capped left-most positive atom, atom count in [0, count_limit])
/// by two-sample KS; plus the internal intensity identity for the untrimmed
/// magnified walk, E<., e^{-r .}> = exp(floor(t n) psi(r / a_n)), which must
/// hold within 3 SE before any cross-model comparison is trusted.  Verdicts:
/// per (t, statistic), the KS statistic must be non-increasing along the n
/// grid up to `trend_slack`, and the final-n p-value must exceed
/// `final_p_threshold`.  Cells whose population guard trips are reported as
/// budget-exceeded, not failed.
EnsembleReport convergence_experiment(const ExperimentConfig& cfg);

// --- coupled path discrepancy -------------------------------------------------

struct PathDiscrepancyConfig {
  explicit PathDiscrepancyConfig(OffspringLaw law_) : law(std::move(law_)) {}

  OffspringLaw law;
  double r = 1.0;
  std::vector<std::uint64_t> n_values;
  /// Trim thresholds matched to n_values; empty means b_n = ln(n).
  std::vector<double> b_values;
  std::vector<Rational> t_grid;
  std::uint64_t replicas = 200;
  double window = 0.0;  // 0: default 40 / r
  std::size_t max_atoms = 10'000'000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct PathDiscrepancyRow {
  std::uint64_t n = 0;
  double b = 0.0;
  double mean_sup = 0.0;
  double se = 0.0;
  std::size_t bound_violations = 0;
};

struct PathDiscrepancyResult {
  std::vector<PathDiscrepancyRow> rows;
  bool decreasing = false;
  bool bound_ok = false;
};

/// One replica: max over the t grid of d_r between the untrimmed and trimmed
/// magnified marginals under shared randomness; also checks the per-time
/// bound d_r <= <untrimmed - trimmed, e^{-r .}>.
double path_discrepancy_replica(const OffspringLaw& law, std::uint64_t n,
                                double b, double r,
                                const std::vector<Rational>& t_grid,
                                const WalkLimits& limits, RngStream& rng,
                                bool* bound_ok);

PathDiscrepancyResult path_discrepancy_experiment(
    const PathDiscrepancyConfig& cfg);

// --- null calibration ----------------------------------------------------------

struct CalibrationConfig {
  explicit CalibrationConfig(StableSpec spec_) : spec(std::move(spec_)) {}

  StableSpec spec;
  double b = 2.0;
  double t = 1.0;
  double theta = 1.0;
  std::size_t seeds = 100;
  std::size_t per_side = 2000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct CalibrationResult {
  std::vector<double> p_values;
  double fraction_below_05 = 0.0;
  bool pass = false;  // fraction within [0.01, 0.12]
};

/// Compares two independent ensembles of the same sampler per seed; under
/// this null the KS p-values must be uniform, checked through the fraction
/// below 0.05.
CalibrationResult ks_calibration(const CalibrationConfig& cfg);

}  // namespace branchsim

#endif  // BRANCHSIM_EXPERIMENTS_HPP
