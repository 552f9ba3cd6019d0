#include "branchsim/stable.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <utility>

#include "branchsim/errors.hpp"
#include "branchsim/specfun.hpp"
#include "branchsim/experiments.hpp"

namespace branchsim {

namespace {

void validate_spec(const StableSpec& spec) {
  if (!(spec.alpha > 0.0)) {
    throw std::invalid_argument("stable spec: alpha must be positive");
  }
  if (!spec.directional.sampler) {
    throw std::invalid_argument("stable spec: directional law has no sampler");
  }
}

}  // namespace

ReproductionMeasure trimmed_reproduction(const StableSpec& spec, double b) {
  validate_spec(spec);
  if (!(b > 0.0)) {
    throw std::invalid_argument("trimmed_reproduction: b must be positive");
  }
  const double alpha = spec.alpha;
  const DirectionalLaw dir = spec.directional;

  ReproductionMeasure rm;
  rm.rate = std::pow(b, alpha);  // alpha^{-1} b^alpha lambda(M^1), lambda = alpha rho
  rm.origin_atom_always = true;
  rm.offspring = [alpha, b, dir](RngStream& rng) {
    const double v = rng.uniform_pos();
    const double radius = std::pow(v, 1.0 / alpha);
    const CountingMeasure y = dir.sampler(rng);
    std::vector<double> atoms;
    atoms.reserve(y.size() + 1);
    atoms.push_back(0.0);
    for (double a : y.atoms()) {
      const double scaled = radius * a;
      if (scaled > 1.0) break;  // direction atoms are sorted
      atoms.push_back(b * scaled);
    }
    return CountingMeasure::from_sorted(std::move(atoms));
  };

  // E #children = sum_j P(V^{1/alpha} Y_j <= 1) = sum_j min(1, Y_j^{-alpha}).
  if (dir.has_exact_expectation()) {
    rm.mean_offspring_count =
        1.0 + dir.exact_expectation([alpha](const CountingMeasure& y) {
          double s = 0.0;
          for (double a : y.atoms()) s += std::min(1.0, std::pow(a, -alpha));
          return s;
        });
    // phi_Pi(theta) = 1 + E_Y sum_j alpha (theta b Y_j)^{-alpha}
    //                              gamma(alpha, theta b).
    rm.offspring_laplace = [alpha, b, dir](double theta) {
      const double g = lower_incomplete_gamma(alpha, theta * b);
      return 1.0 + dir.exact_expectation([&](const CountingMeasure& y) {
               double s = 0.0;
               for (double a : y.atoms()) {
                 s += alpha * std::pow(theta * b * a, -alpha) * g;
               }
               return s;
             });
    };
  } else {
    rm.mean_offspring_count = std::numeric_limits<double>::quiet_NaN();
  }
  return rm;
}

CountingMeasure sample_trimmed(const StableSpec& spec, double t, double b,
                               RngStream& rng, const SimLimits& limits) {
  if (t < 0.0) throw std::invalid_argument("sample_trimmed: t must be >= 0");
  return simulate(CountingMeasure::delta(0.0), trimmed_reproduction(spec, b),
                  t, rng, limits);
}

TrimmedSampleSet sample_coupled(const StableSpec& spec, double t,
                                std::vector<double> thresholds, RngStream& rng,
                                const SimLimits& limits) {
  validate_spec(spec);
  if (thresholds.empty()) {
    throw std::invalid_argument("sample_coupled: need at least one threshold");
  }
  if (!std::is_sorted(thresholds.begin(), thresholds.end()) ||
      !(thresholds.front() > 0.0)) {
    throw std::invalid_argument(
        "sample_coupled: thresholds must be positive and increasing");
  }
  const double b_max = thresholds.back();
  const ReproductionMeasure rm = trimmed_reproduction(spec, b_max);

  // Forest of particles with birth-displacement labels; max_step[i] is the
  // largest displacement along i's ancestry, so pruning at threshold b keeps
  // exactly the particles with max_step <= b.
  std::vector<double> position{0.0};
  std::vector<double> max_step{0.0};

  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> queue;
  queue.emplace(rng.exponential(rm.rate), 0);

  while (!queue.empty() && queue.top().first <= t) {
    const auto [when, id] = queue.top();
    queue.pop();
    // Immortal-parent form: the cluster's origin atom is the parent itself,
    // which keeps its identity and draws a fresh clock.
    const CountingMeasure cluster = rm.offspring(rng);
    for (std::size_t j = 1; j < cluster.size(); ++j) {
      const double step = cluster.atoms()[j];
      position.push_back(position[id] + step);
      max_step.push_back(std::max(max_step[id], step));
      queue.emplace(when + rng.exponential(rm.rate), position.size() - 1);
    }
    queue.emplace(when + rng.exponential(rm.rate), id);
    if (position.size() > limits.max_particles) {
      std::vector<double> partial(position);
      std::sort(partial.begin(), partial.end());
      throw ExplosionError("coupled sampler exceeded max_particles",
                           std::move(partial), when);
    }
  }

  TrimmedSampleSet out;
  out.thresholds = thresholds;
  out.measures.reserve(thresholds.size());
  for (double b : thresholds) {
    std::vector<double> atoms;
    for (std::size_t i = 0; i < position.size(); ++i) {
      if (max_step[i] <= b) atoms.push_back(position[i]);
    }
    std::sort(atoms.begin(), atoms.end());
    out.measures.push_back(CountingMeasure::from_sorted(std::move(atoms)));
  }
  return out;
}

ThresholdConvergence threshold_convergence(const TrimmedSampleSet& set,
                                           double r) {
  ThresholdConvergence out;
  for (std::size_t i = 0; i + 1 < set.measures.size(); ++i) {
    const CountingMeasure& small = set.measures[i];
    const CountingMeasure& big = set.measures[i + 1];
    out.d_r_steps.push_back(d_r(big, small, r));
    out.mass_bounds.push_back(
        laplace_functional(multiset_difference(big, small), r));
  }
  return out;
}

double cumulant(const StableSpec& spec, double theta, double b) {
  validate_spec(spec);
  if (!(theta > 0.0)) {
    throw std::invalid_argument("cumulant: theta must be positive");
  }
  if (!(b > 0.0)) {
    throw std::invalid_argument("cumulant: b must be positive");
  }
  const double alpha = spec.alpha;
  const double g = std::isinf(b) ? std::tgamma(alpha)
                                 : lower_incomplete_gamma(alpha, theta * b);
  // kappa_b(theta) = b^alpha (phi_Pi(theta) - 1)
  //                = alpha theta^{-alpha} gamma(alpha, theta b)
  //                    * E<Y, .^{-alpha}>.
  RngStream aux(0xC1A0B2D4u);
  const double moment = spec.directional.alpha_moment(alpha, 1u << 16, aux);
  if (!std::isfinite(moment)) {
    throw NumericError("cumulant: directional alpha-moment is not finite");
  }
  const double value = alpha * std::pow(theta, -alpha) * g * moment;
  if (!std::isfinite(value)) {
    throw NumericError("cumulant: evaluation diverged");
  }
  return value;
}

bool cumulant_scaling_identity_holds(const StableSpec& spec, double c,
                                     double b, double tolerance) {
  const double ca = std::pow(c, -spec.alpha);
  for (double theta : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    const double lhs = cumulant(spec, c * theta, b);
    const double rhs = ca * cumulant(spec, theta, c * b);
    if (std::fabs(lhs - rhs) > tolerance * (1.0 + std::fabs(rhs))) {
      return false;
    }
  }
  return true;
}

SelfSimilarityReport self_similarity_check(const StableSpec& spec, double c,
                                           double b, double t,
                                           std::size_t replicas,
                                           RngStream& rng) {
  if (!(c > 0.0) || !(b > 0.0) || !(t > 0.0)) {
    throw std::invalid_argument("self_similarity_check: c, b, t must be > 0");
  }
  SelfSimilarityReport report;
  report.identity_verified = cumulant_scaling_identity_holds(spec, c, b);
  if (!report.identity_verified) return report;

  const double t_scaled = std::pow(c, -spec.alpha) * t;
  std::vector<double> lhs(replicas), rhs(replicas);
  for (std::size_t i = 0; i < replicas; ++i) {
    RngStream r1 = rng.child(2 * i);
    RngStream r2 = rng.child(2 * i + 1);
    lhs[i] = laplace_functional(dilate(sample_trimmed(spec, t, b, r1), c), 1.0);
    rhs[i] =
        laplace_functional(sample_trimmed(spec, t_scaled, c * b, r2), 1.0);
  }
  const KsResult ks = ks_two_sample(lhs, rhs);
  report.ks_statistic = ks.statistic;
  report.p_value = ks.p_value;
  report.replicas = replicas;
  return report;
}

}  // namespace branchsim
