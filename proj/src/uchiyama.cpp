#include "branchsim/uchiyama.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <utility>

#include "branchsim/errors.hpp"

namespace branchsim {

ReproductionMeasure fixed_cluster_reproduction(double rate,
                                               std::vector<double> atoms) {
  if (!(rate > 0.0)) {
    throw std::invalid_argument("reproduction measure: rate must be > 0");
  }
  if (atoms.empty()) {
    throw std::invalid_argument(
        "reproduction measure: offspring cluster must be nonempty");
  }
  const CountingMeasure cluster{std::move(atoms)};
  ReproductionMeasure rm;
  rm.rate = rate;
  rm.offspring = [cluster](RngStream&) { return cluster; };
  rm.mean_offspring_count = static_cast<double>(cluster.size());
  rm.offspring_laplace = [cluster](double theta) {
    return laplace_functional(cluster, theta);
  };
  rm.origin_atom_always = cluster.atoms().front() == 0.0;
  return rm;
}

CountingMeasure simulate(const CountingMeasure& initial,
                         const ReproductionMeasure& rm, double horizon,
                         RngStream& rng, const SimLimits& limits,
                         EventLog* log) {
  if (initial.empty()) {
    throw std::invalid_argument("simulate: initial configuration is empty");
  }
  if (horizon < 0.0) {
    throw std::invalid_argument("simulate: horizon must be >= 0");
  }

  std::vector<double> position(initial.atoms());
  std::vector<char> alive(position.size(), 1);
  std::size_t alive_count = position.size();

  using Entry = std::pair<double, std::size_t>;  // (death time, particle id)
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> queue;
  for (std::size_t id = 0; id < position.size(); ++id) {
    queue.emplace(rng.exponential(rm.rate), id);
  }

  const auto collect_alive = [&]() {
    std::vector<double> atoms;
    atoms.reserve(alive_count);
    for (std::size_t id = 0; id < position.size(); ++id) {
      if (alive[id]) atoms.push_back(position[id]);
    }
    std::sort(atoms.begin(), atoms.end());
    return atoms;
  };

  while (!queue.empty() && queue.top().first <= horizon) {
    const auto [when, id] = queue.top();
    queue.pop();
    const double site = position[id];
    const CountingMeasure cluster = rm.offspring(rng);
    if (cluster.empty()) {
      throw std::domain_error(
          "simulate: offspring law produced an empty cluster (particles must "
          "never die without offspring)");
    }
    alive[id] = 0;
    --alive_count;
    if (log) {
      EventRecord rec;
      rec.time = when;
      rec.parent_position = site;
      rec.child_positions.reserve(cluster.size());
      for (double a : cluster.atoms()) rec.child_positions.push_back(site + a);
      log->push_back(std::move(rec));
    }
    for (double a : cluster.atoms()) {
      position.push_back(site + a);
      alive.push_back(1);
      ++alive_count;
      queue.emplace(when + rng.exponential(rm.rate), position.size() - 1);
    }
    if (alive_count > limits.max_particles) {
      throw ExplosionError("particle system exceeded max_particles",
                           collect_alive(), when);
    }
  }
  return CountingMeasure::from_sorted(collect_alive());
}

double mean_count_oracle(const ReproductionMeasure& rm, double t) {
  if (t < 0.0) throw std::invalid_argument("mean_count_oracle: t must be >= 0");
  if (!std::isfinite(rm.mean_offspring_count)) {
    throw NumericError("mean_count_oracle: mean offspring count unknown");
  }
  return std::exp(rm.rate * (rm.mean_offspring_count - 1.0) * t);
}

namespace {

double offspring_laplace_value(const ReproductionMeasure& rm, double theta,
                               RngStream* rng, std::size_t mc_samples) {
  if (rm.offspring_laplace) return rm.offspring_laplace(theta);
  if (rng == nullptr) {
    throw NumericError(
        "mean_laplace_oracle: no closed-form cluster transform and no rng "
        "for a Monte Carlo estimate");
  }
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < mc_samples; ++i) {
    const double v = laplace_functional(rm.offspring(*rng), theta);
    sum += v;
    sum_sq += v * v;
  }
  const double n = static_cast<double>(mc_samples);
  const double mean = sum / n;
  const double var = std::max(0.0, sum_sq / n - mean * mean) / (n - 1.0);
  const double half_width = 1.96 * std::sqrt(var);
  if (half_width > 0.005 * mean) {
    throw NumericError(
        "mean_laplace_oracle: cluster transform estimate has relative 95% CI "
        "wider than 1%; increase mc_samples");
  }
  return mean;
}

}  // namespace

double mean_laplace_oracle(const ReproductionMeasure& rm, double theta,
                           double t, RngStream* rng, std::size_t mc_samples) {
  if (!(theta > 0.0)) {
    throw std::invalid_argument("mean_laplace_oracle: theta must be > 0");
  }
  if (t < 0.0) {
    throw std::invalid_argument("mean_laplace_oracle: t must be >= 0");
  }
  const double phi = offspring_laplace_value(rm, theta, rng, mc_samples);
  return std::exp(t * rm.rate * (phi - 1.0));
}

double generator_apply(const ReproductionMeasure& rm, const CountingMeasure& x,
                       const std::function<double(const CountingMeasure&)>& phi,
                       std::size_t mc_samples, RngStream& rng) {
  const std::size_t k = x.size();
  double total = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    std::vector<double> rest;
    rest.reserve(k - 1);
    for (std::size_t i = 0; i < k; ++i) {
      if (i != j) rest.push_back(x.atoms()[i]);
    }
    const CountingMeasure without = CountingMeasure::from_sorted(rest);
    double acc = 0.0;
    for (std::size_t s = 0; s < mc_samples; ++s) {
      const CountingMeasure cluster = rm.offspring(rng);
      acc += phi(superpose(without, translate(cluster, x.atoms()[j])));
    }
    total += acc / static_cast<double>(mc_samples);
  }
  return rm.rate * total - rm.rate * static_cast<double>(k) * phi(x);
}

double generator_residual(const ReproductionMeasure& rm,
                          const CountingMeasure& x,
                          const std::function<double(const CountingMeasure&)>& phi,
                          double t, std::size_t n_samples, RngStream& rng) {
  if (x.empty()) {
    throw std::invalid_argument("generator_residual: x must be nonempty");
  }
  if (!(t > 0.0) ||
      t > 0.05 / (rm.rate * static_cast<double>(x.size()))) {
    throw std::invalid_argument(
        "generator_residual: t must be positive and small (<= 0.05 / (R k))");
  }
  if (n_samples < 100) {
    throw std::invalid_argument("generator_residual: need >= 100 samples");
  }

  const double a_phi = generator_apply(rm, x, phi, n_samples, rng);

  // E[phi(state(t))] with the no-event case integrated out exactly:
  // with k particles the first event time is Exp(R k), so
  //   E phi = e^{-Rkt} phi(x) + (1 - e^{-Rkt}) E[ phi | first event < t ],
  // and only the conditional part is sampled.  The estimator's noise then
  // carries the (1 - e^{-Rkt}) = O(t) prefactor, which keeps it far below
  // the O(t^2) residual being measured.
  const double total_rate = rm.rate * static_cast<double>(x.size());
  const double p_event = -std::expm1(-total_rate * t);
  double acc = 0.0;
  for (std::size_t s = 0; s < n_samples; ++s) {
    // First event time conditioned on being < t.
    const double u = rng.uniform01();
    const double first = -std::log1p(-u * p_event) / total_rate;
    // The particle that dies is uniform among the k.
    const std::size_t j =
        static_cast<std::size_t>(rng.uniform_below(x.size()));
    std::vector<double> rest;
    rest.reserve(x.size() - 1);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (i != j) rest.push_back(x.atoms()[i]);
    }
    const CountingMeasure cluster = rm.offspring(rng);
    const CountingMeasure after =
        superpose(CountingMeasure::from_sorted(std::move(rest)),
                  translate(cluster, x.atoms()[j]));
    acc += phi(simulate(after, rm, t - first, rng));
  }
  const double conditional_mean = acc / static_cast<double>(n_samples);
  const double semigroup =
      (1.0 - p_event) * phi(x) + p_event * conditional_mean;

  return std::fabs(semigroup - phi(x) - t * a_phi);
}

}  // namespace branchsim
