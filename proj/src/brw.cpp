#include "branchsim/brw.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "branchsim/errors.hpp"

namespace branchsim {

namespace {

void check_sample_shape(const CountingMeasure& sample) {
  if (sample.empty() || sample.atoms().front() != 0.0 ||
      (sample.size() > 1 && sample.atoms()[1] == 0.0)) {
    throw std::domain_error(
        "offspring sample must contain exactly one atom at the origin");
  }
}

}  // namespace

Generation step_generation(const Generation& g, const OffspringLaw& law,
                           RngStream& rng, const WalkLimits& limits) {
  std::vector<double> next;
  next.reserve(g.measure.size() * 2);
  for (double parent : g.measure.atoms()) {
    const CountingMeasure cluster = law.sample(rng);
    check_sample_shape(cluster);
    for (double displacement : cluster.atoms()) {
      const double child = parent + displacement;
      if (child > limits.position_cap) continue;
      next.push_back(child);
    }
    if (next.size() > limits.max_atoms) {
      std::sort(next.begin(), next.end());
      throw ExplosionError("walk population exceeded max_atoms",
                           std::move(next),
                           static_cast<double>(g.index + 1));
    }
  }
  std::sort(next.begin(), next.end());
  return Generation{CountingMeasure::from_sorted(std::move(next)),
                    g.index + 1};
}

std::vector<Generation> run_trajectory(const OffspringLaw& law,
                                       std::uint64_t steps, RngStream& rng,
                                       const WalkLimits& limits) {
  std::vector<Generation> trajectory;
  trajectory.reserve(steps + 1);
  trajectory.push_back(Generation{CountingMeasure::delta(0.0), 0});
  for (std::uint64_t k = 0; k < steps; ++k) {
    trajectory.push_back(
        step_generation(trajectory.back(), law, rng, limits));
  }
  return trajectory;
}

CountingMeasure rescaled_marginal(const OffspringLaw& law, std::uint64_t n,
                                  const Rational& t, RngStream& rng,
                                  const WalkLimits& limits) {
  const std::uint64_t generations = t.floor_times(n);
  const double a_n = compute_a_n(law, n);
  // Work in magnified coordinates from the start so position_cap applies
  // where the caller expects it; dilation commutes with the dynamics.
  WalkLimits raw = limits;
  Generation g{CountingMeasure::delta(0.0), 0};
  const double scale = 1.0 / a_n;
  for (std::uint64_t k = 0; k < generations; ++k) {
    std::vector<double> next;
    next.reserve(g.measure.size() * 2);
    for (double parent : g.measure.atoms()) {
      const CountingMeasure cluster = law.sample(rng);
      check_sample_shape(cluster);
      for (double displacement : cluster.atoms()) {
        const double child = parent + displacement * scale;
        if (child > raw.position_cap) continue;
        next.push_back(child);
      }
      if (next.size() > raw.max_atoms) {
        std::sort(next.begin(), next.end());
        throw ExplosionError("rescaled walk exceeded max_atoms",
                             std::move(next), static_cast<double>(k + 1));
      }
    }
    std::sort(next.begin(), next.end());
    g = Generation{CountingMeasure::from_sorted(std::move(next)), k + 1};
  }
  return g.measure;
}

Generation trimmed_step(const Generation& g, const OffspringLaw& law,
                        const TrimmedChainParams& params, RngStream& rng,
                        const WalkLimits& limits) {
  if (params.n == 0 || !(params.b > 0.0)) {
    throw std::invalid_argument("trimmed_step: need n >= 1 and b > 0");
  }
  const double a_n = compute_a_n(law, params.n);
  const double scale = 1.0 / a_n;
  std::vector<double> next;
  next.reserve(g.measure.size() + 4);
  for (double parent : g.measure.atoms()) {
    const CountingMeasure cluster = law.sample(rng);
    check_sample_shape(cluster);
    for (double displacement : cluster.atoms()) {
      const double step = displacement * scale;
      if (step > params.b) continue;  // killed at birth, descent never created
      const double child = parent + step;
      if (child > limits.position_cap) continue;
      next.push_back(child);
    }
    if (next.size() > limits.max_atoms) {
      std::sort(next.begin(), next.end());
      throw ExplosionError("trimmed chain exceeded max_atoms", std::move(next),
                           static_cast<double>(g.index + 1));
    }
  }
  std::sort(next.begin(), next.end());
  return Generation{CountingMeasure::from_sorted(std::move(next)),
                    g.index + 1};
}

std::vector<CoupledMarginal> coupled_trajectory(const OffspringLaw& law,
                                                std::uint64_t n, double b,
                                                std::uint64_t generations,
                                                RngStream& rng,
                                                const WalkLimits& limits) {
  if (n == 0 || !(b > 0.0)) {
    throw std::invalid_argument("coupled_trajectory: need n >= 1 and b > 0");
  }
  const double scale = 1.0 / compute_a_n(law, n);

  // Particle soup in magnified coordinates; `surviving` marks membership in
  // the trimmed chain (every displacement along the ancestry was <= b).
  std::vector<double> position{0.0};
  std::vector<char> surviving{1};

  std::vector<CoupledMarginal> out;
  out.reserve(generations + 1);
  const auto snapshot = [&](std::uint64_t index) {
    std::vector<double> all(position.begin(), position.end());
    std::vector<double> trimmed;
    trimmed.reserve(position.size());
    for (std::size_t i = 0; i < position.size(); ++i) {
      if (surviving[i]) trimmed.push_back(position[i]);
    }
    std::sort(all.begin(), all.end());
    std::sort(trimmed.begin(), trimmed.end());
    out.push_back(CoupledMarginal{CountingMeasure::from_sorted(std::move(all)),
                                  CountingMeasure::from_sorted(std::move(trimmed)),
                                  index});
  };
  snapshot(0);

  for (std::uint64_t k = 0; k < generations; ++k) {
    const std::size_t parents = position.size();
    for (std::size_t i = 0; i < parents; ++i) {
      const CountingMeasure cluster = law.sample(rng);
      check_sample_shape(cluster);
      for (std::size_t j = 1; j < cluster.size(); ++j) {
        const double step = cluster.atoms()[j] * scale;
        const double child = position[i] + step;
        if (child > limits.position_cap) continue;
        position.push_back(child);
        surviving.push_back(surviving[i] && step <= b);
      }
      if (position.size() > limits.max_atoms) {
        std::sort(position.begin(), position.end());
        throw ExplosionError("coupled walk exceeded max_atoms",
                             std::move(position), static_cast<double>(k + 1));
      }
    }
    snapshot(k + 1);
  }
  return out;
}

}  // namespace branchsim
