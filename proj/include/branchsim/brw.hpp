#ifndef BRANCHSIM_BRW_HPP
#define BRANCHSIM_BRW_HPP

#include <cstdint>
#include <limits>
#include <vector>

#include "branchsim/measures.hpp"
#include "branchsim/offspring.hpp"
#include "branchsim/rational.hpp"
#include "branchsim/rng.hpp"

namespace branchsim {

/// One generation of a branching random walk.
struct Generation {
  CountingMeasure measure;
  std::uint64_t index = 0;
};

/// Guards for the geometric population growth.  `position_cap`, when finite,
/// drops children born beyond the cap (together with their never-created
/// descent).  Displacements are non-negative, so the retained configuration
/// restricted to [0, cap] is exactly that of the uncapped walk; statistics
/// supported on [0, cap] (in particular e^{-r .}-weighted ones, up to the
/// exponentially small mass beyond the cap) are unaffected.  This is what
/// makes magnified marginals at large n computable at all: their raw mass is
/// astronomical but only the atoms near the origin matter.
struct WalkLimits {
  std::size_t max_atoms = 10'000'000;
  double position_cap = std::numeric_limits<double>::infinity();
};

/// One synchronous generation: every atom x of `g` draws an independent
/// offspring cluster and contributes x + cluster; the cluster's origin atom
/// is the parent surviving in place, so the output contains the input.
Generation step_generation(const Generation& g, const OffspringLaw& law,
                           RngStream& rng, const WalkLimits& limits = {});

/// Generations 0..steps starting from delta_0.
std::vector<Generation> run_trajectory(const OffspringLaw& law,
                                       std::uint64_t steps, RngStream& rng,
                                       const WalkLimits& limits = {});

/// a_n^{-1} Z(floor(t n)): runs the walk for floor(t n) generations and
/// dilates by 1 / a_n.  `limits` applies in the magnified coordinates.
CountingMeasure rescaled_marginal(const OffspringLaw& law, std::uint64_t n,
                                  const Rational& t, RngStream& rng,
                                  const WalkLimits& limits = {});

struct TrimmedChainParams {
  std::uint64_t n = 1;  // magnification index
  double b = 1.0;       // trim threshold, in magnified coordinates
};

/// One generation of the magnified-and-trimmed chain: each parent's offspring
/// is drawn in full, magnified by 1 / a_n, and children displaced beyond b
/// are deleted before superposition (killed at birth with their descent).
/// The generation measure lives in magnified coordinates.
Generation trimmed_step(const Generation& g, const OffspringLaw& law,
                        const TrimmedChainParams& params, RngStream& rng,
                        const WalkLimits& limits = {});

/// Untrimmed and trimmed magnified marginals of one walk under shared
/// randomness: a single simulation samples every parent's full offspring and
/// applies the displacement cutoff afterwards, so the trimmed measure is an
/// atomwise sub-multiset of the untrimmed one in every generation, exactly.
struct CoupledMarginal {
  CountingMeasure untrimmed;
  CountingMeasure trimmed;
  std::uint64_t index = 0;
};

std::vector<CoupledMarginal> coupled_trajectory(const OffspringLaw& law,
                                                std::uint64_t n, double b,
                                                std::uint64_t generations,
                                                RngStream& rng,
                                                const WalkLimits& limits = {});

}  // namespace branchsim

#endif  // BRANCHSIM_BRW_HPP
