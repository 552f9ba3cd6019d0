#ifndef BRANCHSIM_OFFSPRING_HPP
#define BRANCHSIM_OFFSPRING_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "branchsim/measures.hpp"
#include "branchsim/rng.hpp"

namespace branchsim {

/// Probability law on measures with left-most atom exactly 1 ("directions" of
/// offspring clusters).  Built-in constructors are deterministic point
/// clusters and finite mixtures of them, which keeps the alpha-moment
/// <Y, .^{-alpha}> available in closed form.
struct DirectionalLaw {
  std::function<CountingMeasure(RngStream&)> sampler;
  /// Upper bound on the number of atoms per sample, when known.
  std::optional<std::size_t> max_atoms;
  /// Exact expectation of a functional of Y; available for the finite-support
  /// constructors below, empty for genuinely random samplers.
  std::function<double(const std::function<double(const CountingMeasure&)>&)>
      exact_expectation;
  std::string description;

  bool has_exact_expectation() const {
    return static_cast<bool>(exact_expectation);
  }
  /// E f(Y); exact when available, otherwise Monte Carlo with `mc_samples`.
  double expectation(const std::function<double(const CountingMeasure&)>& f,
                     std::size_t mc_samples, RngStream& rng) const;
  /// E<Y, .^{-alpha}>, the integrability descriptor of the law.
  double alpha_moment(double alpha, std::size_t mc_samples,
                      RngStream& rng) const;
};

/// Deterministic cluster at the given atoms; atoms[0] must be exactly 1.
DirectionalLaw point_directional(std::vector<double> atoms);

/// Finite mixture of deterministic clusters.
DirectionalLaw mixture_directional(std::vector<double> weights,
                                   std::vector<std::vector<double>> atom_sets);

/// Law of a first-generation offspring cluster: a sampler together with its
/// analytic descriptors.  Every sample contains exactly one atom at the
/// origin (the surviving parent) plus the displaced children; F1 is the CDF
/// of the smallest positive displacement, and psi(theta) the log-Laplace
/// transform of the intensity, log E<sample, e^{-theta .}>.
class OffspringLaw {
 public:
  struct Spec {
    double alpha = 1.0;
    std::string family;
    std::function<CountingMeasure(RngStream&)> sampler;
    std::function<double(double)> f1;
    std::function<double(double)> psi;
    /// Inverse of f1 on (0, 1); optional, bisection is used when absent.
    std::function<double(double)> f1_inverse;
    /// Mean number of atoms per sample, including the origin atom.
    double mean_total = 2.0;
  };

  explicit OffspringLaw(Spec spec);

  double alpha() const { return spec_.alpha; }
  const std::string& family() const { return spec_.family; }
  double mean_total() const { return spec_.mean_total; }

  CountingMeasure sample(RngStream& rng) const { return spec_.sampler(rng); }
  double f1(double t) const;
  double psi(double theta) const { return spec_.psi(theta); }
  bool has_f1_inverse() const { return static_cast<bool>(spec_.f1_inverse); }
  double f1_inverse(double p) const;

 private:
  Spec spec_;
};

/// Two-atom family: samples are delta_0 + delta_{X1} with F1(t) = t^alpha on
/// [0,1].  The only closed-form family in which every descriptor is exact.
OffspringLaw two_atom_power_law(double alpha);

/// Two-atom family with the slowly varying correction
/// F1(t) = min(1, t^alpha * (1 + c / ln(e/t))); sampling by numeric inversion.
OffspringLaw two_atom_slowly_varying(double alpha, double c);

/// Product family: samples are delta_0 + X1 * Y with X1 = U^{1/alpha}
/// independent of Y ~ directional.  The conditional law of the rescaled
/// cluster given a small first atom is exactly that of V^{1/alpha} Y with V
/// uniform, so the scaling hypotheses hold by construction.  The directional
/// law must have a bounded atom count.
OffspringLaw product_cluster_law(double alpha, DirectionalLaw directional);

/// Magnification sequence a_n solving n * F1(a_n) = 1.
struct ScalingSequence {
  std::function<double(std::uint64_t)> a;
};

/// a_n for one n; closed form n^{-1/alpha} when the law provides an inverse,
/// otherwise bisection.  Throws NumericError when F1 cannot be inverted at 1/n.
double compute_a_n(const OffspringLaw& law, std::uint64_t n);

ScalingSequence scaling_sequence(const OffspringLaw& law);

/// One sample of the conditional law of t^{-1} Z*(1) given X1 <= t, by
/// rejection.  Refuses when F1(t) is below `f1_floor` (expected rejection
/// count would exceed 1/f1_floor).
CountingMeasure conditional_rescaled_sample(const OffspringLaw& law, double t,
                                            RngStream& rng,
                                            double f1_floor = 1e-9);

struct C3Report {
  double max_value = 0.0;
  /// (n, n * psi(1 / a_n)) on a geometric grid of n.
  std::vector<std::pair<std::uint64_t, double>> trend;
  bool divergence_flag = false;
};

/// Evaluates sup_{n <= N} n * psi(1 / a_n) and flags apparent divergence:
/// monotone growth over the last decade of n exceeding `growth_threshold`.
C3Report check_c3(const OffspringLaw& law, std::uint64_t N,
                  double growth_threshold = 1.05);

struct IndependenceReport {
  bool applicable = false;
  double chi_square = 0.0;
  int degrees_of_freedom = 0;
  double p_value = 1.0;
  std::string note;
};

/// Chi-square independence test between V-hat = (first atom)^alpha of the
/// conditional rescaled cluster and a bounded shape statistic of the
/// remainder (number of atoms within twice the first atom), on a quantile
/// grid.  Reports "not applicable" when the shape statistic is constant.
IndependenceReport check_independence_vy(const OffspringLaw& law, double t,
                                         std::size_t n_samples,
                                         RngStream& rng);

}  // namespace branchsim

#endif  // BRANCHSIM_OFFSPRING_HPP
