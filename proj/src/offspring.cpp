#include "branchsim/offspring.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "branchsim/errors.hpp"
#include "branchsim/specfun.hpp"

namespace branchsim {

double DirectionalLaw::expectation(
    const std::function<double(const CountingMeasure&)>& f,
    std::size_t mc_samples, RngStream& rng) const {
  if (exact_expectation) return exact_expectation(f);
  double sum = 0.0;
  for (std::size_t i = 0; i < mc_samples; ++i) sum += f(sampler(rng));
  return sum / static_cast<double>(mc_samples);
}

double DirectionalLaw::alpha_moment(double alpha, std::size_t mc_samples,
                                    RngStream& rng) const {
  return expectation(
      [alpha](const CountingMeasure& y) {
        double s = 0.0;
        for (double atom : y.atoms()) s += std::pow(atom, -alpha);
        return s;
      },
      mc_samples, rng);
}

namespace {

void validate_direction_atoms(const std::vector<double>& atoms) {
  if (atoms.empty() || atoms.front() != 1.0) {
    throw std::invalid_argument("directional law: left-most atom must be 1");
  }
  if (!std::is_sorted(atoms.begin(), atoms.end())) {
    throw std::invalid_argument("directional law: atoms must be sorted");
  }
}

}  // namespace

DirectionalLaw point_directional(std::vector<double> atoms) {
  validate_direction_atoms(atoms);
  DirectionalLaw law;
  law.max_atoms = atoms.size();
  law.description = "point";
  const CountingMeasure cluster = CountingMeasure::from_sorted(atoms);
  law.exact_expectation =
      [cluster](const std::function<double(const CountingMeasure&)>& f) {
        return f(cluster);
      };
  law.sampler = [cluster](RngStream&) { return cluster; };
  return law;
}

DirectionalLaw mixture_directional(std::vector<double> weights,
                                   std::vector<std::vector<double>> atom_sets) {
  if (weights.size() != atom_sets.size() || weights.empty()) {
    throw std::invalid_argument("mixture directional: component mismatch");
  }
  double total = 0.0;
  std::size_t max_atoms = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] > 0.0)) {
      throw std::invalid_argument("mixture directional: weights must be > 0");
    }
    validate_direction_atoms(atom_sets[i]);
    total += weights[i];
    max_atoms = std::max(max_atoms, atom_sets[i].size());
  }
  std::vector<double> cdf(weights.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i] / total;
    cdf[i] = acc;
  }
  cdf.back() = 1.0;

  DirectionalLaw law;
  law.max_atoms = max_atoms;
  law.description = "mixture";
  std::vector<CountingMeasure> clusters;
  clusters.reserve(atom_sets.size());
  for (auto& atoms : atom_sets) {
    clusters.push_back(CountingMeasure::from_sorted(std::move(atoms)));
  }
  std::vector<double> probs(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) probs[i] = weights[i] / total;
  law.exact_expectation =
      [probs, clusters](const std::function<double(const CountingMeasure&)>& f) {
        double s = 0.0;
        for (std::size_t i = 0; i < probs.size(); ++i) s += probs[i] * f(clusters[i]);
        return s;
      };
  law.sampler = [cdf, clusters](RngStream& rng) {
    const double u = rng.uniform01();
    const std::size_t idx = static_cast<std::size_t>(
        std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    return clusters[std::min(idx, cdf.size() - 1)];
  };
  return law;
}

OffspringLaw::OffspringLaw(Spec spec) : spec_(std::move(spec)) {
  if (!(spec_.alpha > 0.0)) {
    throw std::invalid_argument("offspring law: alpha must be positive");
  }
}

double OffspringLaw::f1(double t) const {
  if (t <= 0.0) return 0.0;
  return spec_.f1(t);
}

double OffspringLaw::f1_inverse(double p) const {
  if (!spec_.f1_inverse) {
    throw NumericError("offspring law has no closed-form F1 inverse");
  }
  return spec_.f1_inverse(p);
}

OffspringLaw two_atom_power_law(double alpha) {
  if (!(alpha > 0.0)) {
    throw std::invalid_argument("two_atom_power_law: alpha must be positive");
  }
  OffspringLaw::Spec spec;
  spec.alpha = alpha;
  spec.family = "two-atom";
  spec.mean_total = 2.0;
  spec.sampler = [alpha](RngStream& rng) {
    const double x1 = std::pow(rng.uniform_pos(), 1.0 / alpha);
    return CountingMeasure::from_sorted({0.0, x1});
  };
  spec.f1 = [alpha](double t) { return t >= 1.0 ? 1.0 : std::pow(t, alpha); };
  // E e^{-theta X1} = alpha theta^{-alpha} gamma(alpha, theta)
  spec.psi = [alpha](double theta) {
    if (theta <= 0.0) {
      throw std::invalid_argument("psi: theta must be positive");
    }
    const double mean = alpha * std::pow(theta, -alpha) *
                        lower_incomplete_gamma(alpha, theta);
    return std::log1p(mean);
  };
  spec.f1_inverse = [alpha](double p) { return std::pow(p, 1.0 / alpha); };
  return OffspringLaw(std::move(spec));
}

OffspringLaw two_atom_slowly_varying(double alpha, double c) {
  if (!(alpha > 0.0)) {
    throw std::invalid_argument("two_atom_slowly_varying: alpha must be positive");
  }
  if (c < 0.0) {
    throw std::invalid_argument("two_atom_slowly_varying: c must be >= 0");
  }
  // F1(t) = min(1, t^alpha L(t)) with L(t) = 1 + c / ln(e/t); monotone on
  // (0, 1], regularly varying with index alpha at 0+.
  auto f1 = [alpha, c](double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    const double l = 1.0 + c / (1.0 - std::log(t));
    return std::min(1.0, std::pow(t, alpha) * l);
  };
  auto invert = [f1](double p) {
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      if (f1(mid) < p) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return 0.5 * (lo + hi);
  };

  OffspringLaw::Spec spec;
  spec.alpha = alpha;
  spec.family = "two-atom-slowly-varying";
  spec.mean_total = 2.0;
  spec.f1 = f1;
  spec.sampler = [invert](RngStream& rng) {
    const double x1 = invert(rng.uniform_pos());
    return CountingMeasure::from_sorted({0.0, x1});
  };
  // psi via the inverse-CDF representation
  // E e^{-theta X1} = int_0^1 e^{-theta F1^{-1}(p)} dp, composite Simpson.
  spec.psi = [invert](double theta) {
    if (theta <= 0.0) {
      throw std::invalid_argument("psi: theta must be positive");
    }
    const int m = 512;
    double s = 0.0;
    for (int i = 0; i <= m; ++i) {
      const double p = static_cast<double>(i) / m;
      const double x = (i == m) ? 1.0 : invert(p);
      const double f = std::exp(-theta * x);
      const double w = (i == 0 || i == m) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
      s += w * f;
    }
    return std::log1p(s / (3.0 * m));
  };
  return OffspringLaw(std::move(spec));
}

OffspringLaw product_cluster_law(double alpha, DirectionalLaw directional) {
  if (!(alpha > 0.0)) {
    throw std::invalid_argument("product_cluster_law: alpha must be positive");
  }
  if (!directional.max_atoms.has_value()) {
    throw std::invalid_argument(
        "product_cluster_law: directional law must have a bounded atom count "
        "(otherwise the intensity condition cannot be guaranteed)");
  }

  OffspringLaw::Spec spec;
  spec.alpha = alpha;
  spec.family = "product-cluster";
  const DirectionalLaw dir = std::move(directional);
  spec.sampler = [alpha, dir](RngStream& rng) {
    const double x1 = std::pow(rng.uniform_pos(), 1.0 / alpha);
    const CountingMeasure y = dir.sampler(rng);
    std::vector<double> atoms;
    atoms.reserve(y.size() + 1);
    atoms.push_back(0.0);
    for (double a : y.atoms()) atoms.push_back(x1 * a);
    return CountingMeasure::from_sorted(std::move(atoms));
  };
  spec.f1 = [alpha](double t) { return t >= 1.0 ? 1.0 : std::pow(t, alpha); };
  spec.f1_inverse = [alpha](double p) { return std::pow(p, 1.0 / alpha); };
  // psi(theta) = log(1 + E_Y sum_j alpha (theta Y_j)^{-alpha}
  //                                       gamma(alpha, theta Y_j)),
  // the X1-integral done in closed form per direction atom.  E_Y is exact
  // for the finite-support directional laws; a genuinely random sampler
  // falls back to a fixed-stream Monte Carlo average so psi stays a pure
  // function of theta.
  spec.psi = [alpha, dir](double theta) {
    if (theta <= 0.0) {
      throw std::invalid_argument("psi: theta must be positive");
    }
    const auto term = [alpha, theta](const CountingMeasure& y) {
      double s = 0.0;
      for (double atom : y.atoms()) {
        const double ty = theta * atom;
        s += alpha * std::pow(ty, -alpha) * lower_incomplete_gamma(alpha, ty);
      }
      return s;
    };
    RngStream aux(0x9D3C5A1Bu);
    return std::log1p(dir.expectation(term, 1u << 16, aux));
  };
  {
    RngStream aux(0x51C0FFEEu);
    spec.mean_total =
        1.0 + dir.expectation(
                  [](const CountingMeasure& y) {
                    return static_cast<double>(y.size());
                  },
                  1u << 16, aux);
  }
  return OffspringLaw(std::move(spec));
}

double compute_a_n(const OffspringLaw& law, std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("compute_a_n: n must be >= 1");
  const double target = 1.0 / static_cast<double>(n);
  if (law.has_f1_inverse()) {
    const double a = law.f1_inverse(target);
    if (!std::isfinite(a) || a <= 0.0) {
      throw NumericError("compute_a_n: closed-form inverse failed");
    }
    return a;
  }
  // Bisection on the monotone CDF.
  double lo = 0.0, hi = 1.0;
  if (law.f1(hi) < target) {
    throw NumericError("compute_a_n: F1 never reaches 1/n on (0, 1]");
  }
  for (int i = 0; i < 2000; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (law.f1(mid) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-18) break;
  }
  const double a = 0.5 * (lo + hi);
  if (std::fabs(static_cast<double>(n) * law.f1(a) - 1.0) > 1e-6) {
    throw NumericError("compute_a_n: F1 not invertible near 1/n");
  }
  return a;
}

ScalingSequence scaling_sequence(const OffspringLaw& law) {
  return ScalingSequence{
      [&law](std::uint64_t n) { return compute_a_n(law, n); }};
}

CountingMeasure conditional_rescaled_sample(const OffspringLaw& law, double t,
                                            RngStream& rng, double f1_floor) {
  if (!(t > 0.0) || t > 1.0) {
    throw std::invalid_argument("conditional sample: t must lie in (0, 1]");
  }
  const double p = law.f1(t);
  if (p < f1_floor) {
    throw NumericError(
        "conditional sample: F1(t) below the rejection-sampling floor");
  }
  const std::size_t max_tries =
      static_cast<std::size_t>(200.0 / p) + 1000;
  for (std::size_t tries = 0; tries < max_tries; ++tries) {
    const CountingMeasure z = law.sample(rng);
    // First positive atom; samples carry their origin atom in front.
    std::size_t first = 0;
    while (first < z.size() && z.atoms()[first] == 0.0) ++first;
    if (first >= z.size()) continue;  // no positive atom: X1 = infinity
    if (z.atoms()[first] > t) continue;
    std::vector<double> rescaled(z.atoms().begin() + first, z.atoms().end());
    for (double& a : rescaled) a /= t;
    return CountingMeasure::from_sorted(std::move(rescaled));
  }
  throw NumericError("conditional sample: rejection budget exhausted");
}

C3Report check_c3(const OffspringLaw& law, std::uint64_t N,
                  double growth_threshold) {
  if (N == 0) throw std::invalid_argument("check_c3: N must be >= 1");
  C3Report report;
  const std::uint64_t decade_start = std::max<std::uint64_t>(1, N / 10);
  double decade_min = 0.0, decade_max = 0.0;
  bool monotone_tail = true;
  double prev_tail = -1.0;
  std::uint64_t next_grid = 1;
  for (std::uint64_t n = 1; n <= N; ++n) {
    const double a_n = compute_a_n(law, n);
    const double value = static_cast<double>(n) * law.psi(1.0 / a_n);
    report.max_value = std::max(report.max_value, value);
    if (n == next_grid || n == N) {
      report.trend.emplace_back(n, value);
      next_grid = next_grid * 2;
    }
    if (n >= decade_start) {
      if (prev_tail < 0.0) {
        decade_min = decade_max = value;
      } else {
        if (value < prev_tail) monotone_tail = false;
        decade_min = std::min(decade_min, value);
        decade_max = std::max(decade_max, value);
      }
      prev_tail = value;
    }
  }
  report.divergence_flag =
      monotone_tail && decade_max > decade_min * growth_threshold;
  return report;
}

IndependenceReport check_independence_vy(const OffspringLaw& law, double t,
                                         std::size_t n_samples,
                                         RngStream& rng) {
  IndependenceReport report;
  std::vector<double> v_hat(n_samples);
  std::vector<double> shape(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    const CountingMeasure m = conditional_rescaled_sample(law, t, rng);
    const double first = m.atoms().front();
    v_hat[i] = std::pow(first, law.alpha());
    double count = 0.0;
    for (double a : m.atoms()) {
      if (a <= 2.0 * first) count += 1.0;
    }
    shape[i] = count;
  }

  std::vector<double> distinct(shape);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 2) {
    report.applicable = false;
    report.note = "shape statistic is constant";
    return report;
  }

  // Columns: up to 4 bins of the shape statistic by value (it is integer
  // valued and bounded for the built-in families).
  const std::size_t cols = std::min<std::size_t>(4, distinct.size());
  std::vector<double> col_edges;  // shape <= edge -> that column
  if (distinct.size() <= 4) {
    col_edges = distinct;
  } else {
    for (std::size_t c = 1; c <= cols; ++c) {
      col_edges.push_back(
          distinct[distinct.size() * c / cols - 1]);
    }
  }

  const std::size_t rows = 4;  // V-hat is uniform by construction
  std::vector<std::vector<double>> table(rows, std::vector<double>(cols, 0.0));
  for (std::size_t i = 0; i < n_samples; ++i) {
    std::size_t r = static_cast<std::size_t>(v_hat[i] * rows);
    r = std::min(r, rows - 1);
    std::size_t c = static_cast<std::size_t>(
        std::lower_bound(col_edges.begin(), col_edges.end(), shape[i]) -
        col_edges.begin());
    c = std::min(c, cols - 1);
    table[r][c] += 1.0;
  }

  std::vector<double> row_sum(rows, 0.0), col_sum(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      row_sum[r] += table[r][c];
      col_sum[c] += table[r][c];
    }
  }
  double chi2 = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double expected =
          row_sum[r] * col_sum[c] / static_cast<double>(n_samples);
      if (expected > 0.0) {
        const double d = table[r][c] - expected;
        chi2 += d * d / expected;
      }
    }
  }
  report.applicable = true;
  report.chi_square = chi2;
  report.degrees_of_freedom = static_cast<int>((rows - 1) * (cols - 1));
  report.p_value = chi_square_sf(chi2, report.degrees_of_freedom);
  return report;
}

}  // namespace branchsim
