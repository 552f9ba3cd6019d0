#include "branchsim/measures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace branchsim {

namespace {

void validate_atoms(const std::vector<double>& atoms) {
  for (double a : atoms) {
    if (!std::isfinite(a)) {
      throw std::invalid_argument("counting measure: atom must be finite");
    }
    if (a < 0.0) {
      throw std::invalid_argument("counting measure: atom must be >= 0");
    }
  }
}

}  // namespace

CountingMeasure::CountingMeasure(std::vector<double> atoms)
    : atoms_(std::move(atoms)) {
  validate_atoms(atoms_);
  std::sort(atoms_.begin(), atoms_.end());
}

CountingMeasure CountingMeasure::delta(double location) {
  return CountingMeasure(std::vector<double>{location});
}

CountingMeasure CountingMeasure::from_sorted(std::vector<double> atoms) {
  CountingMeasure m;
  m.atoms_ = std::move(atoms);
  return m;
}

bool satisfies(const CountingMeasure& m, MeasureSpace space) {
  switch (space) {
    case MeasureSpace::finite:
    case MeasureSpace::r_finite:
      return true;
    case MeasureSpace::star:
      return !m.empty() && m.atoms().front() > 0.0;
    case MeasureSpace::one:
      return !m.empty() && m.atoms().front() == 1.0;
  }
  return false;
}

WeightedMeasure::WeightedMeasure(std::vector<double> locations,
                                 std::vector<double> weights)
    : locations_(std::move(locations)), weights_(std::move(weights)) {
  if (locations_.size() != weights_.size()) {
    throw std::invalid_argument("weighted measure: size mismatch");
  }
  for (double w : weights_) {
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("weighted measure: weights must be positive");
    }
  }
  if (!std::is_sorted(locations_.begin(), locations_.end())) {
    std::vector<std::size_t> idx(locations_.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return locations_[a] < locations_[b];
    });
    std::vector<double> locs(locations_.size()), ws(weights_.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      locs[i] = locations_[idx[i]];
      ws[i] = weights_[idx[i]];
    }
    locations_ = std::move(locs);
    weights_ = std::move(ws);
  }
}

double WeightedMeasure::total_mass() const {
  double s = 0.0;
  for (double w : weights_) s += w;
  return s;
}

WeightedMeasure exponentially_weighted(const CountingMeasure& m, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("weight exponent r must be > 0");
  std::vector<double> w(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) w[i] = std::exp(-r * m.atoms()[i]);
  return WeightedMeasure(m.atoms(), std::move(w));
}

CountingMeasure dilate(const CountingMeasure& m, double c) {
  if (!(c > 0.0)) throw std::invalid_argument("dilate: factor must be > 0");
  std::vector<double> atoms(m.atoms());
  for (double& a : atoms) a *= c;
  return CountingMeasure::from_sorted(std::move(atoms));
}

CountingMeasure translate(const CountingMeasure& m, double y) {
  if (y < 0.0) {
    throw std::invalid_argument("translate: shift must be >= 0 on the half-line");
  }
  std::vector<double> atoms(m.atoms());
  for (double& a : atoms) a += y;
  return CountingMeasure::from_sorted(std::move(atoms));
}

CountingMeasure superpose(const std::vector<CountingMeasure>& ms) {
  std::size_t total = 0;
  for (const auto& m : ms) total += m.size();
  std::vector<double> atoms;
  atoms.reserve(total);
  for (const auto& m : ms) {
    atoms.insert(atoms.end(), m.atoms().begin(), m.atoms().end());
  }
  std::sort(atoms.begin(), atoms.end());
  return CountingMeasure::from_sorted(std::move(atoms));
}

CountingMeasure superpose(const CountingMeasure& a, const CountingMeasure& b) {
  std::vector<double> atoms;
  atoms.reserve(a.size() + b.size());
  std::merge(a.atoms().begin(), a.atoms().end(), b.atoms().begin(),
             b.atoms().end(), std::back_inserter(atoms));
  return CountingMeasure::from_sorted(std::move(atoms));
}

CountingMeasure cutoff(const CountingMeasure& m, double b) {
  if (!(b > 0.0)) throw std::invalid_argument("cutoff: threshold must be > 0");
  // Closed interval [0, b]: the boundary atom stays.
  auto it = std::upper_bound(m.atoms().begin(), m.atoms().end(), b);
  return CountingMeasure::from_sorted(
      std::vector<double>(m.atoms().begin(), it));
}

PolarForm polar_decompose(const CountingMeasure& x) {
  if (x.empty()) {
    throw std::domain_error("polar_decompose: undefined for the zero measure");
  }
  if (x.atoms().front() == 0.0) {
    throw std::domain_error("polar_decompose: undefined with an atom at 0");
  }
  const double r = x.atoms().front();
  // Divide rather than multiply by 1/r: r/r is exactly 1, so the direction
  // lands exactly in M^1.
  std::vector<double> atoms(x.atoms());
  for (double& a : atoms) a /= r;
  return PolarForm{r, CountingMeasure::from_sorted(std::move(atoms))};
}

double laplace_functional(const CountingMeasure& m, double theta) {
  if (!(theta > 0.0)) {
    throw std::invalid_argument("laplace_functional: theta must be > 0");
  }
  double s = 0.0;
  // Summing from the right adds the small terms first.
  for (auto it = m.atoms().rbegin(); it != m.atoms().rend(); ++it) {
    s += std::exp(-theta * *it);
  }
  return s;
}

bool is_submultiset(const CountingMeasure& sub, const CountingMeasure& super) {
  std::size_t i = 0;
  for (double a : sub.atoms()) {
    while (i < super.size() && super.atoms()[i] < a) ++i;
    if (i == super.size() || super.atoms()[i] != a) return false;
    ++i;
  }
  return true;
}

CountingMeasure multiset_difference(const CountingMeasure& super,
                                    const CountingMeasure& sub) {
  std::vector<double> out;
  out.reserve(super.size() - std::min(super.size(), sub.size()));
  std::size_t i = 0;
  for (double a : super.atoms()) {
    if (i < sub.size() && sub.atoms()[i] == a) {
      ++i;
      continue;
    }
    if (i < sub.size() && sub.atoms()[i] < a) {
      throw std::domain_error("multiset_difference: not a sub-multiset");
    }
    out.push_back(a);
  }
  if (i != sub.size()) {
    throw std::domain_error("multiset_difference: not a sub-multiset");
  }
  return CountingMeasure::from_sorted(std::move(out));
}

// --- Levy-Prokhorov ----------------------------------------------------------

namespace {

// Prefix sums over a sorted weighted measure for O(log) ball masses.  All
// membership predicates compare atom-location differences against eps, the
// same arithmetic that produced the breakpoint values, so an atom exactly at
// distance eps is covered regardless of rounding in p +/- eps.
struct PrefixMass {
  const std::vector<double>& loc;
  std::vector<double> cum;  // cum[i] = weight of first i atoms

  explicit PrefixMass(const WeightedMeasure& m) : loc(m.locations()) {
    cum.resize(loc.size() + 1, 0.0);
    for (std::size_t i = 0; i < loc.size(); ++i) {
      cum[i + 1] = cum[i] + m.weights()[i];
    }
  }

  // index of the first atom with q - center > eps
  std::size_t first_beyond(double center, double eps) const {
    return static_cast<std::size_t>(
        std::partition_point(loc.begin(), loc.end(),
                             [&](double q) { return q - center <= eps; }) -
        loc.begin());
  }

  // index of the first atom with center - q <= eps
  std::size_t first_within(double center, double eps) const {
    return static_cast<std::size_t>(
        std::partition_point(loc.begin(), loc.end(),
                             [&](double q) { return center - q > eps; }) -
        loc.begin());
  }

  // mass of the closed ball {q : |q - center| <= eps}
  double ball(double center, double eps) const {
    const std::size_t lo = first_within(center, eps);
    const std::size_t hi = first_beyond(center, eps);
    return hi > lo ? cum[hi] - cum[lo] : 0.0;
  }

  // mass newly covered by ball(right) given ball(left) is already covered,
  // for overlapping balls: {q : q - left > eps and q - right <= eps}
  double ball_increment(double left, double right, double eps) const {
    const std::size_t lo = first_beyond(left, eps);
    const std::size_t hi = first_beyond(right, eps);
    return hi > lo ? cum[hi] - cum[lo] : 0.0;
  }
};

// max over subsets S of mu-atoms of [mu(S) - nu(S^eps)], with S^eps the union
// of closed eps-balls around the selected atoms.  dp[j] is the best value of
// a selection whose right-most atom is j; transitions either merge with a
// previous selected atom whose ball overlaps (counting only the newly covered
// nu-mass) or start a fresh ball.
double max_violation(const WeightedMeasure& mu, const PrefixMass& nu,
                     double eps) {
  const auto& p = mu.locations();
  const auto& u = mu.weights();
  const std::size_t k = p.size();
  double best = 0.0;
  std::vector<double> dp(k);
  double best_disjoint = 0.0;  // max(0, dp[i]) over i with p[j] - p[i] > 2eps
  std::size_t next_disjoint = 0;
  for (std::size_t j = 0; j < k; ++j) {
    while (next_disjoint < j && p[j] - p[next_disjoint] > 2.0 * eps) {
      best_disjoint = std::max(best_disjoint, dp[next_disjoint]);
      ++next_disjoint;
    }
    double val = u[j] + best_disjoint - nu.ball(p[j], eps);
    for (std::size_t i = next_disjoint; i < j; ++i) {
      val = std::max(val, dp[i] + u[j] - nu.ball_increment(p[i], p[j], eps));
    }
    dp[j] = val;
    best = std::max(best, val);
  }
  return best;
}

}  // namespace

double levy_prokhorov(const WeightedMeasure& mu, const WeightedMeasure& nu) {
  if (mu.empty() && nu.empty()) return 0.0;

  const PrefixMass mu_prefix(mu);
  const PrefixMass nu_prefix(nu);
  const auto worst = [&](double eps) {
    return std::max(max_violation(mu, nu_prefix, eps),
                    max_violation(nu, mu_prefix, eps));
  };
  // Slack absorbing summation-order noise at structurally tight constraints
  // (the optimum makes some inequality an exact equality by construction).
  const double tie_slack =
      1e-12 * (1.0 + mu.total_mass() + nu.total_mass());

  // Breakpoints: the pairwise cross distances, where coverage changes.
  std::vector<double> breaks;
  breaks.reserve(mu.size() * nu.size() + 1);
  breaks.push_back(0.0);
  for (double a : mu.locations()) {
    for (double b : nu.locations()) breaks.push_back(std::fabs(a - b));
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

  // Feasibility of eps is monotone, and the one-sided worst violation is
  // constant between consecutive breakpoints; bisect for the first feasible
  // breakpoint, then refine with the mass-gap candidate inside the interval
  // just below it.
  const auto feasible = [&](double eps) { return worst(eps) <= eps + tie_slack; };

  if (feasible(breaks.front())) return breaks.front();
  if (!feasible(breaks.back())) {
    return worst(breaks.back());  // > last breakpoint, hence feasible there
  }
  std::size_t lo = 0, hi = breaks.size() - 1;  // infeasible at lo, feasible at hi
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (feasible(breaks[mid])) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return std::min(breaks[hi], worst(breaks[lo]));
}

double d_r(const CountingMeasure& x, const CountingMeasure& y, double r) {
  return levy_prokhorov(exponentially_weighted(x, r),
                        exponentially_weighted(y, r));
}

// --- serialization -----------------------------------------------------------

std::string to_json_array(const CountingMeasure& m) {
  nlohmann::json j = m.atoms();
  return j.dump();
}

CountingMeasure measure_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (!j.is_array()) {
    throw std::invalid_argument("measure JSON must be an array of numbers");
  }
  std::vector<double> atoms;
  atoms.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) {
      throw std::invalid_argument("measure JSON must contain only numbers");
    }
    atoms.push_back(v.get<double>());
  }
  return CountingMeasure(std::move(atoms));
}

void append_csv_rows(std::ostream& out, std::uint64_t replica_id, double time,
                     const CountingMeasure& m) {
  char buf[64];
  for (double a : m.atoms()) {
    std::snprintf(buf, sizeof(buf), "%.17g", time);
    out << replica_id << ',' << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", a);
    out << buf << '\n';
  }
}

}  // namespace branchsim
