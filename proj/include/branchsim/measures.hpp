#ifndef BRANCHSIM_MEASURES_HPP
#define BRANCHSIM_MEASURES_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace branchsim {

/// Finite counting measure on the half-line [0, inf): an immutable sorted
/// multiset of atom locations.  Duplicates are genuine multiplicities.  This
/// is the universal state object of the toolkit: branching-walk generations,
/// continuous-time particle configurations and offspring clusters are all
/// values of this type.  Membership in the various subspaces (non-zero with
/// no atom at the origin, left-most atom at one, ...) is checked by
/// predicates, not encoded in the type.
class CountingMeasure {
 public:
  CountingMeasure() = default;

  /// Sorts and validates: every location must be finite and >= 0.
  explicit CountingMeasure(std::vector<double> atoms);

  static CountingMeasure delta(double location);

  /// Trusted constructor for hot paths; `atoms` must already be sorted.
  static CountingMeasure from_sorted(std::vector<double> atoms);

  const std::vector<double>& atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }
  bool empty() const { return atoms_.empty(); }
  /// Total mass equals the number of stored atoms.
  double mass() const { return static_cast<double>(atoms_.size()); }

  bool operator==(const CountingMeasure& other) const {
    return atoms_ == other.atoms_;
  }

 private:
  std::vector<double> atoms_;
};

/// Subspaces of counting measures used throughout.
enum class MeasureSpace {
  finite,    // finite counting measures (always true for in-memory values)
  star,      // non-zero, no atom at the origin
  one,       // star, and left-most atom exactly 1
  r_finite,  // <x, e^{-r .}> finite (always true for in-memory values)
};

bool satisfies(const CountingMeasure& m, MeasureSpace space);

/// Finite purely atomic measure with positive weights, sorted by location.
/// The e^{-r .}-weighted image of a counting measure lives here.
class WeightedMeasure {
 public:
  WeightedMeasure() = default;
  WeightedMeasure(std::vector<double> locations, std::vector<double> weights);

  const std::vector<double>& locations() const { return locations_; }
  const std::vector<double>& weights() const { return weights_; }
  std::size_t size() const { return locations_.size(); }
  bool empty() const { return locations_.empty(); }
  double total_mass() const;

 private:
  std::vector<double> locations_;
  std::vector<double> weights_;
};

/// Weighted image of `m` with atom weights e^{-r * location}.
WeightedMeasure exponentially_weighted(const CountingMeasure& m, double r);

// --- elementwise transformations ------------------------------------------

/// Dilation c*m: every atom location multiplied by c > 0.
CountingMeasure dilate(const CountingMeasure& m, double c);

/// Translation y+m: every atom shifted right by y >= 0.
CountingMeasure translate(const CountingMeasure& m, double y);

/// Multiset union of atoms.
CountingMeasure superpose(const std::vector<CountingMeasure>& ms);
CountingMeasure superpose(const CountingMeasure& a, const CountingMeasure& b);

/// Restriction to [0, b]; atoms exactly at b are kept.
CountingMeasure cutoff(const CountingMeasure& m, double b);

struct PolarForm {
  double radius;              // left-most atom
  CountingMeasure direction;  // dilated so its left-most atom is exactly 1
};

/// Polar representation x = r*y with r = x_1 and y_1 = 1.  Defined only for
/// non-zero measures with no atom at the origin.
PolarForm polar_decompose(const CountingMeasure& x);

/// <m, e^{-theta .}> = sum_j exp(-theta x_j), theta > 0.
double laplace_functional(const CountingMeasure& m, double theta);

/// True when `sub` is an atomwise sub-multiset of `super` (exact locations).
bool is_submultiset(const CountingMeasure& sub, const CountingMeasure& super);

/// Multiset difference super - sub; requires is_submultiset(sub, super).
CountingMeasure multiset_difference(const CountingMeasure& super,
                                    const CountingMeasure& sub);

// --- metrics ----------------------------------------------------------------

/// Levy-Prokhorov distance between two finite atomic measures on the line,
/// inf{eps > 0 : mu(A) <= nu(A^eps) + eps and nu(A) <= mu(A^eps) + eps for
/// all closed A}, computed exactly.  The supremum over closed sets is
/// attained on finite unions of atoms of the left measure; the one-sided
/// worst violation for a fixed eps is computed by an O(k^2) dynamic program
/// over the sorted atoms that merges overlapping eps-intervals, and eps is
/// located by bisection over the breakpoint set of pairwise atom distances,
/// refined with the exact mass-gap candidate inside the final interval.
double levy_prokhorov(const WeightedMeasure& mu, const WeightedMeasure& nu);

/// d_r(x, y): Levy-Prokhorov distance between the e^{-r .}-weighted images.
/// For nested x >= y it is bounded by <x - y, e^{-r .}>.
double d_r(const CountingMeasure& x, const CountingMeasure& y, double r);

// --- serialization ----------------------------------------------------------

/// JSON array of sorted atom locations, e.g. "[0,0.5,2]".
std::string to_json_array(const CountingMeasure& m);

/// Parses a JSON array of numbers (sorted on load).
CountingMeasure measure_from_json(const std::string& text);

/// Appends rows "replica_id,time,location" for every atom of `m`.
void append_csv_rows(std::ostream& out, std::uint64_t replica_id, double time,
                     const CountingMeasure& m);

}  // namespace branchsim

#endif  // BRANCHSIM_MEASURES_HPP
