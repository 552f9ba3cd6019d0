#include <doctest.h>

#include <cmath>
#include <sstream>

#include "branchsim/measures.hpp"
#include "branchsim/rng.hpp"
#include "lp_bruteforce.hpp"

using namespace branchsim;

namespace {

CountingMeasure cm(std::vector<double> atoms) {
  return CountingMeasure(std::move(atoms));
}

WeightedMeasure random_weighted(RngStream& rng, std::size_t max_atoms) {
  const std::size_t k = rng.uniform_below(max_atoms + 1);
  std::vector<double> loc(k), w(k);
  for (std::size_t i = 0; i < k; ++i) {
    loc[i] = 3.0 * rng.uniform01();
    w[i] = 0.05 + rng.uniform01();
  }
  return WeightedMeasure(std::move(loc), std::move(w));
}

}  // namespace

TEST_CASE("dilate scales atom locations") {
  CHECK(dilate(cm({0, 1, 2}), 2.0) == cm({0, 2, 4}));
  const CountingMeasure m = cm({0.25, 1.5});
  CHECK(dilate(m, 1.0) == m);
  CHECK(dilate(cm({}), 5.0) == cm({}));
  CHECK(dilate(m, 2.0).size() == m.size());
  CHECK_THROWS_AS(dilate(m, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(dilate(m, -1.0), std::invalid_argument);
}

TEST_CASE("dilation composes multiplicatively") {
  RngStream rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> atoms(5);
    for (double& a : atoms) a = 10.0 * rng.uniform01();
    const double c1 = 0.1 + 3.0 * rng.uniform01();
    const double c2 = 0.1 + 3.0 * rng.uniform01();
    const CountingMeasure m = cm(atoms);
    const CountingMeasure lhs = dilate(dilate(m, c1), c2);
    const CountingMeasure rhs = dilate(m, c1 * c2);
    for (std::size_t i = 0; i < m.size(); ++i) {
      CHECK(lhs.atoms()[i] ==
            doctest::Approx(rhs.atoms()[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("translate shifts atoms right") {
  CHECK(translate(cm({0, 1}), 3.0) == cm({3, 4}));
  CHECK(translate(CountingMeasure::delta(0.0), 1.75) ==
        CountingMeasure::delta(1.75));
  CHECK(translate(cm({}), 2.0) == cm({}));
  CHECK_THROWS_AS(translate(cm({1}), -0.5), std::invalid_argument);
}

TEST_CASE("superpose is a multiset union") {
  CHECK(superpose({cm({0, 1}), cm({1, 2})}) == cm({0, 1, 1, 2}));
  const CountingMeasure m = cm({0.5, 2});
  CHECK(superpose({m, cm({})}) == m);
  CHECK(superpose({CountingMeasure::delta(0.0), CountingMeasure::delta(0.0)}) ==
        cm({0, 0}));
  CHECK(superpose(cm({3}), cm({1})) == cm({1, 3}));
}

TEST_CASE("cutoff keeps the closed interval") {
  CHECK(cutoff(cm({0, 0.5, 2}), 1.0) == cm({0, 0.5}));
  CHECK(cutoff(cm({0, 1}), 1.0) == cm({0, 1}));  // boundary atom kept
  CHECK(cutoff(cm({2, 3}), 1.0) == cm({}));      // empty iff first atom > b
  CHECK_THROWS_AS(cutoff(cm({1}), 0.0), std::invalid_argument);
}

TEST_CASE("cutoff commutes with dilation") {
  RngStream rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> atoms(6);
    for (double& a : atoms) a = 2.0 * rng.uniform01();
    const double c = 0.25 + 2.0 * rng.uniform01();
    const double b = 0.5 + rng.uniform01();
    const CountingMeasure m = cm(atoms);
    CHECK(cutoff(dilate(m, c), c * b) == dilate(cutoff(m, b), c));
  }
}

TEST_CASE("polar decomposition divides by the left-most atom") {
  const PolarForm p = polar_decompose(cm({2, 4, 6}));
  CHECK(p.radius == 2.0);
  CHECK(p.direction == cm({1, 2, 3}));

  const PolarForm q = polar_decompose(cm({1}));
  CHECK(q.radius == 1.0);
  CHECK(q.direction == cm({1}));

  CHECK_THROWS_AS(polar_decompose(cm({0, 1})), std::domain_error);
  CHECK_THROWS_AS(polar_decompose(cm({})), std::domain_error);
}

TEST_CASE("polar decomposition round-trips") {
  RngStream rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> atoms(4);
    for (double& a : atoms) a = 0.01 + 5.0 * rng.uniform01();
    const CountingMeasure m = cm(atoms);
    const PolarForm p = polar_decompose(m);
    CHECK(satisfies(p.direction, MeasureSpace::one));
    const CountingMeasure back = dilate(p.direction, p.radius);
    for (std::size_t i = 0; i < m.size(); ++i) {
      CHECK(back.atoms()[i] ==
            doctest::Approx(m.atoms()[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("space predicates") {
  CHECK(satisfies(cm({}), MeasureSpace::finite));
  CHECK_FALSE(satisfies(cm({}), MeasureSpace::star));
  CHECK_FALSE(satisfies(cm({0, 1}), MeasureSpace::star));
  CHECK(satisfies(cm({0.5}), MeasureSpace::star));
  CHECK(satisfies(cm({1, 2}), MeasureSpace::one));
  CHECK_FALSE(satisfies(cm({1.0000001}), MeasureSpace::one));
  // M^1 is contained in M*.
  CHECK(satisfies(cm({1, 2}), MeasureSpace::star));
  CHECK(satisfies(cm({7}), MeasureSpace::r_finite));
}

TEST_CASE("laplace functional") {
  CHECK(laplace_functional(CountingMeasure::delta(0.0), 3.7) == 1.0);
  CHECK(laplace_functional(cm({0, 1}), 1.0) ==
        doctest::Approx(1.0 + std::exp(-1.0)).epsilon(1e-15));
  CHECK(laplace_functional(cm({0, 1}), 1.0) ==
        doctest::Approx(1.367879441).epsilon(1e-9));
  CHECK(laplace_functional(cm({}), 1.0) == 0.0);
  // Monotone non-increasing in theta.
  const CountingMeasure m = cm({0.1, 0.5, 2.0});
  double prev = laplace_functional(m, 0.25);
  for (double theta : {0.5, 1.0, 2.0, 4.0}) {
    const double cur = laplace_functional(m, theta);
    CHECK(cur <= prev);
    prev = cur;
  }
}

TEST_CASE("sub-multiset and difference") {
  CHECK(is_submultiset(cm({1, 2}), cm({0, 1, 2, 2})));
  CHECK_FALSE(is_submultiset(cm({1, 1}), cm({1, 2})));
  CHECK(multiset_difference(cm({0, 1, 2, 2}), cm({1, 2})) == cm({0, 2}));
  CHECK_THROWS_AS(multiset_difference(cm({1}), cm({2})), std::domain_error);
}

TEST_CASE("levy-prokhorov on simple pairs") {
  const WeightedMeasure d0({0.0}, {1.0});
  const WeightedMeasure d03({0.3}, {1.0});
  const WeightedMeasure zero;
  CHECK(levy_prokhorov(d0, d0) == 0.0);
  CHECK(levy_prokhorov(d0, d03) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(levy_prokhorov(d0, zero) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(levy_prokhorov(zero, d0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(levy_prokhorov(zero, zero) == 0.0);
}

TEST_CASE("levy-prokhorov agrees with subset brute force") {
  RngStream rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const WeightedMeasure mu = random_weighted(rng, 6);
    const WeightedMeasure nu = random_weighted(rng, 6);
    const double fast = levy_prokhorov(mu, nu);
    const double slow = branchsim_tests::lp_bruteforce(mu, nu);
    CHECK(fast == doctest::Approx(slow).epsilon(1e-12));
  }
}

TEST_CASE("levy-prokhorov metric axioms on random triples") {
  RngStream rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const WeightedMeasure a = random_weighted(rng, 5);
    const WeightedMeasure b = random_weighted(rng, 5);
    const WeightedMeasure c = random_weighted(rng, 5);
    const double ab = levy_prokhorov(a, b);
    const double ba = levy_prokhorov(b, a);
    const double ac = levy_prokhorov(a, c);
    const double cb = levy_prokhorov(c, b);
    CHECK(ab >= 0.0);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
    CHECK(ab <= ac + cb + 1e-12);
  }
}

TEST_CASE("d_r examples and the nested mass bound") {
  const CountingMeasure x = cm({0.0, std::log(2.0)});
  const CountingMeasure y = cm({0.0});
  CHECK(d_r(x, x, 1.0) == 0.0);
  // Weighted masses 1.5 vs 1: the total-mass gap forces eps >= 0.5 and 0.5
  // is feasible.
  CHECK(d_r(x, y, 1.0) == doctest::Approx(0.5).epsilon(1e-12));

  RngStream rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> sup(6), sub;
    for (double& a : sup) a = 4.0 * rng.uniform01();
    for (double a : sup) {
      if (rng.uniform01() < 0.5) sub.push_back(a);
    }
    const CountingMeasure big = cm(sup);
    const CountingMeasure small = cm(sub);
    const double r = 0.3 + 2.0 * rng.uniform01();
    const double bound =
        laplace_functional(multiset_difference(big, small), r);
    CHECK(d_r(big, small, r) <= bound + 1e-12);
  }
}

TEST_CASE("json round trip and csv rows") {
  const CountingMeasure m = cm({0, 0.5, 2});
  const std::string j = to_json_array(m);
  CHECK(j == "[0.0,0.5,2.0]");
  CHECK(measure_from_json(j) == m);
  CHECK(measure_from_json("[2, 0.5, 0]") == m);  // sorted on load
  CHECK_THROWS(measure_from_json("{\"a\":1}"));

  std::ostringstream out;
  append_csv_rows(out, 3, 0.5, cm({0, 1}));
  CHECK(out.str() == "3,0.5,0\n3,0.5,1\n");
}

TEST_CASE("counting measure validation") {
  CHECK_THROWS_AS(cm({-1.0}), std::invalid_argument);
  CHECK_THROWS_AS(cm({std::numeric_limits<double>::infinity()}),
                  std::invalid_argument);
  CHECK(cm({2, 1, 0}).atoms() == std::vector<double>{0, 1, 2});
}
