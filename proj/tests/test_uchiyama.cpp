#include <doctest.h>

#include <cmath>

#include "branchsim/errors.hpp"
#include "branchsim/experiments.hpp"
#include "branchsim/uchiyama.hpp"

using namespace branchsim;

TEST_CASE("a single child at the parent's spot makes the dynamics invisible") {
  const ReproductionMeasure rm = fixed_cluster_reproduction(2.0, {0.0});
  RngStream rng(1);
  const CountingMeasure init({0.0, 1.5, 3.0});
  CHECK(simulate(init, rm, 5.0, rng) == init);
}

TEST_CASE("empty offspring clusters are refused") {
  ReproductionMeasure rm;
  rm.rate = 1.0;
  rm.offspring = [](RngStream&) { return CountingMeasure(); };
  RngStream rng(2);
  CHECK_THROWS_AS(simulate(CountingMeasure::delta(0.0), rm, 1.0, rng),
                  std::domain_error);
  CHECK_THROWS_AS(fixed_cluster_reproduction(1.0, {}), std::invalid_argument);
}

TEST_CASE("pure-birth growth matches both mean oracles") {
  const ReproductionMeasure rm = fixed_cluster_reproduction(1.0, {0.0, 1.0});
  CHECK(mean_count_oracle(rm, 0.0) == 1.0);
  CHECK(mean_count_oracle(rm, 1.0) == doctest::Approx(M_E).epsilon(1e-12));
  // phi_Pi(1) = 1 + e^{-1}
  CHECK(mean_laplace_oracle(rm, 1.0, 1.0) ==
        doctest::Approx(std::exp(std::exp(-1.0))).epsilon(1e-12));
  CHECK(mean_laplace_oracle(rm, 1.0, 1.0) ==
        doctest::Approx(1.444668).epsilon(1e-6));
  CHECK(mean_laplace_oracle(rm, 1.0, 0.0) == 1.0);
  // theta -> infinity degenerates to the count of origin atoms.
  CHECK(mean_laplace_oracle(rm, 1e8, 1.0) == doctest::Approx(1.0).epsilon(1e-9));

  const std::size_t replicas = 30'000;
  std::vector<double> mass(replicas), lap(replicas);
  for (std::size_t i = 0; i < replicas; ++i) {
    RngStream rng = RngStream::from_path(55, {i});
    const CountingMeasure u = simulate(CountingMeasure::delta(0.0), rm, 1.0, rng);
    mass[i] = u.mass();
    lap[i] = laplace_functional(u, 1.0);
  }
  const MeanSE m = mean_and_se(mass);
  CHECK(std::fabs(m.mean - M_E) <= 3.0 * m.se);
  const MeanSE l = mean_and_se(lap);
  CHECK(std::fabs(l.mean - std::exp(std::exp(-1.0))) <= 3.0 * l.se);
}

TEST_CASE("conservative cluster keeps the mean flat") {
  // One child per death, displaced: mbar = 1.
  const ReproductionMeasure rm = fixed_cluster_reproduction(3.0, {0.5});
  CHECK(mean_count_oracle(rm, 2.0) == 1.0);
  RngStream rng(4);
  const CountingMeasure u = simulate(CountingMeasure::delta(0.0), rm, 2.0, rng);
  CHECK(u.size() == 1);
}

TEST_CASE("mass never decreases and the event log is time-ordered") {
  const ReproductionMeasure rm = fixed_cluster_reproduction(1.0, {0.0, 0.3});
  RngStream rng(5);
  EventLog log;
  const CountingMeasure u =
      simulate(CountingMeasure::delta(0.0), rm, 3.0, rng, {}, &log);
  CHECK(u.size() == log.size() + 1);  // each event adds exactly one particle
  // Mass along the path: nonempty clusters make every event net >= 0, so the
  // state at any earlier horizon is no heavier.
  for (double horizon : {0.5, 1.0, 2.0}) {
    RngStream replay(5);
    CHECK(simulate(CountingMeasure::delta(0.0), rm, horizon, replay).size() <=
          u.size());
  }
  double prev = 0.0;
  for (const EventRecord& e : log) {
    CHECK(e.time > prev);
    prev = e.time;
    REQUIRE(e.child_positions.size() == 2);
    CHECK(e.child_positions[0] == e.parent_position);
    CHECK(e.child_positions[1] ==
          doctest::Approx(e.parent_position + 0.3).epsilon(1e-15));
  }
}

TEST_CASE("branching property: two-particle start equals two translated runs") {
  const ReproductionMeasure rm = fixed_cluster_reproduction(1.0, {0.0, 1.0});
  const std::size_t replicas = 4000;
  const double x1 = 0.25, x2 = 1.5;
  std::vector<double> joint(replicas), split(replicas);
  for (std::size_t i = 0; i < replicas; ++i) {
    RngStream rng = RngStream::from_path(66, {i, 0});
    joint[i] = laplace_functional(
        simulate(CountingMeasure({x1, x2}), rm, 1.0, rng), 1.0);
    RngStream ra = RngStream::from_path(66, {i, 1});
    RngStream rb = RngStream::from_path(66, {i, 2});
    const CountingMeasure ua =
        translate(simulate(CountingMeasure::delta(0.0), rm, 1.0, ra), x1);
    const CountingMeasure ub =
        translate(simulate(CountingMeasure::delta(0.0), rm, 1.0, rb), x2);
    split[i] = laplace_functional(superpose(ua, ub), 1.0);
  }
  CHECK(ks_two_sample(joint, split).p_value > 0.01);
}

TEST_CASE("explosion guard reports the time reached") {
  const ReproductionMeasure rm = fixed_cluster_reproduction(5.0, {0.0, 0.1});
  RngStream rng(7);
  SimLimits limits{50};
  try {
    simulate(CountingMeasure::delta(0.0), rm, 100.0, rng, limits);
    FAIL("expected ExplosionError");
  } catch (const ExplosionError& e) {
    CHECK(e.time_reached() > 0.0);
    CHECK(e.time_reached() < 100.0);
    CHECK(e.partial_atoms().size() > 50);
  }
}

TEST_CASE("monte-carlo cluster transform refuses wide confidence intervals") {
  ReproductionMeasure rm;
  rm.rate = 1.0;
  // High-variance cluster size, no closed form attached.
  rm.offspring = [](RngStream& rng) {
    std::vector<double> atoms{0.0};
    if (rng.uniform01() < 0.05) {
      for (int i = 0; i < 40; ++i) atoms.push_back(0.01 * (i + 1));
    }
    return CountingMeasure::from_sorted(std::move(atoms));
  };
  RngStream rng(8);
  CHECK_THROWS_AS(mean_laplace_oracle(rm, 1.0, 1.0, &rng, 200), NumericError);
  // And with no rng at all it cannot proceed.
  CHECK_THROWS_AS(mean_laplace_oracle(rm, 1.0, 1.0), NumericError);
}

TEST_CASE("generator formula") {
  const ReproductionMeasure rm = fixed_cluster_reproduction(1.0, {0.0, 1.0});
  const CountingMeasure x = CountingMeasure::delta(0.0);
  RngStream rng(9);
  SUBCASE("constants are annihilated") {
    const auto one = [](const CountingMeasure&) { return 1.0; };
    CHECK(generator_apply(rm, x, one, 1000, rng) == doctest::Approx(0.0));
    CHECK(generator_residual(rm, x, one, 0.01, 1000, rng) ==
          doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("capped mass at the origin configuration") {
    const auto capped = [](const CountingMeasure& m) {
      return std::min(m.mass(), 5.0);
    };
    // A phi(delta_0) = phi(delta_0 + delta_1) - phi(delta_0) = 1 exactly.
    CHECK(generator_apply(rm, x, capped, 100, rng) ==
          doctest::Approx(1.0).epsilon(1e-12));
    const double res = generator_residual(rm, x, capped, 0.01, 200'000, rng);
    CHECK(res < 1e-3);
  }
  SUBCASE("residual decays at second order in t") {
    const auto capped = [](const CountingMeasure& m) {
      return std::min(m.mass(), 5.0);
    };
    RngStream r1(10), r2(11);
    const double res2 = generator_residual(rm, x, capped, 0.02, 2'000'000, r1);
    const double res1 = generator_residual(rm, x, capped, 0.01, 2'000'000, r2);
    CHECK(res2 / res1 > 3.0);
    CHECK(res2 / res1 < 5.0);
  }
  SUBCASE("t outside the small-time regime is rejected") {
    const auto one = [](const CountingMeasure&) { return 1.0; };
    CHECK_THROWS_AS(generator_residual(rm, x, one, 0.2, 1000, rng),
                    std::invalid_argument);
  }
}
