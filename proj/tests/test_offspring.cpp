#include <doctest.h>

#include <cmath>

#include "branchsim/errors.hpp"
#include "branchsim/experiments.hpp"
#include "branchsim/offspring.hpp"
#include "branchsim/specfun.hpp"
#include "quadrature.hpp"

using namespace branchsim;

namespace {

// Independent route for E e^{-theta X1} of the power family: substituting
// s = x^alpha removes the endpoint singularity, leaving
// int_0^1 exp(-theta s^{1/alpha}) ds.
double power_laplace_quadrature(double alpha, double theta) {
  return branchsim_tests::adaptive_simpson(
      [alpha, theta](double s) {
        return std::exp(-theta * std::pow(s, 1.0 / alpha));
      },
      0.0, 1.0, 1e-13);
}

OffspringLaw adversarial_law_shape_depends_on_x1() {
  // Cluster shape determined by the same uniform that drives X1; at t = 0.5
  // the conditional V-hat and the shape statistic are perfectly dependent.
  OffspringLaw::Spec spec;
  spec.alpha = 1.0;
  spec.family = "test-adversarial";
  spec.mean_total = 2.75;
  spec.sampler = [](RngStream& rng) {
    const double u = rng.uniform_pos();
    std::vector<double> atoms{0.0, u};
    if (u > 0.25) atoms.push_back(1.5 * u);
    return CountingMeasure::from_sorted(std::move(atoms));
  };
  spec.f1 = [](double t) { return t >= 1.0 ? 1.0 : std::max(t, 0.0); };
  spec.f1_inverse = [](double p) { return p; };
  spec.psi = [](double theta) { return std::log1p(2.0 * std::exp(-theta)); };
  return OffspringLaw(std::move(spec));
}

}  // namespace

TEST_CASE("two-atom family: exact descriptors") {
  const OffspringLaw law = two_atom_power_law(1.0);
  CHECK(law.f1(0.25) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(law.f1(2.0) == 1.0);
  CHECK(law.f1(-1.0) == 0.0);
  // psi(1) = log(1 + (1 - e^{-1}))
  CHECK(law.psi(1.0) ==
        doctest::Approx(std::log(2.0 - std::exp(-1.0))).epsilon(1e-14));
  CHECK(law.psi(1.0) == doctest::Approx(0.4898801).epsilon(1e-6));
  CHECK_THROWS_AS(two_atom_power_law(0.0), std::invalid_argument);
  CHECK_THROWS_AS(two_atom_power_law(-2.0), std::invalid_argument);
}

TEST_CASE("two-atom family: psi matches quadrature across alpha") {
  for (double alpha : {0.5, 1.0, 2.0, 3.5}) {
    const OffspringLaw law = two_atom_power_law(alpha);
    for (double theta : {0.3, 1.0, 2.7}) {
      const double expected =
          std::log1p(power_laplace_quadrature(alpha, theta));
      CHECK(law.psi(theta) == doctest::Approx(expected).epsilon(1e-9));
    }
  }
}

TEST_CASE("two-atom family: samples have one origin atom and one child") {
  const OffspringLaw law = two_atom_power_law(0.7);
  RngStream rng(31);
  for (int i = 0; i < 200; ++i) {
    const CountingMeasure m = law.sample(rng);
    REQUIRE(m.size() == 2);
    CHECK(m.atoms()[0] == 0.0);
    CHECK(m.atoms()[1] > 0.0);
    CHECK(m.atoms()[1] <= 1.0);
  }
}

TEST_CASE("empirical F1 stays inside the DKW band") {
  const std::size_t n = 20'000;
  const double band = std::sqrt(std::log(2.0 / 0.01) / (2.0 * n));
  for (double alpha : {0.5, 1.0, 2.0}) {
    const OffspringLaw law = two_atom_power_law(alpha);
    RngStream rng(1000 + static_cast<std::uint64_t>(10 * alpha));
    std::vector<double> xs(n);
    for (auto& x : xs) x = law.sample(rng).atoms()[1];
    const double sup =
        cdf_sup_distance(xs, [&](double t) { return law.f1(t); });
    CHECK(sup < band);
  }
}

TEST_CASE("psi agrees with a Monte Carlo intensity estimate") {
  const OffspringLaw law = two_atom_power_law(1.3);
  RngStream rng(77);
  const std::size_t n = 100'000;
  for (double theta : {0.5, 1.0, 2.0}) {
    std::vector<double> values(n);
    for (auto& v : values) {
      v = laplace_functional(law.sample(rng), theta);
    }
    const MeanSE est = mean_and_se(values);
    const double target = std::exp(law.psi(theta));
    CHECK(std::fabs(est.mean - target) <= 3.0 * est.se);
  }
}

TEST_CASE("slowly varying correction keeps the scaling machinery intact") {
  const OffspringLaw law = two_atom_slowly_varying(1.5, 0.8);
  double prev = 0.0;
  for (double t = 0.01; t <= 1.0; t += 0.01) {
    const double v = law.f1(t);
    CHECK(v >= prev);
    prev = v;
  }
  for (std::uint64_t n : {2ull, 17ull, 1000ull, 1000000ull}) {
    const double a = compute_a_n(law, n);
    CHECK(std::fabs(static_cast<double>(n) * law.f1(a) - 1.0) < 1e-9);
  }
  const std::size_t nsamp = 20'000;
  RngStream rng(4242);
  std::vector<double> xs(nsamp);
  for (auto& x : xs) x = law.sample(rng).atoms()[1];
  const double band = std::sqrt(std::log(2.0 / 0.01) / (2.0 * nsamp));
  CHECK(cdf_sup_distance(xs, [&](double t) { return law.f1(t); }) < band);
}

TEST_CASE("product cluster family") {
  SUBCASE("point direction at {1} reproduces the two-atom family") {
    const OffspringLaw law = product_cluster_law(1.0, point_directional({1.0}));
    RngStream rng(9);
    std::vector<double> xs(5000);
    for (auto& x : xs) x = law.sample(rng).atoms()[1];
    CHECK(ks_uniform(xs).p_value > 0.01);  // X1 = U exactly
    CHECK(law.psi(1.0) ==
          doctest::Approx(two_atom_power_law(1.0).psi(1.0)).epsilon(1e-12));
  }
  SUBCASE("direction {1,2} gives clusters {0, U, 2U}") {
    const OffspringLaw law =
        product_cluster_law(1.0, point_directional({1.0, 2.0}));
    RngStream rng(10);
    for (int i = 0; i < 100; ++i) {
      const CountingMeasure m = law.sample(rng);
      REQUIRE(m.size() == 3);
      CHECK(m.atoms()[0] == 0.0);
      CHECK(m.atoms()[2] == doctest::Approx(2.0 * m.atoms()[1]).epsilon(1e-15));
    }
    CHECK(law.mean_total() == doctest::Approx(3.0));
  }
  SUBCASE("psi matches quadrature for a direction with two atoms") {
    const double alpha = 1.7;
    const OffspringLaw law =
        product_cluster_law(alpha, point_directional({1.0, 3.0}));
    for (double theta : {0.5, 2.0}) {
      double expected = 0.0;
      for (double y : {1.0, 3.0}) {
        expected += power_laplace_quadrature(alpha, theta * y);
      }
      CHECK(law.psi(theta) ==
            doctest::Approx(std::log1p(expected)).epsilon(1e-9));
    }
  }
  SUBCASE("unbounded directions are refused") {
    DirectionalLaw unbounded;
    unbounded.sampler = [](RngStream&) {
      return CountingMeasure::from_sorted({1.0});
    };
    unbounded.max_atoms.reset();
    CHECK_THROWS_AS(product_cluster_law(1.0, unbounded), std::invalid_argument);
  }
}

TEST_CASE("directional law validation and moments") {
  CHECK_THROWS_AS(point_directional({2.0}), std::invalid_argument);
  CHECK_THROWS_AS(point_directional({}), std::invalid_argument);
  CHECK_THROWS_AS(point_directional({1.0, 0.5}), std::invalid_argument);
  CHECK_THROWS_AS(mixture_directional({1.0, -1.0}, {{1.0}, {1.0}}),
                  std::invalid_argument);
  const DirectionalLaw mix =
      mixture_directional({1.0, 3.0}, {{1.0}, {1.0, 2.0}});
  RngStream rng(3);
  // 0.25 * 1 + 0.75 * (1 + 1/2)
  CHECK(mix.alpha_moment(1.0, 10, rng) ==
        doctest::Approx(0.25 + 0.75 * 1.5).epsilon(1e-12));
}

TEST_CASE("magnification sequence") {
  const OffspringLaw law1 = two_atom_power_law(1.0);
  CHECK(compute_a_n(law1, 100) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(compute_a_n(law1, 1) == doctest::Approx(1.0).epsilon(1e-12));
  const OffspringLaw law2 = two_atom_power_law(2.0);
  CHECK(compute_a_n(law2, 100) == doctest::Approx(0.1).epsilon(1e-12));
  const ScalingSequence seq = scaling_sequence(law1);
  CHECK(seq.a(1000) == doctest::Approx(0.001).epsilon(1e-12));
  for (std::uint64_t n : {1ull, 10ull, 1000ull, 1000000ull}) {
    CHECK(std::fabs(static_cast<double>(n) * law2.f1(compute_a_n(law2, n)) -
                    1.0) < 1e-9);
  }
}

TEST_CASE("compute_a_n reports non-invertible F1") {
  OffspringLaw::Spec spec;
  spec.alpha = 1.0;
  spec.family = "test-jump";
  spec.sampler = [](RngStream&) {
    return CountingMeasure::from_sorted({0.0, 0.5});
  };
  spec.f1 = [](double t) { return t < 0.5 ? 0.0 : 1.0; };
  spec.psi = [](double theta) { return std::log1p(std::exp(-0.5 * theta)); };
  const OffspringLaw law(std::move(spec));
  CHECK_THROWS_AS(compute_a_n(law, 3), NumericError);
}

TEST_CASE("conditional rescaled sample") {
  const OffspringLaw law = two_atom_power_law(1.0);
  RngStream rng(12);
  SUBCASE("conditioning event and support") {
    for (int i = 0; i < 500; ++i) {
      const CountingMeasure m = conditional_rescaled_sample(law, 0.5, rng);
      REQUIRE(m.size() == 1);
      CHECK(m.atoms()[0] > 0.0);
      CHECK(m.atoms()[0] <= 1.0);  // first atom <= 1 by the conditioning
    }
  }
  SUBCASE("exact conditional law at t = 0.5 is uniform") {
    std::vector<double> xs(10'000);
    for (auto& x : xs) {
      x = conditional_rescaled_sample(law, 0.5, rng).atoms()[0];
    }
    CHECK(ks_uniform(xs).p_value > 0.01);
  }
  SUBCASE("alpha-power of the first atom is uniform for alpha = 2") {
    const OffspringLaw law2 = two_atom_power_law(2.0);
    std::vector<double> xs(10'000);
    for (auto& x : xs) {
      const double first =
          conditional_rescaled_sample(law2, 0.7, rng).atoms()[0];
      x = first * first;
    }
    CHECK(ks_uniform(xs).p_value > 0.01);
  }
  SUBCASE("rejection floor") {
    const OffspringLaw law8 = two_atom_power_law(8.0);
    // F1(0.05) = 0.05^8 ~ 3.9e-11 < 1e-9
    CHECK_THROWS_AS(conditional_rescaled_sample(law8, 0.05, rng), NumericError);
  }
  SUBCASE("t out of range") {
    CHECK_THROWS_AS(conditional_rescaled_sample(law, 0.0, rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(conditional_rescaled_sample(law, 1.5, rng),
                    std::invalid_argument);
  }
}

TEST_CASE("intensity growth check") {
  SUBCASE("two-atom, alpha 1: values rise toward 1 and stay below it") {
    const OffspringLaw law = two_atom_power_law(1.0);
    const C3Report single = check_c3(law, 1);
    CHECK(single.max_value == doctest::Approx(0.4898801).epsilon(1e-6));
    const C3Report report = check_c3(law, 100'000);
    CHECK(report.max_value <= 1.0 + 1e-9);
    CHECK(report.max_value > 0.99);
    CHECK_FALSE(report.divergence_flag);
    for (std::size_t i = 1; i < report.trend.size(); ++i) {
      CHECK(report.trend[i].second >= report.trend[i - 1].second);
    }
  }
  SUBCASE("bounded by Gamma(alpha+1) across alpha") {
    for (double alpha : {0.5, 2.0}) {
      const OffspringLaw law = two_atom_power_law(alpha);
      const C3Report report = check_c3(law, 10'000);
      CHECK(report.max_value <= std::tgamma(alpha + 1.0) + 1e-9);
      CHECK_FALSE(report.divergence_flag);
    }
  }
  SUBCASE("a cluster with a million coincident children is flagged") {
    // F1(t) = t, but every sample carries k extra atoms at X1, so
    // n psi(1/a_n) ~ n log(1 + (k+1)/n) keeps growing through n = N.
    const double k = 1e6;
    OffspringLaw::Spec spec;
    spec.alpha = 1.0;
    spec.family = "test-divergent";
    spec.mean_total = 2.0 + k;
    spec.sampler = [](RngStream& rng) {
      return CountingMeasure::from_sorted({0.0, rng.uniform_pos()});
    };
    spec.f1 = [](double t) { return t >= 1.0 ? 1.0 : std::max(t, 0.0); };
    spec.f1_inverse = [](double p) { return p; };
    spec.psi = [k](double theta) {
      const double single = (1.0 - std::exp(-theta)) / theta;
      return std::log1p((k + 1.0) * single);
    };
    const OffspringLaw law(std::move(spec));
    const C3Report report = check_c3(law, 100'000);
    CHECK(report.divergence_flag);
    CHECK(report.max_value > 100.0);
  }
}

TEST_CASE("independence of the radial and directional parts") {
  RngStream rng(20);
  SUBCASE("two-atom: shape statistic is constant, not applicable") {
    const IndependenceReport rep =
        check_independence_vy(two_atom_power_law(1.0), 0.5, 2000, rng);
    CHECK_FALSE(rep.applicable);
  }
  SUBCASE("product cluster with a random shape: independent by construction") {
    const OffspringLaw law = product_cluster_law(
        1.0, mixture_directional({1.0, 1.0}, {{1.0}, {1.0, 2.0}}));
    const IndependenceReport rep = check_independence_vy(law, 0.5, 10'000, rng);
    REQUIRE(rep.applicable);
    CHECK(rep.p_value > 0.01);
  }
  SUBCASE("adversarial shape tied to X1 is detected") {
    const IndependenceReport rep = check_independence_vy(
        adversarial_law_shape_depends_on_x1(), 0.5, 10'000, rng);
    REQUIRE(rep.applicable);
    CHECK(rep.p_value < 0.01);
  }
}

TEST_CASE("psi is positive and strictly decreasing for every built-in family") {
  const OffspringLaw laws[] = {
      two_atom_power_law(1.0), two_atom_power_law(0.5),
      two_atom_slowly_varying(2.0, 0.3),
      product_cluster_law(1.0, point_directional({1.0, 2.0}))};
  for (const OffspringLaw& law : laws) {
    double prev = std::numeric_limits<double>::infinity();
    for (double theta : {0.25, 0.5, 1.0, 2.0, 4.0, 8.0}) {
      const double v = law.psi(theta);
      CHECK(v > 0.0);
      CHECK(v < prev);
      prev = v;
    }
  }
}

TEST_CASE("every built-in law emits exactly one origin atom per sample") {
  RngStream rng(40);
  const OffspringLaw laws[] = {
      two_atom_power_law(0.6), two_atom_slowly_varying(1.0, 0.5),
      product_cluster_law(
          2.0, mixture_directional({1.0, 2.0}, {{1.0}, {1.0, 4.0}}))};
  for (const OffspringLaw& law : laws) {
    for (int i = 0; i < 200; ++i) {
      const CountingMeasure m = law.sample(rng);
      REQUIRE(!m.empty());
      CHECK(m.atoms()[0] == 0.0);
      std::size_t zeros = 0;
      for (double a : m.atoms()) zeros += (a == 0.0);
      CHECK(zeros == 1);
    }
  }
}
