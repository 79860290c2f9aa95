#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "bbic/bbic.hpp"
#include "fixtures.hpp"

using namespace bbic;

TEST_CASE("exact_payment on canonical curves") {
  // Serve-everyone: the mechanism serves any report, so the curve extends as
  // 1 below its lowest atom and every payment is zero.
  {
    InterimCurve c;
    c.values = {2.0, 5.0, 10.0};
    c.probs = {1.0, 1.0, 1.0};
    c.below_support = 1.0;
    const DiscreteDistribution d = DiscreteDistribution::uniform({2.0, 5.0, 10.0});
    for (double v : c.values) REQUIRE(exact_payment(c, d, v) == 0.0);
  }
  // Posted price at an atom: pay the price whenever served.
  {
    InterimCurve c;
    c.values = {2.0, 5.0, 10.0};
    c.probs = {0.0, 1.0, 1.0};
    const DiscreteDistribution d = DiscreteDistribution::uniform({2.0, 5.0, 10.0});
    REQUIRE(exact_payment(c, d, 5.0) == 5.0);
    REQUIRE(exact_payment(c, d, 10.0) == 5.0);
    REQUIRE(exact_payment(c, d, 2.0) == 0.0);
  }
  // A.2 agent 2 at v = 1000, with the curve extended by its own lowest value
  // below support: 1000*1 - (.5*10 + .5*990) = 500.
  {
    InterimCurve c;
    c.values = {10.0, 1000.0, 1001.0};
    c.probs = {0.5, 1.0, 1.0};
    c.below_support = 0.5;
    const DiscreteDistribution d = DiscreteDistribution::uniform({10.0, 1000.0, 1001.0});
    REQUIRE(exact_payment(c, d, 1000.0) == 500.0);
    // Default zero extension shifts the integral by .5*10.
    c.below_support = 0.0;
    REQUIRE(exact_payment(c, d, 1000.0) == 505.0);
    REQUIRE_THROWS_AS(exact_payment(c, d, 500.0), OffSupportError);
  }
}

TEST_CASE("oracle_payment on serve-everyone is exactly zero") {
  ProductPrior prior({DiscreteDistribution::uniform({2.0, 5.0}),
                      DiscreteDistribution::uniform({1.0, 3.0})});
  AlgorithmOracle alg = AlgorithmOracle::deterministic(
      2, [](const Profile& v) { return Allocation::all(v.size()); });
  RandomStream rng(17);
  for (int t = 0; t < 1000; ++t) {
    const OraclePaymentResult r = oracle_payment(alg, prior, {5.0, 3.0}, 0, rng);
    REQUIRE(r.payment == 0.0);
    REQUIRE(r.calls == 2);  // one deviation probe, one retrial that hits immediately
  }
}

TEST_CASE("oracle_payment is unbiased for the posted-price mechanism") {
  ProductPrior prior({DiscreteDistribution::uniform({2.0, 5.0, 10.0})});
  const double price = 5.0;
  AlgorithmOracle alg = AlgorithmOracle::deterministic(1, [price](const Profile& v) {
    Allocation x(1);
    x.served[0] = v[0] >= price;
    return x;
  });
  const InterimCurve curve = exact_interim_curve(alg, prior, 0);
  const double exact = exact_payment(curve, prior.dist(0), 10.0);
  REQUIRE(exact == price);

  RandomStream rng(19);
  const int N = 100000;
  double sum = 0.0, sum2 = 0.0;
  for (int t = 0; t < N; ++t) {
    const double p = oracle_payment(alg, prior, {10.0}, 0, rng).payment;
    REQUIRE(p <= 10.0);
    sum += p;
    sum2 += p * p;
  }
  const double mean = sum / N;
  const double se = std::sqrt(std::max(0.0, sum2 / N - mean * mean) / N);
  REQUIRE(std::abs(mean - exact) <= 3.0 * se);
}

TEST_CASE("oracle_payment matches exact_payment on the ironed A.2 mechanism") {
  WorstCaseFixture fx = worstcase_fixture();
  const IdealIroningResult ir = ideal_ironed_algorithm(fx.alg, fx.prior);
  // Snap wrapper makes reports off the atom grid well-defined (deviation
  // draws are continuous); below-support reports are never served, matching
  // the curve's zero extension.
  AlgorithmOracle mech = snap_to_support(ir.ironed, fx.prior);

  const InterimCurve curve = exact_interim_curve(mech, fx.prior, 0);
  REQUIRE(curve.probs[0] == Catch::Approx(0.5).margin(1e-12));
  const double exact = exact_payment(curve, fx.prior.dist(0), 100.0);
  REQUIRE(exact == Catch::Approx(0.5).margin(1e-12));

  RandomStream rng(23);
  const int N = 100000;
  double sum = 0.0, sum2 = 0.0;
  for (int t = 0; t < N; ++t) {
    const double p = oracle_payment(mech, fx.prior, {100.0, 10.0}, 0, rng).payment;
    sum += p;
    sum2 += p * p;
  }
  const double mean = sum / N;
  const double se = std::sqrt(std::max(0.0, sum2 / N - mean * mean) / N);
  REQUIRE(std::abs(mean - exact) <= 3.0 * se);
}

TEST_CASE("individual rationality holds on every trial, monotone or not") {
  WorstCaseFixture fx = worstcase_fixture();
  AlgorithmOracle mech = snap_to_support(fx.alg, fx.prior);  // raw A.2: not monotone
  RandomStream rng(29);
  for (int t = 0; t < 20000; ++t) {
    const Profile v = sample_profile(fx.prior, rng);
    const MechanismOutcome out = mechanism_outcome(mech, fx.prior, v, rng);
    for (std::size_t i = 0; i < 2; ++i) {
      REQUIRE(out.payments[i] <= v[i] + 1e-12);
      if (!out.allocation.is_served(i)) REQUIRE(out.payments[i] == 0.0);
    }
  }
}

TEST_CASE("expected black-box calls per payment stay under two") {
  // Interim probabilities here are at least 1/3, comfortably above the .1
  // regime the budget audit targets.
  WorstCaseFixture fx = worstcase_fixture();
  AlgorithmOracle mech = snap_to_support(fx.alg, fx.prior);
  RandomStream rng(31);
  long long trials = 0, calls = 0;
  for (int t = 0; t < 20000; ++t) {
    const Profile v = sample_profile(fx.prior, rng);
    Allocation served = mech.evaluate(v, rng);
    for (std::size_t i = 0; i < 2; ++i) {
      ++trials;
      if (served.is_served(i)) calls += oracle_payment(mech, fx.prior, v, i, rng).calls;
    }
  }
  REQUIRE(static_cast<double>(calls) / static_cast<double>(trials) <= 2.05);
}

TEST_CASE("iteration cap trips when the interim probability is near zero") {
  ProductPrior prior({DiscreteDistribution::uniform({1.0, 2.0}),
                      DiscreteDistribution::uniform({1.0, 2.0})});
  // Serves agent 0 only when the deviation probe lands below 1 (never at an
  // atom), so the retrial loop at the true value can never terminate.
  AlgorithmOracle alg = AlgorithmOracle::deterministic(2, [](const Profile& v) {
    Allocation x(2);
    x.served[0] = v[0] < 1.0;
    return x;
  });
  RandomStream rng(37);
  OraclePaymentOptions opt;
  opt.t_max = 2000;
  bool tripped = false;
  for (int t = 0; t < 200 && !tripped; ++t) {
    try {
      oracle_payment(alg, prior, {2.0, 1.0}, 0, rng, opt);
    } catch (const IterationCapError&) {
      tripped = true;
    }
  }
  REQUIRE(tripped);
}
