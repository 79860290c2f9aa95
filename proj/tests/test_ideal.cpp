#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "bbic/bbic.hpp"
#include "fixtures.hpp"

using namespace bbic;

TEST_CASE("exact interim curves of the A.2 table") {
  WorstCaseFixture fx = worstcase_fixture();
  const InterimCurve c1 = exact_interim_curve(fx.alg, fx.prior, 0);
  REQUIRE(c1.values == std::vector<double>{1.0, 100.0});
  REQUIRE(c1.probs[0] == Catch::Approx(2.0 / 3.0).margin(1e-15));
  REQUIRE(c1.probs[1] == Catch::Approx(1.0 / 3.0).margin(1e-15));
  REQUIRE_FALSE(c1.estimated);

  const InterimCurve c2 = exact_interim_curve(fx.alg, fx.prior, 1);
  REQUIRE(c2.probs[0] == Catch::Approx(0.5).margin(1e-15));
  REQUIRE(c2.probs[1] == 1.0);
  REQUIRE(c2.probs[2] == 1.0);
}

TEST_CASE("constant serve-everyone algorithm has curve identically one") {
  RandomStream gen(3);
  ProductPrior prior = fixtures::random_prior(gen, 3, 4);
  AlgorithmOracle alg = AlgorithmOracle::deterministic(
      prior.n(), [n = prior.n()](const Profile&) { return Allocation::all(n); });
  for (std::size_t i = 0; i < prior.n(); ++i) {
    const InterimCurve c = exact_interim_curve(alg, prior, i);
    for (double p : c.probs) REQUIRE(p == 1.0);
  }
}

TEST_CASE("randomized oracle without outcome machinery falls back to Monte Carlo") {
  ProductPrior prior({DiscreteDistribution::uniform({1.0, 2.0})});
  AlgorithmOracle alg = AlgorithmOracle::randomized(
      1, [](const Profile&, RandomStream& rng) {
        return rng.bernoulli(0.3) ? Allocation::all(1) : Allocation::none(1);
      });
  ExactCurveOptions opt;
  opt.mc_samples = 20000;
  const InterimCurve c = exact_interim_curve(alg, prior, 0, opt);
  REQUIRE(c.estimated);
  REQUIRE(c.samples_per_point == 20000);
  REQUIRE(c.probs[0] == Catch::Approx(0.3).margin(0.02));
}

TEST_CASE("exact mode refuses oversized opponent supports") {
  WorstCaseFixture fx = worstcase_fixture();
  ExactCurveOptions opt;
  opt.max_support = 2.0;
  REQUIRE_THROWS_AS(exact_interim_curve(fx.alg, fx.prior, 0, opt), SupportTooLargeError);
}

TEST_CASE("cumulative curve breakpoints") {
  WorstCaseFixture fx = worstcase_fixture();
  const InterimCurve c1 = exact_interim_curve(fx.alg, fx.prior, 0);
  const CumulativeCurve G = cumulative_curve(c1, fx.prior.dist(0));
  REQUIRE(G.q == std::vector<double>{0.0, 0.5, 1.0});
  REQUIRE(G.g[0] == 0.0);
  REQUIRE(G.g[1] == Catch::Approx(1.0 / 3.0).margin(1e-15));
  REQUIRE(G.g[2] == Catch::Approx(0.5).margin(1e-15));

  InterimCurve zero;
  zero.values = {1.0, 2.0};
  zero.probs = {0.0, 0.0};
  const CumulativeCurve Gz = cumulative_curve(zero, DiscreteDistribution::uniform({1.0, 2.0}));
  for (double g : Gz.g) REQUIRE(g == 0.0);

  InterimCurve slice;
  slice.values = {1, 2, 3, 4, 5, 6};
  slice.probs = {0.8, 0.2, 0.82, 0.22, 0.84, 0.24};
  const CumulativeCurve Gs =
      cumulative_curve(slice, DiscreteDistribution::uniform({1, 2, 3, 4, 5, 6}));
  REQUIRE(Gs.g.back() == Catch::Approx(3.12 / 6.0).margin(1e-12));
}

TEST_CASE("convex hull drops strictly-above points and keeps collinear ones") {
  // A.2 agent 1: middle point strictly above the chord (1/3 > 1/4).
  CumulativeCurve G;
  G.q = {0.0, 0.5, 1.0};
  G.g = {0.0, 1.0 / 3.0, 0.5};
  const CumulativeCurve hull = convex_hull(G);
  REQUIRE(hull.q == std::vector<double>{0.0, 1.0});
  REQUIRE(hull.g == std::vector<double>{0.0, 0.5});

  // Convex curve: hull equals the curve, collinear breakpoints retained.
  CumulativeCurve C;
  C.q = {0.0, 0.25, 0.5, 1.0};
  C.g = {0.0, 0.1, 0.2, 0.7};  // slopes .4, .4, 1.0
  const CumulativeCurve hc = convex_hull(C);
  REQUIRE(hc.q == C.q);
  REQUIRE(hc.g == C.g);
}

TEST_CASE("A.4 slice: hull pairs atoms and intervals split at contact points") {
  const DiscreteDistribution d = DiscreteDistribution::uniform({1, 2, 3, 4, 5, 6});
  InterimCurve slice;
  slice.values = {1, 2, 3, 4, 5, 6};
  slice.probs = {0.8, 0.2, 0.82, 0.22, 0.84, 0.24};
  const CumulativeCurve G = cumulative_curve(slice, d);
  const CumulativeCurve hull = convex_hull(G);

  REQUIRE(hull.q.size() == 4);
  REQUIRE(hull.q[1] == Catch::Approx(2.0 / 6.0).margin(1e-15));
  REQUIRE(hull.q[2] == Catch::Approx(4.0 / 6.0).margin(1e-15));
  REQUIRE(hull.slope(0) == Catch::Approx(0.5).margin(1e-12));
  REQUIRE(hull.slope(1) == Catch::Approx(0.52).margin(1e-12));
  REQUIRE(hull.slope(2) == Catch::Approx(0.54).margin(1e-12));

  const auto intervals = monotonizing_intervals(G, hull, d);
  REQUIRE(intervals.size() == 3);
  REQUIRE(intervals[0] == ValueInterval{1.0, 2.0, false});
  REQUIRE(intervals[1] == ValueInterval{3.0, 4.0, false});
  REQUIRE(intervals[2] == ValueInterval{5.0, 6.0, false});
}

TEST_CASE("monotonizing intervals of the A.2 agent-1 curve span the support") {
  WorstCaseFixture fx = worstcase_fixture();
  const InterimCurve c1 = exact_interim_curve(fx.alg, fx.prior, 0);
  const CumulativeCurve G = cumulative_curve(c1, fx.prior.dist(0));
  const auto intervals = monotonizing_intervals(G, convex_hull(G), fx.prior.dist(0));
  REQUIRE(intervals.size() == 1);
  REQUIRE(intervals[0] == ValueInterval{1.0, 100.0, false});

  // Monotone curve: no intervals.
  InterimCurve mono;
  mono.values = {1.0, 100.0};
  mono.probs = {0.2, 0.9};
  const CumulativeCurve Gm = cumulative_curve(mono, fx.prior.dist(0));
  REQUIRE(monotonizing_intervals(Gm, convex_hull(Gm), fx.prior.dist(0)).empty());
}

TEST_CASE("ironing on an empty interval set is behaviorally the identity") {
  WorstCaseFixture fx = worstcase_fixture();
  IntervalSet none;
  none.per_agent.resize(2);
  AlgorithmOracle ironed = iron_on_intervals(fx.alg, fx.prior, none);
  RandomStream a(5), b(5);
  for_each_profile(fx.prior, [&](const Profile& v, double) {
    REQUIRE(ironed.evaluate(v, a) == fx.alg.evaluate(v, b));
  });
}

TEST_CASE("ironing agent 1 of A.2 flattens its curve to one half") {
  WorstCaseFixture fx = worstcase_fixture();
  IntervalSet iv;
  iv.per_agent = {{ValueInterval{1.0, 100.0, false}}, {}};
  AlgorithmOracle ironed = iron_on_intervals(fx.alg, fx.prior, iv);
  const InterimCurve c1 = exact_interim_curve(ironed, fx.prior, 0);
  REQUIRE(c1.probs[0] == Catch::Approx(0.5).margin(1e-12));
  REQUIRE(c1.probs[1] == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("ironing the A.4 table on agent-2 interval [2,5] averages the row") {
  ProductPrior prior = fixtures::a4_prior();
  AlgorithmOracle alg = fixtures::a4_algorithm(prior);
  IntervalSet iv;
  iv.per_agent = {{}, {ValueInterval{2.0, 5.0, false}}};
  AlgorithmOracle ironed = iron_on_intervals(alg, prior, iv);

  const std::vector<double> expected = {0.20, 0.40, 0.40, 0.40, 0.40, 0.60};
  for (std::size_t j = 0; j < 6; ++j) {
    const double x = ironed.expected_allocation({2.0, static_cast<double>(j + 1)})[1];
    REQUIRE(x == Catch::Approx(expected[j]).margin(1e-12));
  }
}

TEST_CASE("ideal pipeline on the A.2 table") {
  WorstCaseFixture fx = worstcase_fixture();
  const IdealIroningResult r = ideal_ironed_algorithm(fx.alg, fx.prior);

  REQUIRE(r.intervals.per_agent[0].size() == 1);
  REQUIRE(r.intervals.per_agent[0][0] == ValueInterval{1.0, 100.0, false});
  REQUIRE(r.intervals.per_agent[1].empty());

  REQUIRE(r.ironed_curves[0].probs[0] == Catch::Approx(0.5).margin(1e-12));
  REQUIRE(r.ironed_curves[0].probs[1] == Catch::Approx(0.5).margin(1e-12));
  REQUIRE(r.ironed_curves[1].probs == r.raw_curves[1].probs);

  // Welfare contribution of agent 1 improves: 25.25 vs 17.0.
  const auto& d1 = fx.prior.dist(0);
  double raw = 0.0, ironed = 0.0;
  for (std::size_t j = 0; j < d1.size(); ++j) {
    raw += d1.mass(j) * d1.value(j) * r.raw_curves[0].probs[j];
    ironed += d1.mass(j) * d1.value(j) * r.ironed_curves[0].probs[j];
  }
  REQUIRE(raw == Catch::Approx(17.0).margin(1e-12));
  REQUIRE(ironed == Catch::Approx(25.25).margin(1e-12));
}

TEST_CASE("ideal pipeline leaves monotone algorithms untouched") {
  RandomStream gen(21);
  for (int t = 0; t < 10; ++t) {
    ProductPrior prior = fixtures::random_prior(gen, 3, 5);
    // Threshold rule: serve agent i iff its value is at least its median atom.
    std::vector<double> thresholds;
    for (std::size_t i = 0; i < prior.n(); ++i)
      thresholds.push_back(prior.dist(i).value(prior.dist(i).size() / 2));
    AlgorithmOracle alg = AlgorithmOracle::deterministic(
        prior.n(), [thresholds](const Profile& v) {
          Allocation x(v.size());
          for (std::size_t i = 0; i < v.size(); ++i) x.served[i] = v[i] >= thresholds[i];
          return x;
        });
    const IdealIroningResult r = ideal_ironed_algorithm(alg, prior);
    REQUIRE(r.intervals.empty());
    for (std::size_t i = 0; i < prior.n(); ++i)
      REQUIRE(r.ironed_curves[i].probs == r.raw_curves[i].probs);
  }
}

TEST_CASE("hull slopes equal the exact interim curve of the ironed oracle") {
  RandomStream gen(23);
  for (int t = 0; t < 25; ++t) {
    ProductPrior prior = fixtures::random_prior(gen, 3, 5);
    AlgorithmOracle alg = fixtures::random_table_algorithm(prior, gen);
    const IdealIroningResult r = ideal_ironed_algorithm(alg, prior);
    for (std::size_t i = 0; i < prior.n(); ++i) {
      const InterimCurve direct = exact_interim_curve(r.ironed, prior, i);
      for (std::size_t j = 0; j < direct.size(); ++j)
        REQUIRE(direct.probs[j] == Catch::Approx(r.ironed_curves[i].probs[j]).margin(1e-12));
    }
  }
}

TEST_CASE("ideal pipeline properties over random table instances") {
  RandomStream gen(29);
  for (int t = 0; t < 200; ++t) {
    ProductPrior prior = fixtures::random_prior(gen, 5, 8);
    AlgorithmOracle alg = fixtures::random_table_algorithm(prior, gen);
    const IdealIroningResult r = ideal_ironed_algorithm(alg, prior);

    for (std::size_t i = 0; i < prior.n(); ++i) {
      const auto& d = prior.dist(i);
      // Monotone ironed curves.
      REQUIRE(check_monotone(r.ironed_curves[i], 1e-9).empty());
      // Discrete upper-tail dominance at every atom.
      REQUIRE(dominance_check(r.raw_curves[i], r.ironed_curves[i], d).empty());
      // Hull properties through the curves: E[v x] weakly improves.
      double raw = 0.0, ironed = 0.0;
      for (std::size_t j = 0; j < d.size(); ++j) {
        raw += d.mass(j) * d.value(j) * r.raw_curves[i].probs[j];
        ironed += d.mass(j) * d.value(j) * r.ironed_curves[i].probs[j];
      }
      REQUIRE(ironed >= raw - 1e-12);
    }

    // Prior preservation, exactly.
    REQUIRE(prior_preservation(r.ironed, prior) <= 1e-12);

    // Expected cost unchanged under an arbitrary general cost model.
    const CostModel cost = fixtures::hashed_cost(t, 5.0);
    double raw_cost = 0.0;
    for_each_profile(prior, [&](const Profile& v, double mass) {
      alg.for_each_outcome(v, [&](const Allocation& x, double p) {
        raw_cost += mass * p * cost.cost(x);
      });
    });
    double ironed_cost = 0.0;
    // Independent route: product of the exact input marginals times the
    // inner rule's cost.
    std::vector<std::vector<double>> marginals;
    for (std::size_t i = 0; i < prior.n(); ++i)
      marginals.push_back(ironed_input_marginal(prior, r.intervals, i));
    for_each_profile(prior, [&](const Profile& v, double) {
      double mass = 1.0;
      for (std::size_t i = 0; i < prior.n(); ++i)
        mass *= marginals[i][static_cast<std::size_t>(prior.dist(i).atom_index(v[i]))];
      alg.for_each_outcome(v, [&](const Allocation& x, double p) {
        ironed_cost += mass * p * cost.cost(x);
      });
    });
    REQUIRE(ironed_cost == Catch::Approx(raw_cost).margin(1e-9));
  }
}

TEST_CASE("hull lies below the curve with matching endpoints and convex slopes") {
  RandomStream gen(31);
  for (int t = 0; t < 100; ++t) {
    ProductPrior prior = fixtures::random_prior(gen, 1, 8);
    const auto& d = prior.dist(0);
    InterimCurve c;
    c.values = d.values();
    c.probs.resize(d.size());
    for (auto& p : c.probs) p = gen.next_unit();
    const CumulativeCurve G = cumulative_curve(c, d);
    const CumulativeCurve hull = convex_hull(G);

    REQUIRE(hull.g.front() == G.g.front());
    REQUIRE(hull.g.back() == G.g.back());
    for (std::size_t j = 0; j < G.q.size(); ++j)
      REQUIRE(hull.value_at(G.q[j]) <= G.g[j] + 1e-12);
    for (std::size_t s = 0; s + 1 < hull.segments(); ++s)
      REQUIRE(hull.slope(s + 1) - hull.slope(s) >= -1e-12);
  }
}
