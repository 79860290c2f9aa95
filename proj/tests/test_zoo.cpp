#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "bbic/bbic.hpp"
#include "fixtures.hpp"

using namespace bbic;

namespace {

RandomStream dummy() { return RandomStream(0); }

}  // namespace

TEST_CASE("greedy single-minded serves disjoint bundles") {
  SingleMindedInstance inst{2, {{0}, {1}}};
  AlgorithmOracle alg = greedy_single_minded(inst);
  RandomStream rng = dummy();
  REQUIRE(alg.evaluate({3.0, 4.0}, rng) == Allocation{{1, 1}});
}

TEST_CASE("greedy single-minded scores v over sqrt bundle size") {
  // A wants {0,1,2,3} at value 2 (score 1.0); B wants {0} and C wants {1} at
  // value 1.1 (score 1.1). B and C win, A is blocked.
  SingleMindedInstance inst{4, {{0, 1, 2, 3}, {0}, {1}}};
  AlgorithmOracle alg = greedy_single_minded(inst);
  RandomStream rng = dummy();
  const Profile v = {2.0, 1.1, 1.1};
  const Allocation x = alg.evaluate(v, rng);
  REQUIRE(x == Allocation{{0, 1, 1}});
  const CostModel cost = inst.cost_model();
  REQUIRE(welfare(v, x, cost) == Catch::Approx(2.2));
  REQUIRE(brute_force_opt(v, cost).welfare == Catch::Approx(2.2));
}

TEST_CASE("greedy single-minded achieves the sqrt(m) bound on random instances") {
  RandomStream rng(31);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 6;
    const std::size_t m = 2 + rng.uniform_index(8);
    SingleMindedInstance inst;
    inst.m = m;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::size_t> bundle;
      for (std::size_t item = 0; item < m; ++item)
        if (rng.bernoulli(0.4)) bundle.push_back(item);
      if (bundle.empty()) bundle.push_back(rng.uniform_index(m));
      inst.bundles.push_back(std::move(bundle));
    }
    Profile v(n);
    for (auto& x : v) x = rng.uniform(0.1, 10.0);

    AlgorithmOracle alg = greedy_single_minded(inst);
    RandomStream run = dummy();
    const CostModel cost = inst.cost_model();
    const double got = welfare(v, alg.evaluate(v, run), cost);
    const double opt = brute_force_opt(v, cost).welfare;
    REQUIRE(got * std::sqrt(static_cast<double>(m)) >= opt - 1e-9);
  }
}

TEST_CASE("knapsack greedy basics") {
  RandomStream rng = dummy();
  {
    AlgorithmOracle alg = knapsack_greedy(10.0, {2.0, 2.0, 2.0});
    REQUIRE(alg.evaluate({1.0, 2.0, 3.0}, rng) == Allocation{{1, 1, 1}});
  }
  {
    AlgorithmOracle alg = knapsack_greedy(10.0, {6.0, 6.0, 6.0});
    REQUIRE(alg.evaluate({9.0, 8.0, 7.0}, rng) == Allocation{{1, 0, 0}});
  }
}

TEST_CASE("knapsack greedy never beats the enumeration oracle") {
  RandomStream rng(37);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 8;
    std::vector<double> sizes(n);
    for (auto& s : sizes) s = 0.5 + rng.uniform(0.0, 4.0);
    const double cap = 6.0;
    Profile v(n);
    for (auto& x : v) x = rng.uniform(0.1, 10.0);
    AlgorithmOracle alg = knapsack_greedy(cap, sizes);
    RandomStream run = dummy();
    const CostModel cost = knapsack_cost_model(cap, sizes);
    REQUIRE(welfare(v, alg.evaluate(v, run), cost) <=
            brute_force_opt(v, cost).welfare + 1e-12);
  }
}

TEST_CASE("zoo algorithms respect their cost models on sampled profiles") {
  RandomStream gen(41);
  ProductPrior prior = fixtures::random_prior(gen, 6, 4);
  const std::size_t n = prior.n();

  SingleMindedInstance inst;
  inst.m = 5;
  RandomStream mk(43);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> bundle;
    for (std::size_t item = 0; item < inst.m; ++item)
      if (mk.bernoulli(0.5)) bundle.push_back(item);
    if (bundle.empty()) bundle.push_back(mk.uniform_index(inst.m));
    inst.bundles.push_back(std::move(bundle));
  }
  std::vector<double> sizes(n);
  for (auto& s : sizes) s = 0.5 + mk.uniform(0.0, 2.0);

  AlgorithmOracle greedy = greedy_single_minded(inst);
  AlgorithmOracle knap = knapsack_greedy(3.0, sizes);
  const CostModel greedy_cost = inst.cost_model();
  const CostModel knap_cost = knapsack_cost_model(3.0, sizes);

  RandomStream rng(47);
  for (int s = 0; s < 10000; ++s) {
    const Profile v = sample_profile(prior, rng);
    REQUIRE(greedy_cost.feasible(greedy.evaluate(v, rng)));
    REQUIRE(knap_cost.feasible(knap.evaluate(v, rng)));
  }
}

TEST_CASE("A.2 table reproduces every figure entry bit-exactly") {
  WorstCaseFixture fx = worstcase_fixture();
  RandomStream rng = dummy();
  REQUIRE(fx.alg.evaluate({100.0, 10.0}, rng) == Allocation{{1, 0}});
  REQUIRE(fx.alg.evaluate({100.0, 1000.0}, rng) == Allocation{{0, 1}});
  REQUIRE(fx.alg.evaluate({100.0, 1001.0}, rng) == Allocation{{0, 1}});
  REQUIRE(fx.alg.evaluate({1.0, 10.0}, rng) == Allocation{{0, 1}});
  REQUIRE(fx.alg.evaluate({1.0, 1000.0}, rng) == Allocation{{1, 1}});
  REQUIRE(fx.alg.evaluate({1.0, 1001.0}, rng) == Allocation{{1, 1}});
}

TEST_CASE("A.4 randomized table resolves cells with one draw") {
  ProductPrior prior = fixtures::a4_prior();
  AlgorithmOracle alg = fixtures::a4_algorithm(prior);

  // Exact cell probability via outcome enumeration.
  REQUIRE(alg.expected_allocation({1.0, 4.0}) == std::vector<double>{0.22, 0.22});
  REQUIRE(alg.expected_allocation({2.0, 6.0}) == std::vector<double>{0.60, 0.60});

  // Both-or-neither and replayable under a fixed seed.
  RandomStream a(9), b(9);
  int both = 0;
  const int N = 200000;
  for (int s = 0; s < N; ++s) {
    const Allocation xa = alg.evaluate({1.0, 4.0}, a);
    REQUIRE(xa == alg.evaluate({1.0, 4.0}, b));
    REQUIRE(xa.served[0] == xa.served[1]);
    if (xa.served[0]) ++both;
  }
  REQUIRE(static_cast<double>(both) / N == Catch::Approx(0.22).margin(0.005));
}

TEST_CASE("table queries off the support raise OffSupport") {
  WorstCaseFixture fx = worstcase_fixture();
  RandomStream rng = dummy();
  REQUIRE_THROWS_AS(fx.alg.evaluate({50.0, 10.0}, rng), OffSupportError);
}

TEST_CASE("table json nested round-trip") {
  TableAlgorithm det = TableAlgorithm::deterministic(
      {2, 2}, {Allocation{{0, 0}}, Allocation{{0, 1}}, Allocation{{1, 0}}, Allocation{{1, 1}}});
  const nlohmann::json j = det.to_json_nested();
  TableAlgorithm back = TableAlgorithm::from_json(j, 2);
  REQUIRE_FALSE(back.randomized_entries());
  REQUIRE(back.dims() == std::vector<std::size_t>{2, 2});
  REQUIRE(back.det_cell(back.flat_index({1, 0})) == Allocation{{1, 0}});

  TableAlgorithm rnd = fixtures::a4_table();
  TableAlgorithm rback = TableAlgorithm::from_json(rnd.to_json_nested(), 2);
  REQUIRE(rback.randomized_entries());
  REQUIRE(rback.prob_cell(rback.flat_index({0, 3})) == 0.22);
}

TEST_CASE("table file load round-trip") {
  TableAlgorithm rnd = fixtures::a4_table();
  const auto path = std::filesystem::temp_directory_path() / "bbic_table_roundtrip.json";
  {
    std::ofstream out(path);
    out << rnd.to_json_nested().dump(2);
  }
  TableAlgorithm back = TableAlgorithm::load_file(path.string(), 2);
  REQUIRE(back.randomized_entries());
  REQUIRE(back.prob_cell(back.flat_index({1, 5})) == 0.60);
  std::filesystem::remove(path);
  REQUIRE_THROWS_AS(TableAlgorithm::load_file("/nonexistent/table.json", 2), InvalidInputError);
}

TEST_CASE("snap_to_support maps reports to the step convention") {
  WorstCaseFixture fx = worstcase_fixture();
  AlgorithmOracle snapped = snap_to_support(fx.alg, fx.prior);
  RandomStream rng = dummy();
  // 50 snaps down to 1; (1, 10) -> (0, 1).
  REQUIRE(snapped.evaluate({50.0, 10.0}, rng) == Allocation{{0, 1}});
  // Below the lowest atom: agent 0 ineligible, slot evaluated at the atom.
  REQUIRE(snapped.evaluate({0.5, 1000.0}, rng) == Allocation{{0, 1}});
  REQUIRE(snapped.expected_allocation({0.5, 1000.0}) == std::vector<double>{0.0, 1.0});
}
