#pragma once

// Shared instances and generators for the test suites.

#include <cstddef>
#include <utility>
#include <vector>

#include "bbic/bbic.hpp"

namespace fixtures {

/// The A.4 two-agent fixture: v1 uniform {1,2}, v2 uniform {1..6}, table of
/// both-or-neither allocation probabilities.
inline bbic::ProductPrior a4_prior() {
  return bbic::ProductPrior({bbic::DiscreteDistribution::uniform({1.0, 2.0}),
                             bbic::DiscreteDistribution::uniform({1.0, 2.0, 3.0, 4.0, 5.0, 6.0})});
}

inline bbic::TableAlgorithm a4_table() {
  // Rows v1 = 1 then 2, columns v2 = 1..6.
  std::vector<double> cells = {
      0.80, 0.20, 0.82, 0.22, 0.84, 0.24,  // v1 = 1
      0.20, 0.60, 0.60, 0.20, 0.20, 0.60,  // v1 = 2
  };
  return bbic::TableAlgorithm::randomized({2, 6}, std::move(cells));
}

inline bbic::AlgorithmOracle a4_algorithm(const bbic::ProductPrior& prior) {
  return bbic::table_algorithm(prior, a4_table());
}

/// Random finite-support prior: n agents, 2..max_atoms atoms each, values in
/// (0, 100), masses renormalized.
inline bbic::ProductPrior random_prior(bbic::RandomStream& rng, std::size_t n_max = 5,
                                       std::size_t max_atoms = 8) {
  const std::size_t n = 1 + rng.uniform_index(n_max);
  std::vector<bbic::DiscreteDistribution> agents;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t m = 2 + rng.uniform_index(max_atoms - 1);
    std::vector<double> values;
    double v = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      v += 0.25 + rng.uniform(0.0, 25.0);
      values.push_back(v);
    }
    std::vector<double> masses(m);
    double total = 0.0;
    for (auto& w : masses) {
      w = 0.05 + rng.next_unit();
      total += w;
    }
    std::vector<std::pair<double, double>> atoms;
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      double mass = masses[j] / total;
      if (j + 1 == m) mass = 1.0 - acc;
      acc += mass;
      atoms.emplace_back(values[j], mass);
    }
    agents.emplace_back(std::move(atoms));
  }
  return bbic::ProductPrior(std::move(agents));
}

/// Random deterministic table over the prior's support.
inline bbic::AlgorithmOracle random_table_algorithm(const bbic::ProductPrior& prior,
                                                    bbic::RandomStream& rng) {
  std::vector<std::size_t> dims;
  std::size_t cells = 1;
  for (std::size_t i = 0; i < prior.n(); ++i) {
    dims.push_back(prior.dist(i).size());
    cells *= dims.back();
  }
  std::vector<bbic::Allocation> table;
  table.reserve(cells);
  for (std::size_t c = 0; c < cells; ++c) {
    bbic::Allocation a(prior.n());
    for (std::size_t i = 0; i < prior.n(); ++i) a.served[i] = rng.bernoulli(0.5) ? 1 : 0;
    table.push_back(std::move(a));
  }
  return bbic::table_algorithm(prior,
                               bbic::TableAlgorithm::deterministic(std::move(dims), std::move(table)));
}

/// Deterministic pseudo-random general cost keyed by the served set.
inline bbic::CostModel hashed_cost(std::uint64_t key, double scale) {
  return bbic::CostModel::general([key, scale](const bbic::Allocation& x) {
    std::uint64_t h = key ^ 0x9E3779B97F4A7C15ULL;
    for (auto b : x.served) {
      h ^= b + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
    }
    return scale * static_cast<double>(h % 1024) / 1024.0;
  });
}

}  // namespace fixtures
