#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <functional>
#include <numeric>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "bbic/algorithm.hpp"
#include "bbic/cost.hpp"
#include "bbic/errors.hpp"
#include "bbic/prior.hpp"

namespace bbic {

/// Single-minded combinatorial auction instance: m items, one desired bundle
/// per agent; allocations are feasible when served bundles are pairwise
/// disjoint.
struct SingleMindedInstance {
  std::size_t m = 0;
  std::vector<std::vector<std::size_t>> bundles;

  void validate() const {
    if (bundles.empty()) throw InvalidInputError("single-minded instance needs agents");
    for (std::size_t i = 0; i < bundles.size(); ++i) {
      if (bundles[i].empty())
        throw InvalidInputError("agent " + std::to_string(i) + ": bundle must be non-empty");
      for (auto item : bundles[i])
        if (item >= m)
          throw InvalidInputError("agent " + std::to_string(i) + ": item index out of range");
    }
  }

  bool disjoint_served(const Allocation& x) const {
    std::vector<std::uint8_t> used(m, 0);
    for (std::size_t i = 0; i < bundles.size(); ++i) {
      if (!x.is_served(i)) continue;
      for (auto item : bundles[i]) {
        if (used[item]) return false;
        used[item] = 1;
      }
    }
    return true;
  }

  CostModel cost_model() const {
    return CostModel::downward_closed(
        [inst = *this](const Allocation& x) { return inst.disjoint_served(x); });
  }

  static SingleMindedInstance from_json(const nlohmann::json& j) {
    SingleMindedInstance inst;
    inst.m = j.at("items").get<std::size_t>();
    for (const auto& b : j.at("bundles"))
      inst.bundles.push_back(b.get<std::vector<std::size_t>>());
    inst.validate();
    return inst;
  }
};

/// Greedy by score v_i / sqrt(|bundle_i|) descending (ties: lower index
/// first), admitting subject to bundle disjointness. The classic rule behind
/// the sqrt(m) bound; deterministic, so interim curves are reproducible.
inline AlgorithmOracle greedy_single_minded(const SingleMindedInstance& instance) {
  instance.validate();
  const std::size_t n = instance.bundles.size();
  return AlgorithmOracle::deterministic(n, [inst = instance, n](const Profile& v) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> score(n);
    for (std::size_t i = 0; i < n; ++i)
      score[i] = v[i] / std::sqrt(static_cast<double>(inst.bundles[i].size()));
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
    Allocation x(n);
    std::vector<std::uint8_t> used(inst.m, 0);
    for (auto i : order) {
      bool free = true;
      for (auto item : inst.bundles[i])
        if (used[item]) {
          free = false;
          break;
        }
      if (!free) continue;
      x.served[i] = 1;
      for (auto item : inst.bundles[i]) used[item] = 1;
    }
    return x;
  });
}

/// Value-density greedy within a knapsack capacity (ties: lower index
/// first); items that do not fit are skipped and the scan continues.
inline AlgorithmOracle knapsack_greedy(double capacity, std::vector<double> sizes) {
  for (double s : sizes)
    if (!(s > 0.0)) throw InvalidInputError("knapsack sizes must be > 0");
  const std::size_t n = sizes.size();
  return AlgorithmOracle::deterministic(n, [capacity, sizes, n](const Profile& v) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> density(n);
    for (std::size_t i = 0; i < n; ++i) density[i] = v[i] / sizes[i];
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return density[a] > density[b]; });
    Allocation x(n);
    double used = 0.0;
    for (auto i : order) {
      if (used + sizes[i] > capacity) continue;
      used += sizes[i];
      x.served[i] = 1;
    }
    return x;
  });
}

inline CostModel knapsack_cost_model(double capacity, std::vector<double> sizes) {
  return CostModel::downward_closed([capacity, sizes](const Allocation& x) {
    double used = 0.0;
    for (std::size_t i = 0; i < sizes.size(); ++i)
      if (x.is_served(i)) used += sizes[i];
    return used <= capacity;
  });
}

/// Allocation table over the product of prior supports, indexed by per-agent
/// atom indices. Deterministic cells hold allocation bit-vectors; randomized
/// cells hold the probability of serving everyone (else no one), resolved
/// with one uniform draw per call.
class TableAlgorithm {
 public:
  static TableAlgorithm deterministic(std::vector<std::size_t> dims,
                                      std::vector<Allocation> cells) {
    TableAlgorithm t;
    t.dims_ = std::move(dims);
    if (cells.size() != t.cell_count())
      throw InvalidInputError("table does not cover the full product of supports");
    for (const auto& c : cells)
      if (c.size() != t.dims_.size())
        throw InvalidInputError("table cell allocation has wrong agent count");
    t.cells_ = std::move(cells);
    return t;
  }

  static TableAlgorithm randomized(std::vector<std::size_t> dims, std::vector<double> cells) {
    TableAlgorithm t;
    t.dims_ = std::move(dims);
    if (cells.size() != t.cell_count())
      throw InvalidInputError("table does not cover the full product of supports");
    for (double p : cells)
      if (!(p >= 0.0 && p <= 1.0))
        throw InvalidInputError("table probabilities must lie in [0, 1]");
    t.cells_ = std::move(cells);
    return t;
  }

  const std::vector<std::size_t>& dims() const { return dims_; }
  bool randomized_entries() const { return std::holds_alternative<std::vector<double>>(cells_); }

  std::size_t cell_count() const {
    std::size_t c = 1;
    for (auto d : dims_) c *= d;
    return c;
  }

  std::size_t flat_index(const std::vector<std::size_t>& idx) const {
    std::size_t f = 0;
    for (std::size_t i = 0; i < dims_.size(); ++i) f = f * dims_[i] + idx[i];
    return f;
  }

  const Allocation& det_cell(std::size_t flat) const {
    return std::get<std::vector<Allocation>>(cells_)[flat];
  }
  double prob_cell(std::size_t flat) const {
    return std::get<std::vector<double>>(cells_)[flat];
  }

  /// Nested arrays indexed by per-agent atom indices; leaves are allocation
  /// bit-vectors (deterministic) or probabilities (randomized). The agent
  /// count decides which: n+1 array levels mean bit-vector leaves, n levels
  /// mean scalar leaves.
  static TableAlgorithm from_json(const nlohmann::json& j, std::size_t n_agents) {
    std::size_t depth = 0;
    const nlohmann::json* node = &j;
    while (node->is_array()) {
      if (node->empty()) throw InvalidInputError("table file: empty array in nesting");
      ++depth;
      node = &(*node)[0];
    }
    if (!node->is_number()) throw InvalidInputError("table file: leaves must be numbers");
    const bool det = depth == n_agents + 1;
    if (!det && depth != n_agents)
      throw InvalidInputError("table file: nesting depth does not match the agent count");

    std::vector<std::size_t> dims(n_agents, 0);
    std::vector<Allocation> det_cells;
    std::vector<double> rnd_cells;
    std::function<void(const nlohmann::json&, std::size_t)> walk =
        [&](const nlohmann::json& nd, std::size_t level) {
          if (level == n_agents) {
            if (det) {
              if (!nd.is_array() || nd.size() != n_agents)
                throw InvalidInputError("table file: bit-vector leaf must list every agent");
              Allocation a;
              for (const auto& b : nd) a.served.push_back(b.get<int>() ? 1 : 0);
              det_cells.push_back(std::move(a));
            } else {
              rnd_cells.push_back(nd.get<double>());
            }
            return;
          }
          if (!nd.is_array()) throw InvalidInputError("table file: malformed nesting");
          if (dims[level] == 0)
            dims[level] = nd.size();
          else if (dims[level] != nd.size())
            throw InvalidInputError("table file: ragged dimension " + std::to_string(level));
          for (const auto& child : nd) walk(child, level + 1);
        };
    walk(j, 0);
    return det ? deterministic(std::move(dims), std::move(det_cells))
               : randomized(std::move(dims), std::move(rnd_cells));
  }

  /// Object form with explicit kind and dims; cells is a flat row-major list.
  static TableAlgorithm from_json_object(const nlohmann::json& j) {
    const auto kind = j.at("kind").get<std::string>();
    auto dims = j.at("dims").get<std::vector<std::size_t>>();
    if (kind == "deterministic") {
      std::vector<Allocation> cells;
      for (const auto& c : j.at("cells")) {
        Allocation a;
        for (const auto& b : c) a.served.push_back(b.get<int>() ? 1 : 0);
        cells.push_back(std::move(a));
      }
      return deterministic(std::move(dims), std::move(cells));
    }
    if (kind == "randomized") {
      auto cells = j.at("cells").get<std::vector<double>>();
      return randomized(std::move(dims), std::move(cells));
    }
    throw InvalidInputError("table file: kind must be deterministic or randomized");
  }

  /// Nested-array serialization matching from_json.
  nlohmann::json to_json_nested() const {
    std::function<nlohmann::json(std::size_t, std::size_t)> build =
        [&](std::size_t level, std::size_t base) -> nlohmann::json {
      if (level == dims_.size()) {
        if (randomized_entries()) return prob_cell(base);
        nlohmann::json bits = nlohmann::json::array();
        for (auto b : det_cell(base).served) bits.push_back(static_cast<int>(b));
        return bits;
      }
      nlohmann::json arr = nlohmann::json::array();
      for (std::size_t k = 0; k < dims_[level]; ++k)
        arr.push_back(build(level + 1, base * dims_[level] + k));
      return arr;
    };
    return build(0, 0);
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["dims"] = dims_;
    if (randomized_entries()) {
      j["kind"] = "randomized";
      j["cells"] = std::get<std::vector<double>>(cells_);
    } else {
      j["kind"] = "deterministic";
      nlohmann::json cells = nlohmann::json::array();
      for (const auto& a : std::get<std::vector<Allocation>>(cells_)) {
        nlohmann::json bits = nlohmann::json::array();
        for (auto b : a.served) bits.push_back(static_cast<int>(b));
        cells.push_back(std::move(bits));
      }
      j["cells"] = std::move(cells);
    }
    return j;
  }

  static TableAlgorithm load_file(const std::string& path, std::size_t n_agents) {
    std::ifstream in(path);
    if (!in) throw InvalidInputError("cannot open table file: " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw InvalidInputError("table file " + path + ": " + e.what());
    }
    if (j.is_object()) return from_json_object(j);
    return from_json(j, n_agents);
  }

 private:
  std::vector<std::size_t> dims_;
  std::variant<std::vector<Allocation>, std::vector<double>> cells_;
};

/// Table-driven oracle over the prior's atom grid. Queries off the support
/// raise OffSupport.
inline AlgorithmOracle table_algorithm(const ProductPrior& prior, TableAlgorithm table) {
  const std::size_t n = prior.n();
  if (table.dims().size() != n)
    throw InvalidInputError("table dimensionality does not match the prior");
  for (std::size_t i = 0; i < n; ++i)
    if (table.dims()[i] != prior.dist(i).size())
      throw InvalidInputError("table dimension " + std::to_string(i) +
                              " does not match the agent's support size");

  auto lookup = [prior, n](const Profile& v) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) {
      const int j = prior.dist(i).atom_index(v[i]);
      if (j < 0)
        throw OffSupportError("table query: value " + std::to_string(v[i]) +
                              " is not an atom of agent " + std::to_string(i));
      idx[i] = static_cast<std::size_t>(j);
    }
    return idx;
  };

  auto t = std::make_shared<const TableAlgorithm>(std::move(table));
  AlgorithmOracle::EvalFn eval;
  AlgorithmOracle::OutcomesFn outcomes;
  if (t->randomized_entries()) {
    eval = [t, lookup, n](const Profile& v, RandomStream& rng) {
      const double p = t->prob_cell(t->flat_index(lookup(v)));
      return rng.bernoulli(p) ? Allocation::all(n) : Allocation::none(n);
    };
    outcomes = [t, lookup, n](const Profile& v, const AlgorithmOracle::OutcomeFn& visit) {
      const double p = t->prob_cell(t->flat_index(lookup(v)));
      if (p > 0.0) visit(Allocation::all(n), p);
      if (p < 1.0) visit(Allocation::none(n), 1.0 - p);
    };
  } else {
    eval = [t, lookup](const Profile& v, RandomStream&) {
      return t->det_cell(t->flat_index(lookup(v)));
    };
    outcomes = [t, lookup](const Profile& v, const AlgorithmOracle::OutcomeFn& visit) {
      visit(t->det_cell(t->flat_index(lookup(v))), 1.0);
    };
  }
  return AlgorithmOracle::randomized(n, std::move(eval), std::move(outcomes));
}

}  // namespace bbic
