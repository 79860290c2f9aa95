#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bbic/distribution.hpp"
#include "bbic/errors.hpp"
#include "bbic/random.hpp"
#include "bbic/types.hpp"

namespace bbic {

/// Product prior over agent valuations. Carries mu_max = max_i E[v_i] and
/// v_max, an upper bound on any agent's valuation.
class ProductPrior {
 public:
  explicit ProductPrior(std::vector<DiscreteDistribution> agents,
                        double v_max = std::numeric_limits<double>::quiet_NaN())
      : agents_(std::move(agents)) {
    if (agents_.empty()) throw InvalidInputError("prior needs at least one agent");
    mu_max_ = 0.0;
    double top = 0.0;
    for (const auto& d : agents_) {
      mu_max_ = std::max(mu_max_, d.mean());
      top = std::max(top, d.max_value());
    }
    v_max_ = std::isnan(v_max) ? top : v_max;
    if (v_max_ < top)
      throw InvalidInputError("v_max smaller than the largest atom value");
  }

  std::size_t n() const { return agents_.size(); }
  const DiscreteDistribution& dist(std::size_t i) const { return agents_[i]; }
  const std::vector<DiscreteDistribution>& dists() const { return agents_; }
  double mu_max() const { return mu_max_; }
  double v_max() const { return v_max_; }

  /// Number of atom tuples in the full product support (saturating).
  double support_size() const {
    double s = 1.0;
    for (const auto& d : agents_) s *= static_cast<double>(d.size());
    return s;
  }

  static ProductPrior from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("agents") || !j["agents"].is_array())
      throw InvalidInputError("prior file: expected object with an \"agents\" array");
    std::vector<DiscreteDistribution> agents;
    std::size_t idx = 0;
    for (const auto& a : j["agents"]) {
      if (!a.is_object() || !a.contains("atoms") || !a["atoms"].is_array())
        throw InvalidInputError("prior file: agent " + std::to_string(idx) +
                                ": expected object with an \"atoms\" array");
      std::vector<std::pair<double, double>> atoms;
      std::size_t aidx = 0;
      for (const auto& atom : a["atoms"]) {
        if (!atom.is_array() || atom.size() != 2 || !atom[0].is_number() || !atom[1].is_number())
          throw InvalidInputError("prior file: agent " + std::to_string(idx) + ", atom " +
                                  std::to_string(aidx) + ": expected [value, mass]");
        atoms.emplace_back(atom[0].get<double>(), atom[1].get<double>());
        ++aidx;
      }
      try {
        agents.emplace_back(std::move(atoms));
      } catch (const Error& e) {
        throw InvalidInputError("prior file: agent " + std::to_string(idx) + ": " + e.what());
      }
      ++idx;
    }
    double v_max = std::numeric_limits<double>::quiet_NaN();
    if (j.contains("v_max")) v_max = j["v_max"].get<double>();
    return ProductPrior(std::move(agents), v_max);
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["agents"] = nlohmann::json::array();
    for (const auto& d : agents_) {
      nlohmann::json atoms = nlohmann::json::array();
      for (std::size_t k = 0; k < d.size(); ++k)
        atoms.push_back({d.value(k), d.mass(k)});
      j["agents"].push_back({{"atoms", std::move(atoms)}});
    }
    return j;
  }

  static ProductPrior load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInputError("cannot open prior file: " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw InvalidInputError("prior file " + path + ": " + e.what());
    }
    return from_json(j);
  }

 private:
  std::vector<DiscreteDistribution> agents_;
  double mu_max_ = 0.0;
  double v_max_ = 0.0;
};

/// Draw each agent's value independently from its marginal.
inline Profile sample_profile(const ProductPrior& prior, RandomStream& rng) {
  Profile v(prior.n());
  for (std::size_t i = 0; i < prior.n(); ++i) v[i] = prior.dist(i).sample(rng);
  return v;
}

/// Visit every atom tuple of the product support with its joint mass.
/// The profile reference stays owned by the iterator; copy if kept.
inline void for_each_profile(const ProductPrior& prior,
                             const std::function<void(const Profile&, double)>& fn) {
  const std::size_t n = prior.n();
  Profile v(n);
  std::function<void(std::size_t, double)> rec = [&](std::size_t i, double mass) {
    if (i == n) {
      fn(v, mass);
      return;
    }
    const auto& d = prior.dist(i);
    for (std::size_t j = 0; j < d.size(); ++j) {
      v[i] = d.value(j);
      rec(i + 1, mass * d.mass(j));
    }
  };
  rec(0, 1.0);
}

/// Visit every opponent tuple (all agents except `agent`), with the profile
/// buffer pre-filled at `agent` by the caller.
inline void for_each_opponent_tuple(const ProductPrior& prior, std::size_t agent, Profile& v,
                                    const std::function<void(const Profile&, double)>& fn) {
  const std::size_t n = prior.n();
  std::function<void(std::size_t, double)> rec = [&](std::size_t i, double mass) {
    if (i == n) {
      fn(v, mass);
      return;
    }
    if (i == agent) {
      rec(i + 1, mass);
      return;
    }
    const auto& d = prior.dist(i);
    for (std::size_t j = 0; j < d.size(); ++j) {
      v[i] = d.value(j);
      rec(i + 1, mass * d.mass(j));
    }
  };
  rec(0, 1.0);
}

}  // namespace bbic
