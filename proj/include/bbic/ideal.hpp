#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "bbic/algorithm.hpp"
#include "bbic/curves.hpp"
#include "bbic/distribution.hpp"
#include "bbic/prior.hpp"

namespace bbic {

/// Valuation-space intervals on which the cumulative curve lies strictly
/// above its convex hull, mapped back through the atom grid. Closed and
/// atom-aligned; ironing exactly these makes the rule monotone. Intervals
/// that would cover a single atom are no-ops and are never emitted.
inline std::vector<ValueInterval> monotonizing_intervals(const CumulativeCurve& G,
                                                         const CumulativeCurve& hull,
                                                         const DiscreteDistribution& dist) {
  std::vector<ValueInterval> out;
  for (auto [first, last] : violation_runs(G, hull)) {
    if (last == first) continue;  // single-atom runs cannot arise except numerically
    out.push_back(ValueInterval{dist.value(first), dist.value(last), /*half_open=*/false});
  }
  return out;
}

/// The ironed algorithm: each agent whose value lands in one of its
/// intervals is resampled from the prior restricted to that interval, values
/// outside pass through untouched, then the inner algorithm runs on the
/// result. Resampling is independent across agents (agent-index order on the
/// stream) and, given the interval, independent of the original value.
inline AlgorithmOracle iron_on_intervals(const AlgorithmOracle& alg, const ProductPrior& prior,
                                         IntervalSet intervals) {
  const std::size_t n = alg.agents();
  if (intervals.per_agent.size() != n)
    throw InvalidInputError("interval set does not cover every agent");
  for (std::size_t i = 0; i < n; ++i) {
    const auto& list = intervals.per_agent[i];
    for (std::size_t k = 0; k + 1 < list.size(); ++k) {
      const bool disjoint = list[k].half_open ? list[k + 1].lo >= list[k].hi
                                              : list[k + 1].lo > list[k].hi;
      if (!disjoint)
        throw InvalidInputError("agent " + std::to_string(i) +
                                ": ironing intervals must be sorted and disjoint");
    }
  }
  auto iv = std::make_shared<const IntervalSet>(std::move(intervals));
  auto pr = std::make_shared<const ProductPrior>(prior);

  AlgorithmOracle::EvalFn eval = [alg, iv, pr, n](const Profile& v, RandomStream& rng) {
    Profile w = v;
    for (std::size_t i = 0; i < n; ++i) {
      const int k = iv->find(i, v[i]);
      if (k >= 0)
        w[i] = pr->dist(i).conditional_sample(iv->per_agent[i][static_cast<std::size_t>(k)], rng);
    }
    return alg.evaluate(w, rng);
  };

  AlgorithmOracle::OutcomesFn outcomes;
  if (alg.exact_available()) {
    outcomes = [alg, iv, pr, n](const Profile& v, const AlgorithmOracle::OutcomeFn& visit) {
      // Per-agent candidate values with conditional masses.
      std::vector<std::pair<int, int>> ranges(n, {0, -1});
      std::vector<double> totals(n, 1.0);
      Profile w = v;
      for (std::size_t i = 0; i < n; ++i) {
        const int k = iv->find(i, v[i]);
        if (k < 0) continue;
        const auto& interval = iv->per_agent[i][static_cast<std::size_t>(k)];
        ranges[i] = pr->dist(i).atom_range(interval);
        if (ranges[i].first > ranges[i].second)
          throw EmptyIntervalError("ironing interval holds no atoms");
        double t = 0.0;
        for (int j = ranges[i].first; j <= ranges[i].second; ++j)
          t += pr->dist(i).mass(static_cast<std::size_t>(j));
        totals[i] = t;
      }
      std::function<void(std::size_t, double)> rec = [&](std::size_t i, double p) {
        if (i == n) {
          alg.for_each_outcome(w, [&](const Allocation& x, double q) { visit(x, p * q); });
          return;
        }
        if (ranges[i].first > ranges[i].second) {
          rec(i + 1, p);
          return;
        }
        for (int j = ranges[i].first; j <= ranges[i].second; ++j) {
          w[i] = pr->dist(i).value(static_cast<std::size_t>(j));
          rec(i + 1, p * pr->dist(i).mass(static_cast<std::size_t>(j)) / totals[i]);
        }
        w[i] = v[i];
      };
      rec(0, 1.0);
    };
  }

  auto out = AlgorithmOracle::randomized(n, std::move(eval), std::move(outcomes));
  return out.with_ironing(*iv);
}

struct IdealIroningResult {
  AlgorithmOracle ironed;
  IntervalSet intervals;
  std::vector<InterimCurve> raw_curves;
  std::vector<InterimCurve> ironed_curves;
};

/// Full ideal-model reduction: exact interim curves, probability-space
/// transform, convex hull, monotonizing intervals per agent, then one
/// resampling wrapper carrying all agents' intervals. The ironed curves are
/// the hull slopes read back on the atom grid.
inline IdealIroningResult ideal_ironed_algorithm(const AlgorithmOracle& alg,
                                                 const ProductPrior& prior,
                                                 const ExactCurveOptions& opt = {}) {
  const std::size_t n = alg.agents();
  IdealIroningResult r;
  r.intervals.per_agent.resize(n);
  r.raw_curves.reserve(n);
  r.ironed_curves.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    InterimCurve raw = exact_interim_curve(alg, prior, i, opt);
    const auto& d = prior.dist(i);
    const CumulativeCurve G = cumulative_curve(raw, d);
    const CumulativeCurve hull = convex_hull(G);

    // Untouched atoms keep their exact raw probability; each ironed run takes
    // the hull's chord slope between its contact points (the hull crosses a
    // run in a single segment, so this is the hull slope at F_i(v)).
    InterimCurve ironed = raw;
    for (auto [first, last] : violation_runs(G, hull)) {
      if (last == first) continue;
      r.intervals.per_agent[i].push_back(
          ValueInterval{d.value(first), d.value(last), /*half_open=*/false});
      const double avg = (G.g[last + 1] - G.g[first]) / (G.q[last + 1] - G.q[first]);
      for (std::size_t j = first; j <= last; ++j) ironed.probs[j] = avg;
    }
    r.raw_curves.push_back(std::move(raw));
    r.ironed_curves.push_back(std::move(ironed));
  }
  r.ironed = iron_on_intervals(alg, prior, r.intervals);
  return r;
}

/// Exact marginal distribution of the value an ironed oracle feeds to its
/// inner algorithm: P(w_i = a) = P(v_i = a, a outside every interval)
///                              + sum_{I containing a} P(v_i in I) * mass(a) / mass(I).
inline std::vector<double> ironed_input_marginal(const ProductPrior& prior,
                                                 const IntervalSet& intervals,
                                                 std::size_t agent) {
  const auto& d = prior.dist(agent);
  std::vector<double> out(d.size(), 0.0);
  // Sum over origin atoms, redistributing each origin's mass the way the
  // resampling wrapper does.
  for (std::size_t j = 0; j < d.size(); ++j) {
    const int k = intervals.find(agent, d.value(j));
    if (k < 0) {
      out[j] += d.mass(j);
      continue;
    }
    const auto& iv = intervals.per_agent[agent][static_cast<std::size_t>(k)];
    auto [first, last] = d.atom_range(iv);
    double inside = 0.0;
    for (int t = first; t <= last; ++t) inside += d.mass(static_cast<std::size_t>(t));
    for (int t = first; t <= last; ++t) {
      const auto u = static_cast<std::size_t>(t);
      out[u] += d.mass(j) * (d.mass(u) / inside);
    }
  }
  return out;
}

}  // namespace bbic
