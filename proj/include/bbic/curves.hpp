#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "bbic/algorithm.hpp"
#include "bbic/distribution.hpp"
#include "bbic/errors.hpp"
#include "bbic/prior.hpp"

namespace bbic {

inline constexpr double kHullTol = 1e-12;

/// One agent's interim allocation rule x_i(v_i) on the atom grid. Between
/// atoms the rule is read as a right-continuous step function; below the
/// lowest atom it extends as below_support (0 unless the mechanism behind
/// the curve actually serves sub-support reports).
struct InterimCurve {
  std::size_t agent = 0;
  std::vector<double> values;
  std::vector<double> probs;
  bool estimated = false;
  long long samples_per_point = 0;
  double below_support = 0.0;

  std::size_t size() const { return values.size(); }
};

/// Cumulative allocation rule in probability space: piecewise-linear
/// breakpoints (q, G(q)) with q increasing from 0 to 1 and G(0) = 0. Each
/// atom of mass p owns a half-open q-interval of width p whose segment slope
/// is the atom's allocation probability, so G(1) = E[x_i(v_i)].
struct CumulativeCurve {
  std::vector<double> q;
  std::vector<double> g;

  std::size_t segments() const { return q.size() - 1; }

  double slope(std::size_t seg) const {
    return (g[seg + 1] - g[seg]) / (q[seg + 1] - q[seg]);
  }

  double value_at(double qq) const {
    if (qq <= q.front()) return g.front();
    if (qq >= q.back()) return g.back();
    auto it = std::upper_bound(q.begin(), q.end(), qq);
    const auto s = static_cast<std::size_t>(it - q.begin()) - 1;
    const double t = (qq - q[s]) / (q[s + 1] - q[s]);
    return g[s] + t * (g[s + 1] - g[s]);
  }

  /// Slope of the segment containing qq (interior points only).
  double slope_at(double qq) const {
    auto it = std::upper_bound(q.begin(), q.end(), qq);
    std::size_t s = static_cast<std::size_t>(it - q.begin());
    if (s == 0) s = 1;
    if (s >= q.size()) s = q.size() - 1;
    return slope(s - 1);
  }
};

struct ExactCurveOptions {
  double max_support = 1e6;       // opponent-tuple cap for exact mode
  long long mc_samples = 10000;   // per-atom budget when no exact machinery
  std::uint64_t mc_seed = 20210604;
};

/// Exact interim curve by enumeration over opponent atom tuples. Randomized
/// oracles without closed-form outcomes fall back to per-atom inner Monte
/// Carlo and the curve is flagged estimated.
inline InterimCurve exact_interim_curve(const AlgorithmOracle& alg, const ProductPrior& prior,
                                        std::size_t agent,
                                        const ExactCurveOptions& opt = {}) {
  const auto& d = prior.dist(agent);
  InterimCurve curve;
  curve.agent = agent;
  curve.values = d.values();
  curve.probs.assign(d.size(), 0.0);

  if (alg.exact_available()) {
    double opp = 1.0;
    for (std::size_t j = 0; j < prior.n(); ++j)
      if (j != agent) opp *= static_cast<double>(prior.dist(j).size());
    if (opp > opt.max_support)
      throw SupportTooLargeError("opponent support has " + std::to_string(opp) +
                                 " tuples, cap is " + std::to_string(opt.max_support));
    Profile v(prior.n());
    for (std::size_t a = 0; a < d.size(); ++a) {
      v[agent] = d.value(a);
      double x = 0.0;
      for_each_opponent_tuple(prior, agent, v, [&](const Profile& p, double mass) {
        x += mass * alg.expected_allocation_of(p, agent);
      });
      curve.probs[a] = x;
    }
    return curve;
  }

  curve.estimated = true;
  curve.samples_per_point = opt.mc_samples;
  RandomStream base(opt.mc_seed);
  for (std::size_t a = 0; a < d.size(); ++a) {
    RandomStream rng = base.child(agent, a);
    Profile v(prior.n());
    long long hits = 0;
    for (long long s = 0; s < opt.mc_samples; ++s) {
      for (std::size_t j = 0; j < prior.n(); ++j)
        if (j != agent) v[j] = prior.dist(j).sample(rng);
      v[agent] = d.value(a);
      if (alg.evaluate(v, rng).is_served(agent)) ++hits;
    }
    curve.probs[a] = static_cast<double>(hits) / static_cast<double>(opt.mc_samples);
  }
  return curve;
}

/// Probability-space transform of an exact interim curve: breakpoints at the
/// distribution's cdf values, segment slopes equal to the atom allocations.
inline CumulativeCurve cumulative_curve(const InterimCurve& curve,
                                        const DiscreteDistribution& dist) {
  if (curve.size() != dist.size())
    throw GridMismatchError("curve has " + std::to_string(curve.size()) + " points, distribution " +
                            std::to_string(dist.size()) + " atoms");
  for (std::size_t j = 0; j < curve.size(); ++j) {
    if (std::abs(curve.values[j] - dist.value(j)) > 1e-9 * std::max(1.0, dist.value(j)))
      throw GridMismatchError("curve grid does not match the atom grid at index " +
                              std::to_string(j));
    if (curve.probs[j] < -kMassTol || curve.probs[j] > 1.0 + kMassTol)
      throw InvalidInputError("allocation probability outside [0, 1]");
  }
  CumulativeCurve c;
  c.q.reserve(dist.size() + 1);
  c.g.reserve(dist.size() + 1);
  c.q.push_back(0.0);
  c.g.push_back(0.0);
  double acc = 0.0;
  for (std::size_t j = 0; j < dist.size(); ++j) {
    acc += dist.mass(j) * curve.probs[j];
    c.q.push_back(dist.cdf(j));
    c.g.push_back(acc);
  }
  return c;
}

/// Lower convex hull of the breakpoints: hull <= curve pointwise, convex,
/// equal at q = 0 and q = 1. Monotone-chain scan; collinear breakpoints stay
/// on the hull so flat regions produce no spurious ironing interval.
inline CumulativeCurve convex_hull(const CumulativeCurve& c) {
  const std::size_t m = c.q.size();
  std::vector<std::size_t> hull;
  hull.reserve(m);
  for (std::size_t j = 0; j < m; ++j) {
    while (hull.size() >= 2) {
      const std::size_t a = hull[hull.size() - 2];
      const std::size_t b = hull[hull.size() - 1];
      // Pop b when it lies strictly above chord a->j.
      const double lhs = (c.g[b] - c.g[a]) * (c.q[j] - c.q[a]);
      const double rhs = (c.g[j] - c.g[a]) * (c.q[b] - c.q[a]);
      if (lhs > rhs + kHullTol * std::max(1.0, std::abs(rhs)))
        hull.pop_back();
      else
        break;
    }
    hull.push_back(j);
  }
  CumulativeCurve out;
  out.q.reserve(hull.size());
  out.g.reserve(hull.size());
  for (auto j : hull) {
    out.q.push_back(c.q[j]);
    out.g.push_back(c.g[j]);
  }
  return out;
}

/// Maximal runs of segments on which the curve lies strictly above its hull,
/// split at every contact point. Returned as [first, last] segment-index
/// pairs (segments are 0-based; segment j covers (q_j, q_{j+1}]).
inline std::vector<std::pair<std::size_t, std::size_t>> violation_runs(
    const CumulativeCurve& c, const CumulativeCurve& hull) {
  const std::size_t m = c.segments();
  std::vector<double> d(m + 1, 0.0);
  for (std::size_t j = 0; j <= m; ++j) d[j] = c.g[j] - hull.value_at(c.q[j]);
  std::vector<std::pair<std::size_t, std::size_t>> runs;
  std::size_t start = 0;
  bool open = false;
  for (std::size_t seg = 0; seg < m; ++seg) {
    const bool active = d[seg] > kHullTol || d[seg + 1] > kHullTol;
    if (active && !open) {
      start = seg;
      open = true;
    }
    if (open && d[seg + 1] <= kHullTol) {  // contact at the right endpoint
      runs.emplace_back(start, seg);
      open = false;
    }
  }
  if (open) runs.emplace_back(start, m - 1);
  return runs;
}

}  // namespace bbic
