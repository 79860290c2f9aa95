#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bbic/algorithm.hpp"
#include "bbic/cost.hpp"
#include "bbic/curves.hpp"
#include "bbic/ideal.hpp"
#include "bbic/prior.hpp"

namespace bbic {

/// Geometric discretization grid: [0, eps*mu_max) followed by
/// [eps*mu_max*(1+eps)^t, eps*mu_max*(1+eps)^{t+1}) while the lower endpoint
/// stays at or below v_max. Shared by every agent.
inline std::vector<ValueInterval> geometric_pieces(const ProductPrior& prior, double eps) {
  if (!(eps > 0.0 && eps < 1.0))
    throw BadEpsilonError("discretize: eps must lie in (0, 1)");
  const double mu = prior.mu_max();
  if (!(mu > 0.0)) throw BadEpsilonError("discretize: mu_max must be positive");
  std::vector<ValueInterval> pieces;
  const double base = eps * mu;
  pieces.push_back({0.0, base, true});
  double lo = base;
  while (lo <= prior.v_max()) {
    const double hi = lo * (1.0 + eps);
    pieces.push_back({lo, hi, true});
    lo = hi;
  }
  return pieces;
}

/// One piece per atom: [0, a_2), [a_2, a_3), ..., [a_m, v_max + 1). Any rule
/// over the prior's support is piecewise constant on this grid.
inline PieceStructure atom_pieces(const ProductPrior& prior) {
  PieceStructure p;
  p.per_agent.resize(prior.n());
  for (std::size_t i = 0; i < prior.n(); ++i) {
    const auto& d = prior.dist(i);
    for (std::size_t j = 0; j < d.size(); ++j) {
      const double lo = j == 0 ? 0.0 : d.value(j);
      const double hi = j + 1 < d.size() ? d.value(j + 1) : prior.v_max() + 1.0;
      p.per_agent[i].push_back({lo, hi, true});
    }
  }
  return p;
}

struct DiscretizeResult {
  AlgorithmOracle alg;      // the input rule resampled within every piece
  PieceStructure pieces;    // the raw geometric grid, identical per agent
};

/// The discretization of an algorithm: iron it on every geometric piece, so
/// its interim rules become piecewise constant on the grid.
inline DiscretizeResult discretize(const AlgorithmOracle& alg, const ProductPrior& prior,
                                   double eps) {
  auto grid = geometric_pieces(prior, eps);
  DiscretizeResult r;
  r.pieces = PieceStructure::shared(alg.agents(), grid);
  IntervalSet iv;
  iv.per_agent = r.pieces.per_agent;
  r.alg = iron_on_intervals(alg, prior, std::move(iv)).with_pieces(r.pieces);
  return r;
}

/// Per-agent grid with zero-mass pieces merged away: an empty piece joins its
/// left neighbor, leading empties join the first mass-carrying piece. Pieces
/// without prior mass cannot affect interim behavior, so the merged grid is
/// interim-equivalent and is the one estimation, the stair rule, and the
/// mixing weight count.
inline PieceStructure effective_pieces(const PieceStructure& raw, const ProductPrior& prior) {
  PieceStructure out;
  out.per_agent.resize(raw.agents());
  for (std::size_t i = 0; i < raw.agents(); ++i) {
    const auto& d = prior.dist(i);
    std::vector<ValueInterval> merged;
    bool pending = false;
    double pending_lo = 0.0;
    for (const auto& p : raw.per_agent[i]) {
      auto [first, last] = d.atom_range(p);
      if (first > last) {
        if (!merged.empty()) {
          merged.back().hi = p.hi;
        } else if (!pending) {
          pending = true;
          pending_lo = p.lo;
        }
        continue;
      }
      ValueInterval piece = p;
      if (pending) {
        piece.lo = pending_lo;
        pending = false;
      }
      merged.push_back(piece);
    }
    if (merged.empty())
      throw InvalidInputError("agent " + std::to_string(i) + ": no piece carries prior mass");
    out.per_agent[i] = std::move(merged);
  }
  return out;
}

/// Default sample budget for one estimation cell.
inline long long estimation_budget(double eps, std::size_t k, std::size_t n) {
  const double raw = 4.0 / (eps * eps) * std::log(2.0 * static_cast<double>(k) /
                                                  (static_cast<double>(n) * eps));
  return std::max<long long>(1, static_cast<long long>(std::ceil(raw)));
}

/// Default sample budget for one stair-compatibility cell.
inline long long stair_budget(double eps, std::size_t n) {
  const double raw =
      1.0 / (eps * eps) * std::log(static_cast<double>(n) / (2.0 * eps));
  return std::max<long long>(1, static_cast<long long>(std::ceil(raw)));
}

/// Estimated interim rule: per (agent, piece) mean allocation over budgeted
/// conditional samples. Cells whose piece carries no prior mass are skipped
/// and flagged undefined.
struct EstimatedRule {
  double eps = 0.0;
  long long samples_per_cell = 0;
  std::vector<std::vector<double>> y;       // [agent][piece]
  std::vector<std::vector<char>> defined;   // [agent][piece]

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["eps"] = eps;
    j["samples_per_cell"] = samples_per_cell;
    j["y"] = y;
    nlohmann::json def = nlohmann::json::array();
    for (const auto& row : defined) {
      nlohmann::json r = nlohmann::json::array();
      for (char c : row) r.push_back(static_cast<bool>(c));
      def.push_back(std::move(r));
    }
    j["defined"] = std::move(def);
    return j;
  }
};

struct EstimateOptions {
  long long samples_override = 0;  // 0 = formula budget
};

/// Sample the allocation rule cell by cell: agent i's value drawn from the
/// prior conditioned on the piece, opponents drawn from their marginals,
/// one black-box call per sample. Cell streams are derived as child(agent,
/// piece) so results are independent of evaluation order.
inline EstimatedRule estimate_rule(const AlgorithmOracle& alg, const ProductPrior& prior,
                                   const PieceStructure& pieces, double eps, RandomStream& rng,
                                   const EstimateOptions& opt = {}) {
  if (!(eps > 0.0 && eps < 1.0)) throw BadEpsilonError("estimate_rule: eps must lie in (0, 1)");
  const std::size_t n = alg.agents();
  std::size_t k = 0;
  for (std::size_t i = 0; i < pieces.agents(); ++i) k = std::max(k, pieces.count(i));
  EstimatedRule rule;
  rule.eps = eps;
  rule.samples_per_cell =
      opt.samples_override > 0 ? opt.samples_override : estimation_budget(eps, k, n);
  rule.y.resize(n);
  rule.defined.resize(n);
  Profile v(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& d = prior.dist(i);
    rule.y[i].assign(pieces.count(i), 0.0);
    rule.defined[i].assign(pieces.count(i), 0);
    for (std::size_t j = 0; j < pieces.count(i); ++j) {
      const auto& piece = pieces.per_agent[i][j];
      auto [first, last] = d.atom_range(piece);
      if (first > last) continue;  // zero-mass piece: skipped, flagged undefined
      RandomStream cell = rng.child(i, j);
      long long hits = 0;
      for (long long s = 0; s < rule.samples_per_cell; ++s) {
        for (std::size_t a = 0; a < n; ++a)
          v[a] = (a == i) ? d.conditional_sample(piece, cell) : prior.dist(a).sample(cell);
        if (alg.evaluate(v, cell).is_served(i)) ++hits;
      }
      rule.y[i][j] = static_cast<double>(hits) / static_cast<double>(rule.samples_per_cell);
      rule.defined[i][j] = 1;
    }
  }
  return rule;
}

struct StatisticalIronResult {
  AlgorithmOracle alg;
  IntervalSet intervals;
  EstimatedRule rule;
  PieceStructure pieces;  // the effective grid the estimate lives on
};

/// Statistically ironed algorithm: estimate the rule on the mass-carrying
/// grid, treat the estimate as an exact piecewise-constant curve (piece
/// masses as atom masses), run the hull pipeline on it, and resample the
/// input algorithm on the resulting intervals.
inline StatisticalIronResult statistical_iron(const AlgorithmOracle& alg,
                                              const ProductPrior& prior,
                                              const PieceStructure& pieces, double eps,
                                              RandomStream& rng,
                                              const EstimateOptions& opt = {}) {
  StatisticalIronResult r;
  r.pieces = effective_pieces(pieces, prior);
  r.rule = estimate_rule(alg, prior, r.pieces, eps, rng, opt);
  const std::size_t n = alg.agents();
  r.intervals.per_agent.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& grid = r.pieces.per_agent[i];
    CumulativeCurve c;
    c.q.push_back(0.0);
    c.g.push_back(0.0);
    double q_acc = 0.0, g_acc = 0.0;
    for (std::size_t j = 0; j < grid.size(); ++j) {
      const double mass = prior.dist(i).interval_mass(grid[j]);
      q_acc += mass;
      g_acc += mass * r.rule.y[i][j];
      c.q.push_back(q_acc);
      c.g.push_back(g_acc);
    }
    c.q.back() = 1.0;
    const CumulativeCurve hull = convex_hull(c);
    for (auto [first, last] : violation_runs(c, hull)) {
      if (last == first) continue;
      r.intervals.per_agent[i].push_back(
          ValueInterval{grid[first].lo, grid[last].hi, /*half_open=*/true});
    }
  }
  r.alg = iron_on_intervals(alg, prior, r.intervals).with_pieces(r.pieces);
  return r;
}

/// Stair metadata: per-agent allocation S_i (always containing i), the
/// 1-based piece index where it was found (k+1 when the fallback {i} was
/// used), and the stair threshold w_i.
struct StairSets {
  std::vector<Allocation> sets;
  std::vector<std::size_t> piece_choice;
  std::vector<double> thresholds;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["sets"] = nlohmann::json::array();
    for (const auto& s : sets) {
      nlohmann::json bits = nlohmann::json::array();
      for (auto b : s.served) bits.push_back(static_cast<int>(b));
      j["sets"].push_back(std::move(bits));
    }
    j["piece_choice"] = piece_choice;
    j["thresholds"] = nlohmann::json::array();
    for (double w : thresholds)
      j["thresholds"].push_back(std::isinf(w) ? nlohmann::json("inf") : nlohmann::json(w));
    return j;
  }
};

/// The blatantly monotone stair rule: pick an agent uniformly; if its value
/// sits in piece j (1-based from the lowest of its k pieces), allocate S_i
/// with probability (j-1)/(k-1), else allocate nothing. A single piece never
/// allocates.
inline AlgorithmOracle stair(const PieceStructure& pieces, const StairSets& sets,
                             std::size_t n) {
  if (sets.sets.size() != n || pieces.agents() != n)
    throw InvalidInputError("stair: sets/pieces must cover every agent");
  for (std::size_t i = 0; i < n; ++i)
    if (!sets.sets[i].is_served(i))
      throw InvalidInputError("stair: S_i must contain agent " + std::to_string(i));
  auto ps = std::make_shared<const PieceStructure>(pieces);
  auto ss = std::make_shared<const StairSets>(sets);

  auto serve_prob = [ps](std::size_t i, double vi) {
    const std::size_t k = ps->count(i);
    if (k <= 1) return 0.0;
    const std::size_t j = ps->piece_index(i, vi);
    return static_cast<double>(j) / static_cast<double>(k - 1);
  };

  AlgorithmOracle::EvalFn eval = [ps, ss, serve_prob, n](const Profile& v, RandomStream& rng) {
    const auto i = static_cast<std::size_t>(rng.uniform_index(n));
    const double p = serve_prob(i, v[i]);
    const double u = rng.next_unit();
    return u < p ? ss->sets[i] : Allocation::none(n);
  };
  AlgorithmOracle::OutcomesFn outcomes = [ps, ss, serve_prob, n](
                                             const Profile& v,
                                             const AlgorithmOracle::OutcomeFn& visit) {
    const double w = 1.0 / static_cast<double>(n);
    double none = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double p = serve_prob(i, v[i]);
      if (p > 0.0) visit(ss->sets[i], w * p);
      none += w * (1.0 - p);
    }
    if (none > 0.0) visit(Allocation::none(n), none);
  };
  return AlgorithmOracle::randomized(n, std::move(eval), std::move(outcomes));
}

/// Convex combination: run `rare` with probability delta, `common`
/// otherwise. One Bernoulli per invocation, drawn before anything else.
inline AlgorithmOracle mix(const AlgorithmOracle& common, const AlgorithmOracle& rare,
                           double delta) {
  const std::size_t n = common.agents();
  AlgorithmOracle::EvalFn eval = [common, rare, delta](const Profile& v, RandomStream& rng) {
    const bool take_rare = rng.bernoulli(delta);
    return take_rare ? rare.evaluate(v, rng) : common.evaluate(v, rng);
  };
  AlgorithmOracle::OutcomesFn outcomes;
  if (common.exact_available() && rare.exact_available()) {
    outcomes = [common, rare, delta](const Profile& v, const AlgorithmOracle::OutcomeFn& visit) {
      if (delta < 1.0)
        common.for_each_outcome(
            v, [&](const Allocation& x, double p) { visit(x, (1.0 - delta) * p); });
      if (delta > 0.0)
        rare.for_each_outcome(v, [&](const Allocation& x, double p) { visit(x, delta * p); });
    };
  }
  return AlgorithmOracle::randomized(n, std::move(eval), std::move(outcomes));
}

struct StairCompatResult {
  AlgorithmOracle alg;
  PieceStructure pieces;  // post-merge grid: pieces left of the find are one
  StairSets sets;
};

struct StairCompatOptions {
  long long samples_override = 0;
};

/// Stair-compatible version of a piecewise-constant algorithm: for each
/// agent, sample each piece bottom-up for an allocation T containing the
/// agent with cost at most (piece lower endpoint + n*mu_max/sqrt(eps)); iron
/// together every piece left of the first find (all of them when nothing is
/// found, with S_i = {i}).
inline StairCompatResult stair_compatible(const AlgorithmOracle& alg, const ProductPrior& prior,
                                          const PieceStructure& pieces, const CostModel& cost,
                                          double eps, RandomStream& rng,
                                          const StairCompatOptions& opt = {}) {
  if (!(eps > 0.0 && eps < 1.0))
    throw BadEpsilonError("stair_compatible: eps must lie in (0, 1)");
  const std::size_t n = alg.agents();
  const long long budget =
      opt.samples_override > 0 ? opt.samples_override : stair_budget(eps, n);
  const double allowance =
      static_cast<double>(n) * prior.mu_max() / std::sqrt(eps);

  StairCompatResult r;
  r.pieces.per_agent.resize(n);
  r.sets.sets.resize(n);
  r.sets.piece_choice.resize(n);
  r.sets.thresholds.resize(n);

  IntervalSet left_merge;
  left_merge.per_agent.resize(n);

  Profile v(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& d = prior.dist(i);
    const auto& grid = pieces.per_agent[i];
    const std::size_t k = grid.size();
    std::size_t found_piece = k;  // 0-based; k means fallback
    Allocation found_set;
    for (std::size_t j = 0; j < k && found_piece == k; ++j) {
      auto [first, last] = d.atom_range(grid[j]);
      if (first > last) continue;  // no prior mass, nothing to sample
      RandomStream cell = rng.child(i, j);
      for (long long s = 0; s < budget; ++s) {
        for (std::size_t a = 0; a < n; ++a)
          v[a] = (a == i) ? d.conditional_sample(grid[j], cell) : prior.dist(a).sample(cell);
        Allocation x = alg.evaluate(v, cell);
        if (!x.is_served(i)) continue;
        if (cost.cost(x) <= grid[j].lo + allowance) {
          found_piece = j;
          found_set = std::move(x);
          break;
        }
      }
    }

    if (found_piece == k) {
      r.sets.sets[i] = Allocation::single(n, i);
      r.sets.piece_choice[i] = k + 1;
      r.sets.thresholds[i] = std::numeric_limits<double>::infinity();
      // All pieces ironed together.
      left_merge.per_agent[i].push_back(ValueInterval{grid.front().lo, grid.back().hi, true});
      r.pieces.per_agent[i] = {ValueInterval{grid.front().lo, grid.back().hi, true}};
      continue;
    }

    r.sets.sets[i] = found_set;
    r.sets.piece_choice[i] = found_piece + 1;
    std::vector<ValueInterval> merged;
    if (found_piece == 0) {
      merged = grid;
    } else {
      merged.push_back(ValueInterval{grid.front().lo, grid[found_piece].lo, true});
      for (std::size_t j = found_piece; j < k; ++j) merged.push_back(grid[j]);
      left_merge.per_agent[i].push_back(merged.front());
    }
    r.sets.thresholds[i] = merged.front().hi;
    r.pieces.per_agent[i] = std::move(merged);
  }

  r.alg = iron_on_intervals(alg, prior, left_merge).with_pieces(r.pieces);
  return r;
}

struct MonotonizeResult {
  AlgorithmOracle alg;          // the BIC composite
  AlgorithmOracle ironed;       // the statistically ironed branch
  AlgorithmOracle stair_alg;    // the stair branch
  AlgorithmOracle pre_ironing;  // the stair-compatible stage the estimate sampled
  StairSets sets;
  double delta = 0.0;
  PieceStructure pieces;     // stair-compatible grid (what k counts)
  IntervalSet intervals;     // statistical-ironing intervals
  EstimatedRule rule;
  long long estimation_calls = 0;
  long long stair_search_calls = 0;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["delta"] = delta;
    j["pieces"] = nlohmann::json::array();
    for (const auto& agent : pieces.per_agent) {
      nlohmann::json row = nlohmann::json::array();
      for (const auto& p : agent) row.push_back({p.lo, p.hi});
      j["pieces"].push_back(std::move(row));
    }
    j["intervals"] = nlohmann::json::array();
    for (const auto& agent : intervals.per_agent) {
      nlohmann::json row = nlohmann::json::array();
      for (const auto& p : agent) row.push_back({p.lo, p.hi});
      j["intervals"].push_back(std::move(row));
    }
    j["stair"] = sets.to_json();
    j["estimated_rule"] = rule.to_json();
    j["calls"] = {{"estimation", estimation_calls}, {"stair_search", stair_search_calls}};
    return j;
  }
};

struct MonotonizeOptions {
  long long samples_override = 0;
  long long stair_samples_override = 0;
};

/// Full oracle-model monotonization: discretize, make stair-compatible,
/// statistically iron, then mix in the stair rule with probability
/// delta = 2(k-1) n eps. Raises DeltaOverflow instead of clamping: a
/// truncated delta would void the mixing lemma's exact cancellation.
inline MonotonizeResult monotonize(const AlgorithmOracle& alg, const ProductPrior& prior,
                                   const CostModel& cost, double eps, RandomStream& rng,
                                   const MonotonizeOptions& opt = {}) {
  if (!(eps > 0.0 && eps < 1.0)) throw BadEpsilonError("monotonize: eps must lie in (0, 1)");
  const std::size_t n = alg.agents();

  DiscretizeResult disc = discretize(alg, prior, eps);
  const PieceStructure eff = effective_pieces(disc.pieces, prior);

  const long long calls_before_stair = alg.calls();
  RandomStream stair_rng = rng.child(0x5741u);
  StairCompatResult sc = stair_compatible(disc.alg, prior, eff, cost, eps, stair_rng,
                                          {opt.stair_samples_override});
  const long long calls_before_est = alg.calls();

  RandomStream est_rng = rng.child(0x4553u);
  StatisticalIronResult si =
      statistical_iron(sc.alg, prior, sc.pieces, eps, est_rng, {opt.samples_override});

  MonotonizeResult r;
  r.stair_search_calls = calls_before_est - calls_before_stair;
  r.estimation_calls = alg.calls() - calls_before_est;
  r.sets = sc.sets;
  r.pieces = sc.pieces;
  r.intervals = si.intervals;
  r.rule = si.rule;
  r.ironed = si.alg;
  r.pre_ironing = sc.alg;
  r.stair_alg = stair(sc.pieces, sc.sets, n);

  std::size_t k = 0;
  for (std::size_t i = 0; i < sc.pieces.agents(); ++i) k = std::max(k, sc.pieces.count(i));
  r.delta = 2.0 * static_cast<double>(k - 1) * static_cast<double>(n) * eps;
  if (r.delta > 1.0)
    throw DeltaOverflowError("monotonize: delta = " + std::to_string(r.delta) +
                             " exceeds 1; shrink eps for this instance (k = " +
                             std::to_string(k) + ", n = " + std::to_string(n) + ")");
  r.alg = mix(si.alg, r.stair_alg, r.delta).with_pieces(sc.pieces);
  return r;
}

}  // namespace bbic
