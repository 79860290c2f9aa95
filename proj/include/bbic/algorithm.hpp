#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bbic/errors.hpp"
#include "bbic/prior.hpp"
#include "bbic/random.hpp"
#include "bbic/types.hpp"

namespace bbic {

/// Per-agent ordered half-open intervals partitioning [0, v_max]; the grid a
/// piecewise-constant algorithm is constant on.
struct PieceStructure {
  std::vector<std::vector<ValueInterval>> per_agent;

  std::size_t agents() const { return per_agent.size(); }
  std::size_t count(std::size_t agent) const { return per_agent[agent].size(); }

  /// Identical pieces for every agent.
  static PieceStructure shared(std::size_t n, std::vector<ValueInterval> pieces) {
    PieceStructure p;
    p.per_agent.assign(n, std::move(pieces));
    return p;
  }

  /// 0-based index of the piece containing v.
  std::size_t piece_index(std::size_t agent, double v) const {
    const auto& list = per_agent[agent];
    for (std::size_t j = 0; j < list.size(); ++j)
      if (list[j].contains(v)) return j;
    throw InvalidInputError("value " + std::to_string(v) + " outside the piece structure");
  }
};

/// The black box: an allocation rule mapping valuation profiles (plus
/// explicit randomness) to allocations.
///
/// evaluate() is a deterministic function of (profile, stream state) and is
/// what the call counter audits. Oracles built from closed-form pieces
/// (tables, resampling wrappers, stair mixes) also expose exact outcome
/// enumeration, from which interim expectations are computed without
/// sampling. Oracles are immutable and safe to share; copies share the call
/// counter.
class AlgorithmOracle {
 public:
  using OutcomeFn = std::function<void(const Allocation&, double)>;
  using EvalFn = std::function<Allocation(const Profile&, RandomStream&)>;
  using OutcomesFn = std::function<void(const Profile&, const OutcomeFn&)>;

  AlgorithmOracle() = default;

  /// Deterministic rule: exact outcomes come straight from the function.
  static AlgorithmOracle deterministic(std::size_t n,
                                       std::function<Allocation(const Profile&)> fn) {
    auto shared_fn = std::make_shared<std::function<Allocation(const Profile&)>>(std::move(fn));
    AlgorithmOracle a;
    a.impl_ = std::make_shared<Impl>();
    a.impl_->n = n;
    a.impl_->eval = [shared_fn](const Profile& v, RandomStream&) { return (*shared_fn)(v); };
    a.impl_->outcomes = [shared_fn](const Profile& v, const OutcomeFn& visit) {
      visit((*shared_fn)(v), 1.0);
    };
    return a;
  }

  /// Randomized rule; pass an outcome enumerator when the distribution over
  /// allocations has a closed form, otherwise exact machinery is unavailable
  /// and interim curves fall back to inner Monte Carlo.
  static AlgorithmOracle randomized(std::size_t n, EvalFn eval, OutcomesFn outcomes = nullptr) {
    AlgorithmOracle a;
    a.impl_ = std::make_shared<Impl>();
    a.impl_->n = n;
    a.impl_->eval = std::move(eval);
    a.impl_->outcomes = std::move(outcomes);
    return a;
  }

  bool valid() const { return impl_ != nullptr; }
  std::size_t agents() const { return impl_->n; }

  Allocation evaluate(const Profile& v, RandomStream& rng) const {
    impl_->calls.fetch_add(1, std::memory_order_relaxed);
    return impl_->eval(v, rng);
  }

  bool exact_available() const { return static_cast<bool>(impl_->outcomes); }

  /// Enumerate the (allocation, probability) outcomes on this profile.
  void for_each_outcome(const Profile& v, const OutcomeFn& visit) const {
    if (!exact_available())
      throw InvalidInputError("oracle has no exact outcome enumeration");
    impl_->outcomes(v, visit);
  }

  /// Exact E[x_i | profile] for one agent.
  double expected_allocation_of(const Profile& v, std::size_t agent) const {
    double s = 0.0;
    for_each_outcome(v, [&](const Allocation& x, double p) {
      if (x.is_served(agent)) s += p;
    });
    return s;
  }

  /// Exact E[x | profile] for all agents.
  std::vector<double> expected_allocation(const Profile& v) const {
    std::vector<double> s(agents(), 0.0);
    for_each_outcome(v, [&](const Allocation& x, double p) {
      for (std::size_t i = 0; i < s.size(); ++i)
        if (x.is_served(i)) s[i] += p;
    });
    return s;
  }

  /// Black-box invocation counter (shared across copies of this oracle).
  long long calls() const { return impl_->calls.load(std::memory_order_relaxed); }
  void reset_calls() const { impl_->calls.store(0, std::memory_order_relaxed); }

  const PieceStructure* pieces() const {
    return impl_->pieces ? &*impl_->pieces : nullptr;
  }

  /// Same rule annotated with a piecewise-constant structure.
  AlgorithmOracle with_pieces(PieceStructure pieces) const {
    AlgorithmOracle a;
    a.impl_ = std::make_shared<Impl>(*impl_);
    a.impl_->pieces = std::move(pieces);
    return a;
  }

  /// Resampling intervals, present on oracles built by iron_on_intervals.
  const IntervalSet* ironing() const {
    return impl_->ironing ? &*impl_->ironing : nullptr;
  }

  AlgorithmOracle with_ironing(IntervalSet intervals) const {
    AlgorithmOracle a;
    a.impl_ = std::make_shared<Impl>(*impl_);
    a.impl_->ironing = std::move(intervals);
    return a;
  }

 private:
  struct Impl {
    Impl() = default;
    Impl(const Impl& o) : n(o.n), eval(o.eval), outcomes(o.outcomes), pieces(o.pieces), ironing(o.ironing) {}
    std::size_t n = 0;
    EvalFn eval;
    OutcomesFn outcomes;
    std::optional<PieceStructure> pieces;
    std::optional<IntervalSet> ironing;
    mutable std::atomic<long long> calls{0};
  };

  std::shared_ptr<Impl> impl_;
};

/// Make an atoms-only rule total over arbitrary reports: each coordinate is
/// snapped to the nearest atom at or below it, and an agent reporting below
/// its lowest atom is never served (its slot is evaluated at the lowest atom
/// so the rest of the allocation stays defined). This realizes the step
/// convention used by exact_payment between atoms.
inline AlgorithmOracle snap_to_support(const AlgorithmOracle& alg, const ProductPrior& prior) {
  const std::size_t n = alg.agents();
  auto snap = [prior](const Profile& v, std::vector<std::uint8_t>& phantom) {
    Profile s(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto& d = prior.dist(i);
      const int j = d.atom_index_at_or_below(v[i]);
      if (j < 0) {
        s[i] = d.min_value();
        phantom[i] = 1;
      } else {
        s[i] = d.value(static_cast<std::size_t>(j));
        phantom[i] = 0;
      }
    }
    return s;
  };
  AlgorithmOracle::EvalFn eval = [alg, snap, n](const Profile& v, RandomStream& rng) {
    std::vector<std::uint8_t> phantom(n, 0);
    const Profile s = snap(v, phantom);
    Allocation x = alg.evaluate(s, rng);
    for (std::size_t i = 0; i < n; ++i)
      if (phantom[i]) x.served[i] = 0;
    return x;
  };
  AlgorithmOracle::OutcomesFn outcomes;
  if (alg.exact_available()) {
    outcomes = [alg, snap, n](const Profile& v, const AlgorithmOracle::OutcomeFn& visit) {
      std::vector<std::uint8_t> phantom(n, 0);
      const Profile s = snap(v, phantom);
      alg.for_each_outcome(s, [&](const Allocation& x, double p) {
        Allocation y = x;
        for (std::size_t i = 0; i < n; ++i)
          if (phantom[i]) y.served[i] = 0;
        visit(y, p);
      });
    };
  }
  return AlgorithmOracle::randomized(n, std::move(eval), std::move(outcomes));
}

}  // namespace bbic
