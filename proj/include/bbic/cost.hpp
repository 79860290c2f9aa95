#pragma once

#include <functional>
#include <limits>
#include <string>
#include <utility>

#include "bbic/errors.hpp"
#include "bbic/types.hpp"

namespace bbic {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Seller cost over allocations. +inf encodes infeasibility uniformly across
/// the three kinds; feasibility settings are the special case cost in
/// {0, +inf}, and downward-closed settings additionally promise that subsets
/// of feasible sets are feasible.
class CostModel {
 public:
  enum class Kind { General, Feasibility, DownwardClosed };

  static CostModel general(std::function<double(const Allocation&)> cost) {
    return CostModel(Kind::General, std::move(cost));
  }

  static CostModel feasibility(std::function<bool(const Allocation&)> feasible) {
    return from_predicate(Kind::Feasibility, std::move(feasible));
  }

  static CostModel downward_closed(std::function<bool(const Allocation&)> feasible) {
    return from_predicate(Kind::DownwardClosed, std::move(feasible));
  }

  /// Everything feasible at zero cost.
  static CostModel zero() {
    return downward_closed([](const Allocation&) { return true; });
  }

  Kind kind() const { return kind_; }
  bool is_feasibility_setting() const { return kind_ != Kind::General; }
  bool is_downward_closed() const { return kind_ == Kind::DownwardClosed; }

  double cost(const Allocation& x) const { return cost_(x); }
  bool feasible(const Allocation& x) const { return cost_(x) < kInf; }

 private:
  CostModel(Kind kind, std::function<double(const Allocation&)> cost)
      : kind_(kind), cost_(std::move(cost)) {}

  static CostModel from_predicate(Kind kind, std::function<bool(const Allocation&)> feasible) {
    return CostModel(kind, [pred = std::move(feasible)](const Allocation& x) {
      return pred(x) ? 0.0 : kInf;
    });
  }

  Kind kind_;
  std::function<double(const Allocation&)> cost_;
};

/// Social welfare sum_i v_i x_i - c(x); -inf when infeasible.
inline double welfare(const Profile& v, const Allocation& x, const CostModel& cost) {
  if (v.size() != x.size()) throw InvalidInputError("welfare: profile/allocation size mismatch");
  const double c = cost.cost(x);
  if (c == kInf) return -kInf;
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (x.is_served(i)) s += v[i];
  return s - c;
}

struct OptResult {
  double welfare = -kInf;
  Allocation alloc;
};

/// Exhaustive welfare maximum over all 2^n allocations; ties broken by the
/// lexicographically smallest allocation so golden values stay stable.
inline OptResult brute_force_opt(const Profile& v, const CostModel& cost) {
  const std::size_t n = v.size();
  if (n > 20)
    throw TooManyAgentsError("brute_force_opt: n = " + std::to_string(n) + " exceeds 20");
  OptResult best;
  best.alloc = Allocation::none(n);
  best.welfare = welfare(v, best.alloc, cost);
  Allocation x(n);
  const std::uint64_t lim = std::uint64_t{1} << n;
  for (std::uint64_t m = 1; m < lim; ++m) {
    for (std::size_t i = 0; i < n; ++i)
      x.served[i] = static_cast<std::uint8_t>((m >> (n - 1 - i)) & 1u);
    const double w = welfare(v, x, cost);
    if (w > best.welfare) {
      best.welfare = w;
      best.alloc = x;
    }
  }
  return best;
}

}  // namespace bbic
