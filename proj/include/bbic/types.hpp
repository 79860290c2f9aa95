#pragma once
#include <utility>

#include <compare>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace bbic {

/// Agent valuations are non-negative reals in abstract money units.
using Value = double;

/// One reported/drawn value per agent.
using Profile = std::vector<Value>;

/// Binary allocation: served[i] is 1 iff agent i is served.
struct Allocation {
  std::vector<std::uint8_t> served;

  Allocation() = default;
  explicit Allocation(std::size_t n) : served(n, 0) {}
  Allocation(std::vector<std::uint8_t> bits) : served(std::move(bits)) {}

  static Allocation none(std::size_t n) { return Allocation(n); }
  static Allocation all(std::size_t n) {
    Allocation a(n);
    for (auto& s : a.served) s = 1;
    return a;
  }
  static Allocation single(std::size_t n, std::size_t i) {
    Allocation a(n);
    a.served[i] = 1;
    return a;
  }

  std::size_t size() const { return served.size(); }
  bool is_served(std::size_t i) const { return served[i] != 0; }
  void set(std::size_t i, bool on) { served[i] = on ? 1 : 0; }

  auto operator<=>(const Allocation&) const = default;
};

/// A value-space interval, closed by default. Half-open intervals [lo, hi)
/// are used by piecewise-constant structures; closed intervals [lo, hi] by
/// atom-aligned ironing. Under discrete priors the distinction never matters
/// at runtime (boundaries coincide with atoms by construction), but it keeps
/// reports faithful.
struct ValueInterval {
  double lo = 0.0;
  double hi = 0.0;
  bool half_open = false;

  bool contains(double v) const {
    return v >= lo && (half_open ? v < hi : v <= hi);
  }

  auto operator<=>(const ValueInterval&) const = default;
};

/// Disjoint resampling intervals per agent; the central reduction object.
struct IntervalSet {
  std::vector<std::vector<ValueInterval>> per_agent;

  std::size_t agents() const { return per_agent.size(); }

  bool empty() const {
    for (const auto& a : per_agent)
      if (!a.empty()) return false;
    return true;
  }

  /// Index of the interval containing v for the given agent, or -1.
  int find(std::size_t agent, double v) const {
    const auto& list = per_agent[agent];
    for (std::size_t k = 0; k < list.size(); ++k)
      if (list[k].contains(v)) return static_cast<int>(k);
    return -1;
  }
};

}  // namespace bbic
