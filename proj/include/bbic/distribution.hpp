#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "bbic/errors.hpp"
#include "bbic/random.hpp"
#include "bbic/types.hpp"

namespace bbic {

inline constexpr double kMassTol = 1e-12;

/// Finite-support value distribution: ordered atoms with positive masses
/// summing to one, plus cached cdf breakpoints (prefix sums of masses).
class DiscreteDistribution {
 public:
  explicit DiscreteDistribution(std::vector<std::pair<double, double>> atoms) {
    if (atoms.empty()) throw InvalidInputError("distribution needs at least one atom");
    values_.reserve(atoms.size());
    masses_.reserve(atoms.size());
    cdf_.reserve(atoms.size());
    double sum = 0.0;
    for (std::size_t j = 0; j < atoms.size(); ++j) {
      const auto [v, m] = atoms[j];
      if (!(v >= 0.0))
        throw InvalidInputError("atom " + std::to_string(j) + ": value must be >= 0");
      if (!(m > 0.0))
        throw InvalidInputError("atom " + std::to_string(j) + ": mass must be > 0");
      if (j > 0 && !(v > values_.back()))
        throw InvalidInputError("atom " + std::to_string(j) + ": values must be strictly increasing");
      values_.push_back(v);
      masses_.push_back(m);
      sum += m;
      cdf_.push_back(sum);
    }
    if (std::abs(sum - 1.0) > kMassTol)
      throw InvalidInputError("atom masses sum to " + std::to_string(sum) + ", expected 1");
    cdf_.back() = 1.0;
  }

  static DiscreteDistribution singleton(double v) {
    return DiscreteDistribution({{v, 1.0}});
  }

  static DiscreteDistribution uniform(std::vector<double> values) {
    std::vector<std::pair<double, double>> atoms;
    atoms.reserve(values.size());
    const double m = 1.0 / static_cast<double>(values.size());
    for (double v : values) atoms.emplace_back(v, m);
    return DiscreteDistribution(std::move(atoms));
  }

  /// Grid discretization of a continuous distribution given its quantile
  /// function: `atoms` equal-mass atoms placed at quantile midpoints.
  static DiscreteDistribution from_quantile(const std::function<double(double)>& quantile,
                                            int atoms = 500) {
    if (atoms < 1) throw InvalidInputError("grid needs at least one atom");
    std::vector<std::pair<double, double>> out;
    out.reserve(static_cast<std::size_t>(atoms));
    const double m = 1.0 / atoms;
    for (int j = 0; j < atoms; ++j) {
      out.emplace_back(quantile((j + 0.5) * m), m);
    }
    return DiscreteDistribution(std::move(out));
  }

  std::size_t size() const { return values_.size(); }
  double value(std::size_t j) const { return values_[j]; }
  double mass(std::size_t j) const { return masses_[j]; }
  /// cdf(j) = P(v <= value(j)); the cached cdf breakpoints.
  double cdf(std::size_t j) const { return cdf_[j]; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& masses() const { return masses_; }

  double min_value() const { return values_.front(); }
  double max_value() const { return values_.back(); }

  double mean() const {
    double s = 0.0;
    for (std::size_t j = 0; j < size(); ++j) s += values_[j] * masses_[j];
    return s;
  }

  /// Index of the atom with exactly this value (tiny tolerance for storage
  /// round-trips), or -1 if the value is off support.
  int atom_index(double v) const {
    auto it = std::lower_bound(values_.begin(), values_.end(), v - match_tol(v));
    if (it == values_.end()) return -1;
    const auto j = static_cast<std::size_t>(it - values_.begin());
    if (std::abs(values_[j] - v) <= match_tol(v)) return static_cast<int>(j);
    return -1;
  }

  /// Largest atom index with value <= v, or -1 if v is below the support.
  int atom_index_at_or_below(double v) const {
    auto it = std::upper_bound(values_.begin(), values_.end(), v);
    if (it == values_.begin()) return -1;
    return static_cast<int>(it - values_.begin()) - 1;
  }

  /// [first, last] atom index range inside the interval; first > last when empty.
  std::pair<int, int> atom_range(const ValueInterval& iv) const {
    auto lo = std::lower_bound(values_.begin(), values_.end(), iv.lo);
    int first = static_cast<int>(lo - values_.begin());
    int last = first - 1;
    for (std::size_t j = static_cast<std::size_t>(first); j < size(); ++j) {
      if (!iv.contains(values_[j])) break;
      last = static_cast<int>(j);
    }
    return {first, last};
  }

  double interval_mass(const ValueInterval& iv) const {
    auto [first, last] = atom_range(iv);
    double m = 0.0;
    for (int j = first; j <= last; ++j) m += masses_[static_cast<std::size_t>(j)];
    return m;
  }

  double sample(RandomStream& rng) const {
    return values_[sample_index(rng)];
  }

  std::size_t sample_index(RandomStream& rng) const {
    const double u = rng.next_unit();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.end()) --it;
    return static_cast<std::size_t>(it - cdf_.begin());
  }

  /// Draw an atom inside the interval with probability proportional to its
  /// mass (the prior conditioned on the interval).
  double conditional_sample(const ValueInterval& iv, RandomStream& rng) const {
    auto [first, last] = atom_range(iv);
    if (first > last)
      throw EmptyIntervalError("no atom inside [" + std::to_string(iv.lo) + ", " +
                               std::to_string(iv.hi) + (iv.half_open ? ")" : "]"));
    if (first == last) return values_[static_cast<std::size_t>(first)];
    double total = 0.0;
    for (int j = first; j <= last; ++j) total += masses_[static_cast<std::size_t>(j)];
    double u = rng.next_unit() * total;
    for (int j = first; j < last; ++j) {
      u -= masses_[static_cast<std::size_t>(j)];
      if (u < 0.0) return values_[static_cast<std::size_t>(j)];
    }
    return values_[static_cast<std::size_t>(last)];
  }

 private:
  static double match_tol(double v) { return 1e-12 * std::max(1.0, std::abs(v)); }

  std::vector<double> values_;
  std::vector<double> masses_;
  std::vector<double> cdf_;
};

/// Free-function form of conditional resampling.
inline double conditional_sample(const DiscreteDistribution& dist, const ValueInterval& iv,
                                 RandomStream& rng) {
  return dist.conditional_sample(iv, rng);
}

}  // namespace bbic
