#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bbic/algorithm.hpp"
#include "bbic/cost.hpp"
#include "bbic/curves.hpp"
#include "bbic/ideal.hpp"
#include "bbic/payments.hpp"
#include "bbic/prior.hpp"

namespace bbic {

struct MonotoneViolation {
  std::size_t index = 0;  // lower atom of the offending adjacent pair
  double value_lo = 0.0;
  double value_hi = 0.0;
  double gap = 0.0;  // x(lo) - x(hi) > tol
};

/// Adjacent atom pairs where the curve strictly decreases beyond tol.
inline std::vector<MonotoneViolation> check_monotone(const InterimCurve& curve,
                                                     double tol = 1e-9) {
  std::vector<MonotoneViolation> out;
  for (std::size_t j = 0; j + 1 < curve.size(); ++j) {
    if (curve.probs[j + 1] < curve.probs[j] - tol) {
      out.push_back({j, curve.values[j], curve.values[j + 1],
                     curve.probs[j] - curve.probs[j + 1]});
    }
  }
  return out;
}

/// Max pointwise absolute gap between two rules on a shared grid.
inline double eps_closeness(const InterimCurve& a, const InterimCurve& b) {
  if (a.size() != b.size())
    throw GridMismatchError("eps_closeness: curve sizes differ");
  double m = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (std::abs(a.values[j] - b.values[j]) > 1e-9 * std::max(1.0, std::abs(a.values[j])))
      throw GridMismatchError("eps_closeness: atom grids differ at index " + std::to_string(j));
    m = std::max(m, std::abs(a.probs[j] - b.probs[j]));
  }
  return m;
}

/// Exact best-response regret against the BIC payment identity: the most any true
/// type gains by reporting some other atom. Deviations between atoms give
/// constant utility across each gap under the step convention, so the atom
/// grid attains the maximum.
inline double best_response_regret(const InterimCurve& curve, const DiscreteDistribution& dist) {
  const std::size_t m = curve.size();
  std::vector<double> pay(m);
  for (std::size_t j = 0; j < m; ++j) pay[j] = exact_payment(curve, dist, curve.values[j]);
  double regret = 0.0;
  for (std::size_t t = 0; t < m; ++t) {
    const double truthful = curve.values[t] * curve.probs[t] - pay[t];
    for (std::size_t r = 0; r < m; ++r) {
      const double deviate = curve.values[t] * curve.probs[r] - pay[r];
      regret = std::max(regret, deviate - truthful);
    }
  }
  return regret;
}

inline double best_response_regret(const AlgorithmOracle& alg, const ProductPrior& prior,
                                   std::size_t agent, const ExactCurveOptions& opt = {}) {
  return best_response_regret(exact_interim_curve(alg, prior, agent, opt), prior.dist(agent));
}

/// Exact expected welfare of an algorithm under the prior (needs exact
/// outcome machinery; -inf if any reachable outcome is infeasible).
inline double expected_welfare(const AlgorithmOracle& alg, const ProductPrior& prior,
                               const CostModel& cost) {
  double total = 0.0;
  for_each_profile(prior, [&](const Profile& v, double mass) {
    double w = 0.0;
    alg.for_each_outcome(v, [&](const Allocation& x, double p) {
      w += p * welfare(v, x, cost);
    });
    total += mass * w;
  });
  return total;
}

inline double expected_opt(const ProductPrior& prior, const CostModel& cost) {
  double total = 0.0;
  for_each_profile(prior, [&](const Profile& v, double mass) {
    total += mass * brute_force_opt(v, cost).welfare;
  });
  return total;
}

struct ApproxFactorResult {
  double ratio = 0.0;
  double algorithm_welfare = 0.0;
  double opt_welfare = 0.0;
  bool exact = true;
  double ci_halfwidth = 0.0;  // 3-sigma half-width on the welfare means (Monte Carlo branch)
};

struct ApproxFactorOptions {
  double max_support = 1e6;
  long long mc_profiles = 20000;
  std::uint64_t mc_seed = 4011;
};

/// Bayesian approximation factor E[OPT] / E[A]. Exact by full support
/// enumeration when the support is small enough, Monte Carlo with a reported
/// confidence half-width otherwise.
inline ApproxFactorResult bayesian_approx_factor(const AlgorithmOracle& alg,
                                                 const ProductPrior& prior, const CostModel& cost,
                                                 const ApproxFactorOptions& opt = {}) {
  if (prior.n() > 20)
    throw TooManyAgentsError("bayesian_approx_factor: exact OPT needs n <= 20");
  ApproxFactorResult r;
  if (prior.support_size() <= opt.max_support && alg.exact_available()) {
    r.algorithm_welfare = expected_welfare(alg, prior, cost);
    r.opt_welfare = expected_opt(prior, cost);
    r.ratio = r.opt_welfare / r.algorithm_welfare;
    return r;
  }
  r.exact = false;
  RandomStream rng(opt.mc_seed);
  double sum_a = 0.0, sum_a2 = 0.0, sum_o = 0.0, sum_o2 = 0.0;
  for (long long s = 0; s < opt.mc_profiles; ++s) {
    const Profile v = sample_profile(prior, rng);
    const double wa = welfare(v, alg.evaluate(v, rng), cost);
    const double wo = brute_force_opt(v, cost).welfare;
    sum_a += wa;
    sum_a2 += wa * wa;
    sum_o += wo;
    sum_o2 += wo * wo;
  }
  const auto N = static_cast<double>(opt.mc_profiles);
  r.algorithm_welfare = sum_a / N;
  r.opt_welfare = sum_o / N;
  const double var_a = std::max(0.0, sum_a2 / N - r.algorithm_welfare * r.algorithm_welfare);
  const double var_o = std::max(0.0, sum_o2 / N - r.opt_welfare * r.opt_welfare);
  r.ci_halfwidth = 3.0 * std::sqrt((var_a + var_o) / N);
  r.ratio = r.opt_welfare / r.algorithm_welfare;
  return r;
}

struct DominanceViolation {
  std::size_t index = 0;
  double value = 0.0;
  double raw_tail = 0.0;
  double ironed_tail = 0.0;
};

/// Atoms where the ironed rule's upper-tail allocation mass falls below the
/// raw rule's (it never should: the hull lies below the curve).
inline std::vector<DominanceViolation> dominance_check(const InterimCurve& raw,
                                                       const InterimCurve& ironed,
                                                       const DiscreteDistribution& dist,
                                                       double tol = 1e-12) {
  if (raw.size() != ironed.size() || raw.size() != dist.size())
    throw GridMismatchError("dominance_check: grids differ");
  std::vector<DominanceViolation> out;
  double tail_raw = 0.0, tail_ironed = 0.0;
  for (std::size_t jj = dist.size(); jj-- > 0;) {
    tail_raw += raw.probs[jj] * dist.mass(jj);
    tail_ironed += ironed.probs[jj] * dist.mass(jj);
    if (tail_ironed < tail_raw - tol)
      out.push_back({jj, dist.value(jj), tail_raw, tail_ironed});
  }
  std::reverse(out.begin(), out.end());
  return out;
}

/// Max absolute gap between the prior and the exact input distribution the
/// ironed oracle feeds to its inner algorithm (0 analytically).
inline double prior_preservation(const AlgorithmOracle& ironed, const ProductPrior& prior) {
  const IntervalSet* iv = ironed.ironing();
  if (iv == nullptr)
    throw InvalidInputError("prior_preservation: oracle carries no ironing intervals");
  double gap = 0.0;
  for (std::size_t i = 0; i < prior.n(); ++i) {
    const auto marginal = ironed_input_marginal(prior, *iv, i);
    for (std::size_t j = 0; j < marginal.size(); ++j)
      gap = std::max(gap, std::abs(marginal[j] - prior.dist(i).mass(j)));
  }
  return gap;
}

/// Audit summary for one reduction run. The slack fields carry the bound the
/// reduction actually promises: zero-ish for the ideal model, the
/// (eps + delta) n mu_max welfare loss and 2 eps v_max regret for the oracle
/// model.
struct AuditReport {
  std::vector<std::vector<MonotoneViolation>> monotonicity;  // per agent, on the final curves
  std::vector<double> max_regret;                            // per agent
  double welfare_algorithm = 0.0;
  double welfare_ironed = 0.0;
  double welfare_opt = 0.0;
  double approx_ratio = 0.0;
  std::vector<std::vector<DominanceViolation>> dominance;  // per agent (ideal model only)
  double prior_gap = 0.0;
  double monotone_tol = 1e-9;
  double welfare_slack = 1e-9;
  double regret_bound = 1e-9;

  bool monotone_ok() const {
    for (const auto& v : monotonicity)
      if (!v.empty()) return false;
    return true;
  }
  bool dominance_ok() const {
    for (const auto& v : dominance)
      if (!v.empty()) return false;
    return true;
  }
  bool regret_ok() const {
    for (double g : max_regret)
      if (g > regret_bound) return false;
    return true;
  }
  bool welfare_ok() const { return welfare_ironed >= welfare_algorithm - welfare_slack; }
  bool prior_ok() const { return prior_gap <= 1e-9; }
  bool all_ok() const {
    return monotone_ok() && dominance_ok() && regret_ok() && welfare_ok() && prior_ok();
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["monotone_ok"] = monotone_ok();
    j["dominance_ok"] = dominance_ok();
    j["regret_ok"] = regret_ok();
    j["welfare_ok"] = welfare_ok();
    j["prior_ok"] = prior_ok();
    j["all_ok"] = all_ok();
    j["welfare_slack"] = welfare_slack;
    j["regret_bound"] = regret_bound;
    j["welfare"] = {{"algorithm", welfare_algorithm},
                    {"ironed", welfare_ironed},
                    {"opt", welfare_opt}};
    j["approx_ratio"] = approx_ratio;
    j["prior_gap"] = prior_gap;
    j["max_regret"] = max_regret;
    j["monotonicity_violations"] = nlohmann::json::array();
    for (std::size_t i = 0; i < monotonicity.size(); ++i)
      for (const auto& v : monotonicity[i])
        j["monotonicity_violations"].push_back(
            {{"agent", i}, {"value_lo", v.value_lo}, {"value_hi", v.value_hi}, {"gap", v.gap}});
    j["dominance_violations"] = nlohmann::json::array();
    for (std::size_t i = 0; i < dominance.size(); ++i)
      for (const auto& v : dominance[i])
        j["dominance_violations"].push_back({{"agent", i},
                                             {"value", v.value},
                                             {"raw_tail", v.raw_tail},
                                             {"ironed_tail", v.ironed_tail}});
    return j;
  }

  std::string render_text() const {
    std::ostringstream os;
    os << std::setprecision(12);
    os << "audit summary\n";
    os << "  monotone:   " << (monotone_ok() ? "ok" : "VIOLATED") << "\n";
    os << "  dominance:  " << (dominance_ok() ? "ok" : "VIOLATED") << "\n";
    os << "  welfare:    " << (welfare_ok() ? "ok" : "VIOLATED") << "  (algorithm "
       << welfare_algorithm << ", ironed " << welfare_ironed << ", opt " << welfare_opt << ")\n";
    os << "  prior gap:  " << prior_gap << (prior_ok() ? "  ok" : "  VIOLATED") << "\n";
    os << "  regret:     " << (regret_ok() ? "ok" : "VIOLATED") << "  (bound " << regret_bound
       << ")\n";
    os << "  approx ratio: " << approx_ratio << "\n";
    for (std::size_t i = 0; i < max_regret.size(); ++i)
      os << "  agent " << i << " max regret: " << max_regret[i] << "\n";
    for (std::size_t i = 0; i < monotonicity.size(); ++i)
      for (const auto& v : monotonicity[i])
        os << "  agent " << i << " monotone violation: x(" << v.value_lo << ") -> x("
           << v.value_hi << ") drops by " << v.gap << "\n";
    for (std::size_t i = 0; i < dominance.size(); ++i)
      for (const auto& v : dominance[i])
        os << "  agent " << i << " dominance violation at v=" << v.value << ": tail "
           << v.ironed_tail << " < " << v.raw_tail << "\n";
    return os.str();
  }
};

}  // namespace bbic
