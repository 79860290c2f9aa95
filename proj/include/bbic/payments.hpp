#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "bbic/algorithm.hpp"
#include "bbic/curves.hpp"
#include "bbic/distribution.hpp"
#include "bbic/errors.hpp"
#include "bbic/prior.hpp"

namespace bbic {

/// Realized allocation plus per-agent payments; the mechanism's externally
/// visible result. Unallocated agents pay 0, and no payment ever exceeds the
/// agent's reported value (payments may be negative: the oracle procedure is
/// an unbiased estimator, not a deterministic rule).
struct MechanismOutcome {
  Allocation allocation;
  std::vector<double> payments;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["served"] = nlohmann::json::array();
    for (auto b : allocation.served) j["served"].push_back(static_cast<int>(b));
    j["payments"] = payments;
    return j;
  }
};

/// Interim expected payment p(v) = v x(v) - integral_0^v x(z) dz evaluated
/// on the atom grid, treating x as a right-continuous step function between
/// atoms and 0 below the lowest atom.
inline double exact_payment(const InterimCurve& curve, const DiscreteDistribution& dist,
                            double v) {
  const int idx = dist.atom_index(v);
  if (idx < 0)
    throw OffSupportError("exact_payment: " + std::to_string(v) + " is not an atom");
  const auto a = static_cast<std::size_t>(idx);
  if (curve.size() != dist.size())
    throw GridMismatchError("exact_payment: curve and distribution grids differ");
  double integral = curve.below_support * curve.values[0];
  for (std::size_t j = 0; j + 1 <= a; ++j)
    integral += curve.probs[j] * (curve.values[j + 1] - curve.values[j]);
  return v * curve.probs[a] - integral;
}

struct OraclePaymentResult {
  double payment = 0.0;
  long long calls = 0;  // black-box invocations made by the procedure
};

struct OraclePaymentOptions {
  long long t_max = 1000000;
};

/// The sampling-based payment procedure, run for an agent the mechanism just
/// allocated to: draw a report uniformly below the agent's value, test it
/// against fresh opponents, and if that test allocates, pay the value minus
/// value times the number of fresh-opponent retrials needed to see the agent
/// allocated at its true value. Unbiased for the exact_payment identity.
inline OraclePaymentResult oracle_payment(const AlgorithmOracle& alg, const ProductPrior& prior,
                                          const Profile& profile, std::size_t agent,
                                          RandomStream& rng,
                                          const OraclePaymentOptions& opt = {}) {
  const double vi = profile[agent];
  OraclePaymentResult r;

  Profile probe(prior.n());
  const double deviated = rng.uniform(0.0, vi);
  for (std::size_t j = 0; j < prior.n(); ++j)
    probe[j] = (j == agent) ? deviated : prior.dist(j).sample(rng);
  ++r.calls;
  const bool hit = alg.evaluate(probe, rng).is_served(agent);
  const double X = hit ? vi : 0.0;

  long long T = 0;
  if (X != 0.0) {
    for (;;) {
      if (++T > opt.t_max)
        throw IterationCapError("oracle_payment: no allocation to agent " +
                                std::to_string(agent) + " within " + std::to_string(opt.t_max) +
                                " retrials (interim probability ~ 0)");
      for (std::size_t j = 0; j < prior.n(); ++j)
        probe[j] = (j == agent) ? vi : prior.dist(j).sample(rng);
      ++r.calls;
      if (alg.evaluate(probe, rng).is_served(agent)) break;
    }
  }
  r.payment = vi - static_cast<double>(T) * X;
  return r;
}

/// Run the mechanism once and charge every allocated agent via the oracle
/// payment procedure (unallocated agents pay 0).
inline MechanismOutcome mechanism_outcome(const AlgorithmOracle& alg, const ProductPrior& prior,
                                          const Profile& profile, RandomStream& rng,
                                          const OraclePaymentOptions& opt = {}) {
  MechanismOutcome out;
  out.allocation = alg.evaluate(profile, rng);
  out.payments.assign(prior.n(), 0.0);
  for (std::size_t i = 0; i < prior.n(); ++i)
    if (out.allocation.is_served(i))
      out.payments[i] = oracle_payment(alg, prior, profile, i, rng, opt).payment;
  return out;
}

}  // namespace bbic
