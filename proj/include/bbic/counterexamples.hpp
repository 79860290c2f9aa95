#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bbic/cost.hpp"
#include "bbic/curves.hpp"
#include "bbic/errors.hpp"
#include "bbic/ideal.hpp"
#include "bbic/prior.hpp"
#include "bbic/verify.hpp"
#include "bbic/zoo.hpp"

namespace bbic {

/// Exact rational arithmetic for the makespan scenario (all quantities are
/// small fractions; overflow is not a concern at this scale).
struct Rational {
  long long num = 0;
  long long den = 1;

  Rational() = default;
  Rational(long long n, long long d = 1) : num(n), den(d) { normalize(); }

  void normalize() {
    if (den < 0) {
      num = -num;
      den = -den;
    }
    const long long g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }

  Rational operator+(const Rational& o) const { return {num * o.den + o.num * den, den * o.den}; }
  Rational operator/(long long k) const { return {num, den * k}; }
  bool operator==(const Rational& o) const { return num == o.num && den == o.den; }
  bool operator<(const Rational& o) const { return num * o.den < o.num * den; }
  double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }
  std::string str() const {
    return den == 1 ? std::to_string(num) : std::to_string(num) + "/" + std::to_string(den);
  }
};

/// Related-machines scheduling: job counts per machine, machine speeds; the
/// makespan is the largest load/speed quotient.
struct SchedulingInstance {
  std::vector<long long> job_counts;  // unit-length jobs per machine
  std::vector<long long> speeds;

  Rational makespan() const {
    Rational best(0);
    for (std::size_t i = 0; i < job_counts.size(); ++i) {
      Rational t(job_counts[i], speeds[i]);
      if (best < t) best = t;
    }
    return best;
  }
};

struct MakespanCase {
  long long s5 = 0;        // true speed of machine 5
  long long s5_drawn = 0;  // resampled speed the algorithm sees
  std::vector<long long> jobs;
  Rational makespan;
};

struct MakespanReport {
  Rational original_expected;
  Rational ironed_expected;
  std::vector<MakespanCase> cases;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["original_expected"] = {{"num", original_expected.num},
                              {"den", original_expected.den},
                              {"value", original_expected.to_double()}};
    j["ironed_expected"] = {{"num", ironed_expected.num},
                            {"den", ironed_expected.den},
                            {"value", ironed_expected.to_double()}};
    j["cases"] = nlohmann::json::array();
    for (const auto& c : cases)
      j["cases"].push_back({{"s5", c.s5},
                            {"s5_drawn", c.s5_drawn},
                            {"jobs", c.jobs},
                            {"makespan", c.makespan.str()},
                            {"makespan_value", c.makespan.to_double()}});
    return j;
  }

  std::string render_text() const {
    std::ostringstream os;
    os << "makespan scenario: 10 unit jobs, 5 machines, machines 1-4 speed 2, machine 5 speed "
          "uniform {1,2}\n";
    os << "  original expected makespan: " << original_expected.str() << " = "
       << original_expected.to_double() << "\n";
    os << "  ironed expected makespan:   " << ironed_expected.str() << " = "
       << ironed_expected.to_double() << "\n";
    os << "  s5  s5'  jobs             makespan\n";
    for (const auto& c : cases) {
      os << "  " << c.s5 << "   " << c.s5_drawn << "    (";
      for (std::size_t i = 0; i < c.jobs.size(); ++i)
        os << c.jobs[i] << (i + 1 < c.jobs.size() ? "," : "");
      os << ")      " << c.makespan.str() << "\n";
    }
    return os.str();
  }
};

/// Appendix A.1: ironing the speed of machine 5 over {1,2} raises the
/// expected makespan from 2 to 2.25 even though it weakly improves welfare;
/// the welfare-only scope of the reduction, demonstrated exactly.
inline MakespanReport makespan_scenario() {
  const std::vector<long long> fast = {2, 2, 2, 2, 2};   // algorithm's choice when s5 = 2
  const std::vector<long long> slow = {6, 1, 0, 0, 3};   // algorithm's choice when s5 = 1
  auto jobs_for = [&](long long s5_seen) { return s5_seen == 2 ? fast : slow; };
  auto schedule = [&](long long s5_true, long long s5_seen) {
    SchedulingInstance inst;
    inst.job_counts = jobs_for(s5_seen);
    inst.speeds = {2, 2, 2, 2, s5_true};
    return inst;
  };

  MakespanReport r;
  r.original_expected =
      (schedule(2, 2).makespan() + schedule(1, 1).makespan()) / 2;

  Rational total(0);
  for (long long s5 : {1, 2}) {
    for (long long s5d : {1, 2}) {
      MakespanCase c;
      c.s5 = s5;
      c.s5_drawn = s5d;
      c.jobs = jobs_for(s5d);
      c.makespan = schedule(s5, s5d).makespan();
      total = total + c.makespan;
      r.cases.push_back(std::move(c));
    }
  }
  r.ironed_expected = total / 4;
  return r;
}

/// The Appendix A.2 fixture: two unit-demand bidders, two items, the 11/10
/// approximation table.
struct WorstCaseFixture {
  ProductPrior prior;
  AlgorithmOracle alg;
  CostModel cost;
};

inline WorstCaseFixture worstcase_fixture() {
  ProductPrior prior({DiscreteDistribution::uniform({1.0, 100.0}),
                      DiscreteDistribution::uniform({10.0, 1000.0, 1001.0})});
  // dims: v1 in {1,100} x v2 in {10,1000,1001}; cells row-major over v1 then v2.
  std::vector<Allocation> cells = {
      Allocation{{0, 1}}, Allocation{{1, 1}}, Allocation{{1, 1}},   // v1 = 1
      Allocation{{1, 0}}, Allocation{{0, 1}}, Allocation{{0, 1}},   // v1 = 100
  };
  auto table = TableAlgorithm::deterministic({2, 3}, std::move(cells));
  AlgorithmOracle alg = table_algorithm(prior, std::move(table));
  return {prior, std::move(alg), CostModel::zero()};
}

struct WorstCaseReport {
  double raw_worst_ratio = 0.0;
  double ironed_welfare_at_100_10 = 0.0;
  double ironed_worst_ratio = 0.0;
  IntervalSet intervals;
  std::vector<InterimCurve> raw_curves;
  std::vector<InterimCurve> ironed_curves;
  std::vector<std::vector<Allocation>> rule_table;  // rows v1, cols v2

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["raw_worst_ratio"] = raw_worst_ratio;
    j["ironed_welfare_at_100_10"] = ironed_welfare_at_100_10;
    j["ironed_worst_ratio"] = ironed_worst_ratio;
    j["intervals"] = nlohmann::json::array();
    for (const auto& agent : intervals.per_agent) {
      nlohmann::json row = nlohmann::json::array();
      for (const auto& iv : agent) row.push_back({iv.lo, iv.hi});
      j["intervals"].push_back(std::move(row));
    }
    j["rule_table"] = nlohmann::json::array();
    for (const auto& row : rule_table) {
      nlohmann::json cells = nlohmann::json::array();
      for (const auto& x : row)
        cells.push_back({static_cast<int>(x.served[0]), static_cast<int>(x.served[1])});
      j["rule_table"].push_back(std::move(cells));
    }
    return j;
  }

  std::string render_text() const {
    std::ostringstream os;
    os << "worst-case scenario: 2 objects, 2 unit-demand bidders\n";
    os << "  allocation rule (rows v1 = 1,100; cols v2 = 10,1000,1001; entries x1,x2):\n";
    for (const auto& row : rule_table) {
      os << "   ";
      for (const auto& x : row)
        os << "  " << static_cast<int>(x.served[0]) << "," << static_cast<int>(x.served[1]);
      os << "\n";
    }
    os << "  raw worst-case ratio:        " << raw_worst_ratio << "\n";
    os << "  ironed welfare at (100,10):  " << ironed_welfare_at_100_10 << "\n";
    os << "  ironed worst-case ratio:     " << ironed_worst_ratio << "\n";
    return os.str();
  }
};

/// Appendix A.2: ideal ironing fixes the BIC violation for agent 1 but
/// degrades the worst-case approximation ratio from 11/10 to 2.
inline WorstCaseReport worstcase_scenario() {
  WorstCaseFixture fx = worstcase_fixture();
  IdealIroningResult ir = ideal_ironed_algorithm(fx.alg, fx.prior);

  WorstCaseReport r;
  r.intervals = ir.intervals;
  r.raw_curves = ir.raw_curves;
  r.ironed_curves = ir.ironed_curves;

  RandomStream table_rng(0);
  for (std::size_t a = 0; a < fx.prior.dist(0).size(); ++a) {
    std::vector<Allocation> row;
    for (std::size_t b = 0; b < fx.prior.dist(1).size(); ++b)
      row.push_back(fx.alg.evaluate({fx.prior.dist(0).value(a), fx.prior.dist(1).value(b)},
                                    table_rng));
    r.rule_table.push_back(std::move(row));
  }

  double raw_ratio = 0.0, ironed_ratio = 0.0;
  for_each_profile(fx.prior, [&](const Profile& v, double) {
    const double opt = brute_force_opt(v, fx.cost).welfare;
    double raw_w = 0.0, ironed_w = 0.0;
    fx.alg.for_each_outcome(v, [&](const Allocation& x, double p) {
      raw_w += p * welfare(v, x, fx.cost);
    });
    ir.ironed.for_each_outcome(v, [&](const Allocation& x, double p) {
      ironed_w += p * welfare(v, x, fx.cost);
    });
    raw_ratio = std::max(raw_ratio, opt / raw_w);
    ironed_ratio = std::max(ironed_ratio, opt / ironed_w);
    if (v[0] == 100.0 && v[1] == 10.0) r.ironed_welfare_at_100_10 = ironed_w;
  });
  r.raw_worst_ratio = raw_ratio;
  r.ironed_worst_ratio = ironed_ratio;
  return r;
}

/// Virtual value of the A.3 mixture prior (half uniform on [10,11], half
/// uniform on [11,15]).
inline double a3_virtual_value(double v) {
  return v <= 11.0 ? 2.0 * v - 12.0 : 2.0 * v - 15.0;
}

inline double a3_quantile(double q) {
  return q <= 0.5 ? 10.0 + 2.0 * q : 11.0 + 8.0 * (q - 0.5);
}

struct MyersonReport {
  double x_ironed_virtual_at_lowest = 0.0;   // x'(10): allocate to max ironed virtual value
  double x_allocation_ironed_at_lowest = 0.0;  // x''(10): iron the raw-virtual allocation rule
  InterimCurve ironed_virtual_curve;   // x'
  InterimCurve raw_allocation_curve;   // x
  InterimCurve allocation_ironed_curve;  // x''
  std::vector<double> phi;        // raw virtual values per atom
  std::vector<double> phi_ironed; // ironed virtual values per atom

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["x_ironed_virtual_at_lowest"] = x_ironed_virtual_at_lowest;
    j["x_allocation_ironed_at_lowest"] = x_allocation_ironed_at_lowest;
    j["atoms"] = ironed_virtual_curve.values;
    j["phi"] = phi;
    j["phi_ironed"] = phi_ironed;
    j["x_ironed_virtual"] = ironed_virtual_curve.probs;
    j["x_raw"] = raw_allocation_curve.probs;
    j["x_allocation_ironed"] = allocation_ironed_curve.probs;
    return j;
  }

  std::string render_text() const {
    std::ostringstream os;
    os << "Myerson vs allocation ironing (2 symmetric bidders, mixture prior)\n";
    os << "  x'(lowest)  [ironed virtual values]:  " << x_ironed_virtual_at_lowest << "\n";
    os << "  x''(lowest) [allocation ironing]:     " << x_allocation_ironed_at_lowest << "\n";
    return os.str();
  }
};

/// Appendix A.3: ironing virtual valuations and ironing the allocation rule
/// are different mechanisms. Ties on (ironed) virtual values leave the item
/// unallocated, matching the continuous model where ties have measure zero.
inline MyersonReport myerson_vs_allocation_ironing(int grid = 500) {
  if (grid < 100) throw InvalidInputError("myerson scenario: grid must be >= 100");
  DiscreteDistribution dist = DiscreteDistribution::from_quantile(a3_quantile, grid);
  ProductPrior prior({dist, dist});
  const std::size_t m = dist.size();

  MyersonReport r;
  r.phi.resize(m);
  for (std::size_t j = 0; j < m; ++j) r.phi[j] = a3_virtual_value(dist.value(j));

  // Ironed virtual values: slopes of the convex hull of the quantile-space
  // revenue prefix curve R(q) = sum phi * mass.
  CumulativeCurve revenue;
  revenue.q.push_back(0.0);
  revenue.g.push_back(0.0);
  double acc = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    acc += r.phi[j] * dist.mass(j);
    revenue.q.push_back(dist.cdf(j));
    revenue.g.push_back(acc);
  }
  const CumulativeCurve rev_hull = convex_hull(revenue);
  r.phi_ironed.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double q_mid = 0.5 * (revenue.q[j] + revenue.q[j + 1]);
    r.phi_ironed[j] = rev_hull.slope_at(q_mid);
  }

  // Strict-argmax single-item rules on a per-atom score.
  auto argmax_rule = [&](std::vector<double> score) {
    return AlgorithmOracle::deterministic(2, [score, dist](const Profile& v) {
      const int a = dist.atom_index(v[0]);
      const int b = dist.atom_index(v[1]);
      if (a < 0 || b < 0) throw OffSupportError("myerson scenario: off-grid value");
      Allocation x(2);
      const double sa = score[static_cast<std::size_t>(a)];
      const double sb = score[static_cast<std::size_t>(b)];
      if (sa > sb)
        x.served[0] = 1;
      else if (sb > sa)
        x.served[1] = 1;
      return x;
    });
  };

  AlgorithmOracle raw_virtual_alg = argmax_rule(r.phi);
  AlgorithmOracle ironed_virtual_alg = argmax_rule(r.phi_ironed);

  r.ironed_virtual_curve = exact_interim_curve(ironed_virtual_alg, prior, 0);
  IdealIroningResult ir = ideal_ironed_algorithm(raw_virtual_alg, prior);
  r.raw_allocation_curve = ir.raw_curves[0];
  r.allocation_ironed_curve = ir.ironed_curves[0];

  r.x_ironed_virtual_at_lowest = r.ironed_virtual_curve.probs[0];
  r.x_allocation_ironed_at_lowest = r.allocation_ironed_curve.probs[0];
  return r;
}

/// One step of the A.4 recursive procedure: which agent was ironed, the
/// ironed atom-index intervals, and the full table afterwards.
struct RecursiveStep {
  std::size_t agent = 0;
  std::vector<std::pair<std::size_t, std::size_t>> intervals;
  std::vector<std::vector<double>> table;  // rows: v1 atoms, cols: v2 atoms
};

struct RecursiveRun {
  Profile input;
  std::vector<RecursiveStep> steps;
  double final_x1 = 0.0;
};

struct RecursiveReport {
  RecursiveRun run_1_5;
  RecursiveRun run_2_5;

  nlohmann::json to_json() const {
    auto run_json = [](const RecursiveRun& r) {
      nlohmann::json j;
      j["input"] = r.input;
      j["final_x1"] = r.final_x1;
      j["steps"] = nlohmann::json::array();
      for (const auto& s : r.steps) {
        nlohmann::json intervals = nlohmann::json::array();
        for (auto [a, b] : s.intervals) intervals.push_back({a, b});
        j["steps"].push_back(
            {{"agent", s.agent}, {"intervals", std::move(intervals)}, {"table", s.table}});
      }
      return j;
    };
    nlohmann::json j;
    j["input_1_5"] = run_json(run_1_5);
    j["input_2_5"] = run_json(run_2_5);
    return j;
  }

  std::string render_text() const {
    auto render_run = [](std::ostringstream& os, const RecursiveRun& r) {
      os << "input (" << r.input[0] << "," << r.input[1] << "): final x1 = " << r.final_x1
         << "\n";
      for (std::size_t s = 0; s < r.steps.size(); ++s) {
        os << "  step " << s + 1 << " (ironed agent " << r.steps[s].agent + 1 << "):\n";
        for (const auto& row : r.steps[s].table) {
          os << "   ";
          for (double x : row) os << " " << x;
          os << "\n";
        }
      }
    };
    std::ostringstream os;
    os << "recursive ironing scenario\n";
    render_run(os, run_1_5);
    render_run(os, run_2_5);
    return os.str();
  }
};

namespace detail {

/// Uniform-mass monotonizing intervals of a curve given as raw values,
/// returned as [first, last] atom-index pairs.
inline std::vector<std::pair<std::size_t, std::size_t>> uniform_ironing_runs(
    const std::vector<double>& probs) {
  const std::size_t m = probs.size();
  CumulativeCurve c;
  c.q.push_back(0.0);
  c.g.push_back(0.0);
  double acc = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    acc += probs[j] / static_cast<double>(m);
    c.q.push_back(static_cast<double>(j + 1) / static_cast<double>(m));
    c.g.push_back(acc);
  }
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (auto [first, last] : violation_runs(c, convex_hull(c)))
    if (last > first) out.emplace_back(first, last);
  return out;
}

}  // namespace detail

/// Appendix A.4: the recursive (point-wise) monotonization procedure applied
/// to the 2x6 table, reproducing the intermediate tables and the ex post
/// monotonicity violation x1(1) = 0.47 > 0.46 = x1(2) at v2 = 5.
inline RecursiveReport recursive_ironing_scenario() {
  const std::vector<double> v1_atoms = {1.0, 2.0};
  const std::vector<double> v2_atoms = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
  // Probability both agents are served, rows indexed by v1, cols by v2.
  const std::vector<std::vector<double>> base_table = {
      {0.80, 0.20, 0.82, 0.22, 0.84, 0.24},  // v1 = 1
      {0.20, 0.60, 0.60, 0.20, 0.20, 0.60},  // v1 = 2
  };

  auto run_procedure = [&](std::size_t in1, std::size_t in2) {
    RecursiveRun run;
    run.input = {v1_atoms[in1], v2_atoms[in2]};
    std::vector<std::vector<double>> table = base_table;
    // Per-agent cubes as atom index ranges, starting from singletons.
    std::array<std::pair<std::size_t, std::size_t>, 2> cube = {
        std::make_pair(in1, in1), std::make_pair(in2, in2)};
    const std::array<std::size_t, 2> input_idx = {in1, in2};
    const std::array<std::size_t, 2> sizes = {v1_atoms.size(), v2_atoms.size()};

    auto curve_of = [&](std::size_t agent) {
      // Average over the other agent's cube, uniform within it.
      const std::size_t other = 1 - agent;
      const auto [lo, hi] = cube[other];
      std::vector<double> probs(sizes[agent], 0.0);
      for (std::size_t a = 0; a < sizes[agent]; ++a) {
        double s = 0.0;
        for (std::size_t b = lo; b <= hi; ++b)
          s += agent == 0 ? table[a][b] : table[b][a];
        probs[a] = s / static_cast<double>(hi - lo + 1);
      }
      return probs;
    };
    auto monotone = [](const std::vector<double>& p) {
      for (std::size_t j = 0; j + 1 < p.size(); ++j)
        if (p[j + 1] < p[j] - 1e-12) return false;
      return true;
    };

    for (int iter = 0;; ++iter) {
      if (iter > 100)
        throw NonTerminationError("recursive ironing exceeded 100 iterations");
      // The appendix processes agent 2 first on every pass.
      int pick = -1;
      for (std::size_t agent : {std::size_t{1}, std::size_t{0}}) {
        if (!monotone(curve_of(agent))) {
          pick = static_cast<int>(agent);
          break;
        }
      }
      if (pick < 0) break;
      const auto agent = static_cast<std::size_t>(pick);

      RecursiveStep step;
      step.agent = agent;
      step.intervals = detail::uniform_ironing_runs(curve_of(agent));
      // Resample-average the table over each ironed interval (uniform prior).
      for (auto [first, last] : step.intervals) {
        const auto width = static_cast<double>(last - first + 1);
        const std::size_t other_size = sizes[1 - agent];
        for (std::size_t b = 0; b < other_size; ++b) {
          double avg = 0.0;
          for (std::size_t a = first; a <= last; ++a)
            avg += agent == 0 ? table[a][b] : table[b][a];
          avg /= width;
          for (std::size_t a = first; a <= last; ++a) {
            if (agent == 0)
              table[a][b] = avg;
            else
              table[b][a] = avg;
          }
        }
        if (input_idx[agent] >= first && input_idx[agent] <= last)
          cube[agent] = {first, last};
      }
      step.table = table;
      run.steps.push_back(std::move(step));
    }
    run.final_x1 = table[in1][in2];
    return run;
  };

  RecursiveReport r;
  r.run_1_5 = run_procedure(0, 4);
  r.run_2_5 = run_procedure(1, 4);
  return r;
}

}  // namespace bbic
