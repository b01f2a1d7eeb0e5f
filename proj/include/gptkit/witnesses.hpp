#pragma once

// The historical macrorealism witnesses. disturbance() is the control/test
// quantity |e.(Phi s) - e.s|. The nondisturbance witness fires when the test
// state moves more than every control state did, which noisy controls make
// possible even on strictly classical systems; convexity_bound_check()
// verifies the part of the argument that is actually valid (mixtures of the
// controls never beat the worst control). lg_correlators() evaluates the
// three-time combination K3 = C12 + C23 - C13 against the macrorealist bound
// 1, and nsit_delta() measures in total variation how much an intermediate
// instrument shifts the final-measurement distribution.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "gptkit/core.hpp"
#include "gptkit/errors.hpp"
#include "gptkit/scenarios.hpp"

namespace gptkit {

struct NondisturbanceReport {
  std::map<std::string, double> control_disturbances;
  double max_control = 0.0;
  double test_disturbance = 0.0;
  double witness_value = 0.0;  // test_disturbance - max_control
  double threshold = 0.0;
  bool fires = false;
  long long trials = 0;      // 0 marks exact probabilities
  bool conditioned = false;  // null-branch statistics in the instrument form
};

struct LgReport {
  double c12 = 0.0;
  double c23 = 0.0;
  double c13 = 0.0;
  double k3 = 0.0;
  double threshold = 1e-9;
  bool violated = false;
  long long trials = 0;  // 0 marks exact correlators
};

struct NsitReport {
  double delta = 0.0;  // total variation, worst case over default preps
  double threshold = 1e-9;
  bool violated = false;
  bool conditioned = false;
  std::string prep;  // preparation attaining delta
};

// Names the branch in which the apparatus does not interact with the system.
struct NullResultSpec {
  std::string instrument;
  std::string null_outcome;
};

namespace detail {

inline int branch_index(const Instrument& ins, const std::string& outcome,
                        const std::string& instrument_label) {
  for (size_t b = 0; b < ins.outcomes.size(); ++b)
    if (ins.outcomes[b] == outcome) return static_cast<int>(b);
  throw UnknownLabel("outcome '" + outcome + "' not found on instrument '" +
                     instrument_label + "'");
}

inline Mat marginal_channel(const Instrument& ins) {
  Mat m = ins.branches.at(0).matrix;
  for (size_t b = 1; b < ins.branches.size(); ++b) m += ins.branches[b].matrix;
  return m;
}

// Probability of effect m on the (possibly subnormalized) vector v, with the
// clamping probability() applies to proper pairs.
inline double branch_probability(const Vec& m, const Vec& v) {
  return std::clamp(m.dot(v), 0.0, 1.0);
}

// One state's statistics before and after the disturbing step. In sampled
// mode each probability is a Bernoulli frequency over its own counter stream
// and var carries the usual p(1-p)/n floor-protected estimate.
struct DisturbanceArm {
  double before = 0.0;
  double after = 0.0;
  double var_before = 0.0;
  double var_after = 0.0;
  double d() const { return std::abs(after - before); }
  double var() const { return var_before + var_after; }
};

inline double bernoulli_frequency(double p, long long n, uint64_t key) {
  long long hits = 0;
  for (long long t = 0; t < n; ++t)
    if (keyed_uniform(key, static_cast<uint64_t>(t)) < p) ++hits;
  return static_cast<double>(hits) / static_cast<double>(n);
}

inline double proportion_variance(double f, long long n) {
  double nn = static_cast<double>(n);
  return std::max(f * (1.0 - f) / nn, 1.0 / (4.0 * nn * nn));
}

// The disturbing step: either a deterministic transformation or an
// instrument whose statistics are conditioned on the null branch
// (renormalized) or marginalized over all branches.
struct DisturbingStep {
  const Transformation* transform = nullptr;
  const Instrument* instrument = nullptr;
  int null_branch = -1;
  bool conditioned = false;
};

inline DisturbanceArm disturbance_arm(const Scenario& sc,
                                      const std::string& state_label,
                                      const DisturbingStep& step,
                                      const Effect& e, long long trials,
                                      uint64_t seed) {
  const State& s = named_state(sc, state_label);
  DisturbanceArm arm;
  double p_before = probability(e, s);

  double p_after = 0.0;
  double null_prob = 1.0;
  if (step.transform) {
    p_after = branch_probability(e.vec, step.transform->matrix * s.vec);
  } else if (step.conditioned) {
    const auto& br = step.instrument->branches.at(step.null_branch);
    Vec v = br.matrix * s.vec;
    null_prob = branch_probability(sc.system.unit.vec, v);
    if (null_prob < 1e-12 && trials == 0)
      throw NullOutcomeProbabilityZero("null branch has probability " +
                                       std::to_string(null_prob) + " on '" +
                                       state_label + "'");
    p_after = null_prob > 0.0 ? branch_probability(e.vec, v) / null_prob : 0.0;
  } else {
    p_after = branch_probability(e.vec, marginal_channel(*step.instrument) *
                                            s.vec);
  }
  p_after = std::clamp(p_after, 0.0, 1.0);

  if (trials == 0) {
    arm.before = p_before;
    arm.after = p_after;
    return arm;
  }

  uint64_t base = hash_combine64(seed, fnv1a64(state_label));
  arm.before = bernoulli_frequency(p_before, trials,
                                   hash_combine64(base, fnv1a64("before")));
  arm.var_before = proportion_variance(arm.before, trials);
  uint64_t after_key = hash_combine64(base, fnv1a64("after"));
  if (step.conditioned) {
    // Both the null branch and the effect are resolved per trial; only the
    // null-branch runs contribute to the conditioned frequency.
    long long kept = 0, hits = 0;
    for (long long t = 0; t < trials; ++t) {
      if (keyed_uniform(after_key, 2 * static_cast<uint64_t>(t)) >= null_prob)
        continue;
      ++kept;
      if (keyed_uniform(after_key, 2 * static_cast<uint64_t>(t) + 1) < p_after)
        ++hits;
    }
    if (kept == 0)
      throw NullOutcomeProbabilityZero("no null-branch runs on '" +
                                       state_label + "'");
    arm.after = static_cast<double>(hits) / static_cast<double>(kept);
    arm.var_after = proportion_variance(arm.after, kept);
  } else {
    arm.after = bernoulli_frequency(p_after, trials, after_key);
    arm.var_after = proportion_variance(arm.after, trials);
  }
  return arm;
}

inline NondisturbanceReport witness_from_arms(
    const Scenario& sc, const std::vector<std::string>& controls,
    const std::string& test, const DisturbingStep& step, const Effect& e,
    long long trials, uint64_t seed) {
  if (controls.empty())
    throw EmptyGeneratorList("nondisturbance_witness: no control states");
  NondisturbanceReport rep;
  rep.trials = trials;
  rep.conditioned = step.conditioned;
  double worst_var = 0.0;
  for (const auto& lbl : controls) {
    DisturbanceArm arm = disturbance_arm(sc, lbl, step, e, trials, seed);
    rep.control_disturbances[lbl] = arm.d();
    if (arm.d() >= rep.max_control) {
      rep.max_control = arm.d();
      worst_var = arm.var();
    }
  }
  DisturbanceArm tarm = disturbance_arm(sc, test, step, e, trials, seed);
  rep.test_disturbance = tarm.d();
  rep.witness_value = rep.test_disturbance - rep.max_control;
  rep.threshold =
      trials == 0 ? 1e-9 : 3.0 * std::sqrt(tarm.var() + worst_var);
  rep.fires = rep.witness_value > rep.threshold;
  return rep;
}

}  // namespace detail

inline double disturbance(const Scenario& sc, const std::string& state,
                          const std::string& transform,
                          const std::string& effect) {
  detail::DisturbingStep step;
  step.transform = &named_transform(sc, transform);
  return detail::disturbance_arm(sc, state, step, named_effect(sc, effect),
                                 0, 0)
      .d();
}

inline NondisturbanceReport nondisturbance_witness(
    const Scenario& sc, const std::vector<std::string>& controls,
    const std::string& test, const std::string& transform,
    const std::string& effect, long long trials = 0, uint64_t seed = 0) {
  detail::DisturbingStep step;
  step.transform = &named_transform(sc, transform);
  return detail::witness_from_arms(sc, controls, test, step,
                                   named_effect(sc, effect), trials, seed);
}

// Null-result form: the disturbing step is an instrument. conditioned = true
// uses the renormalized null-branch statistics, false the branch-marginalized
// channel; the report records which.
inline NondisturbanceReport nondisturbance_witness(
    const Scenario& sc, const std::vector<std::string>& controls,
    const std::string& test, const NullResultSpec& phi, bool conditioned,
    const std::string& effect, long long trials = 0, uint64_t seed = 0) {
  detail::DisturbingStep step;
  step.instrument = &named_instrument(sc, phi.instrument);
  step.null_branch =
      detail::branch_index(*step.instrument, phi.null_outcome, phi.instrument);
  step.conditioned = conditioned;
  return detail::witness_from_arms(sc, controls, test, step,
                                   named_effect(sc, effect), trials, seed);
}

// Verifies d_s <= max_j d_j + 1e-9 for n_random uniform simplex mixtures of
// the control states. A false return on a strictly classical system would
// falsify the convexity argument, so the tests assert the conjunction.
inline bool convexity_bound_check(const Scenario& sc,
                                  const std::vector<std::string>& controls,
                                  const std::string& transform,
                                  const std::string& effect, int n_random,
                                  uint64_t seed) {
  if (controls.empty())
    throw EmptyGeneratorList("convexity_bound_check: no control states");
  const Transformation& phi = named_transform(sc, transform);
  const Effect& e = named_effect(sc, effect);
  const int m = static_cast<int>(controls.size());

  double max_control = 0.0;
  std::vector<const State*> sts;
  for (const auto& lbl : controls) {
    sts.push_back(&named_state(sc, lbl));
    double before = probability(e, *sts.back());
    double after = detail::branch_probability(e.vec,
                                              phi.matrix * sts.back()->vec);
    max_control = std::max(max_control, std::abs(after - before));
  }

  uint64_t key = hash_combine64(seed, fnv1a64("convexity-bound"));
  uint64_t ctr = 0;
  for (int i = 0; i < n_random; ++i) {
    // Exponential spacings give a uniform draw from the simplex.
    std::vector<double> alpha(m);
    double total = 0.0;
    for (int j = 0; j < m; ++j) {
      alpha[j] = -std::log(1.0 - keyed_uniform(key, ctr++));
      total += alpha[j];
    }
    Vec v = Vec::Zero(sc.system.dim);
    for (int j = 0; j < m; ++j) v += (alpha[j] / total) * sts[j]->vec;
    double before = detail::branch_probability(e.vec, v);
    double after = detail::branch_probability(e.vec, phi.matrix * v);
    if (std::abs(after - before) > max_control + 1e-9) return false;
  }
  return true;
}

// Label bundle for three-time correlator runs: which preparation starts the
// run, which transformation advances one time slot, and which instrument
// (with +-1 outcome values) is measured.
struct LgLabels {
  std::string prep = "init";
  std::string evolve = "evolution";
  std::string instrument = "measure";
};

namespace detail {

inline double sequential_correlator(const Scenario& sc, const Vec& init,
                                    const Mat& u_step, const Instrument& ins,
                                    const std::vector<double>& vals, int pre,
                                    int gap) {
  Vec s = init;
  for (int t = 0; t < pre; ++t) s = u_step * s;
  double c = 0.0;
  for (size_t a = 0; a < ins.branches.size(); ++a) {
    Vec sa = ins.branches[a].matrix * s;
    for (int t = 0; t < gap; ++t) sa = u_step * sa;
    for (size_t b = 0; b < ins.branches.size(); ++b) {
      double p = branch_probability(sc.system.unit.vec,
                                    ins.branches[b].matrix * sa);
      c += vals[a] * vals[b] * p;
    }
  }
  return c;
}

inline double sampled_correlator(const Scenario& sc, const Vec& init,
                                 const Mat& u_step, const Instrument& ins,
                                 const std::vector<double>& vals, int pre,
                                 int gap, long long trials, uint64_t key) {
  Vec s = init;
  for (int t = 0; t < pre; ++t) s = u_step * s;
  const size_t nb = ins.branches.size();
  std::vector<double> joint(nb * nb), value(nb * nb);
  for (size_t a = 0; a < nb; ++a) {
    Vec sa = ins.branches[a].matrix * s;
    for (int t = 0; t < gap; ++t) sa = u_step * sa;
    for (size_t b = 0; b < nb; ++b) {
      joint[a * nb + b] =
          branch_probability(sc.system.unit.vec, ins.branches[b].matrix * sa);
      value[a * nb + b] = vals[a] * vals[b];
    }
  }
  // Inverse-CDF draw from the exact joint outcome-pair law per trial; the
  // counter stream makes reruns reproduce bit for bit.
  double acc = 0.0;
  for (long long t = 0; t < trials; ++t) {
    double u = keyed_uniform(key, static_cast<uint64_t>(t));
    double cum = 0.0;
    size_t pick = joint.size() - 1;
    for (size_t j = 0; j < joint.size(); ++j) {
      cum += joint[j];
      if (u < cum) {
        pick = j;
        break;
      }
    }
    acc += value[pick];
  }
  return acc / static_cast<double>(trials);
}

}  // namespace detail

// Exact two-time correlators of the +-1 observable at slots {1,2}, {2,3} and
// {1,3}, one application of the evolution between consecutive slots. With
// trials > 0 each correlator is a Monte Carlo average of that many keyed
// draws instead, and the violation threshold widens to three standard
// deviations of the K3 estimator.
inline LgReport lg_correlators(const Scenario& sc, const LgLabels& lbl = {},
                               long long trials = 0, uint64_t seed = 0) {
  if (!sc.transforms.count(lbl.evolve) || !sc.instruments.count(lbl.instrument))
    throw WrongScenarioKind("lg_correlators: scenario '" + sc.name +
                            "' lacks '" + lbl.evolve + "' or '" +
                            lbl.instrument + "'");
  const Instrument& ins = named_instrument(sc, lbl.instrument);
  auto vit = sc.outcome_values.find(lbl.instrument);
  if (vit == sc.outcome_values.end() ||
      vit->second.size() != ins.branches.size())
    throw WrongScenarioKind("lg_correlators: no outcome values for '" +
                            lbl.instrument + "'");
  const Vec& init = named_state(sc, lbl.prep).vec;
  const Mat& u = named_transform(sc, lbl.evolve).matrix;

  LgReport rep;
  rep.trials = trials;
  if (trials == 0) {
    rep.c12 =
        detail::sequential_correlator(sc, init, u, ins, vit->second, 0, 1);
    rep.c23 =
        detail::sequential_correlator(sc, init, u, ins, vit->second, 1, 1);
    rep.c13 =
        detail::sequential_correlator(sc, init, u, ins, vit->second, 0, 2);
  } else {
    uint64_t base = hash_combine64(seed, fnv1a64("lg-correlator"));
    rep.c12 = detail::sampled_correlator(sc, init, u, ins, vit->second, 0, 1,
                                         trials, hash_combine64(base, 0));
    rep.c23 = detail::sampled_correlator(sc, init, u, ins, vit->second, 1, 1,
                                         trials, hash_combine64(base, 1));
    rep.c13 = detail::sampled_correlator(sc, init, u, ins, vit->second, 0, 2,
                                         trials, hash_combine64(base, 2));
    // Each correlator averages values in [-1, 1], so var(K3) <= 3 / trials.
    rep.threshold = 3.0 * std::sqrt(3.0 / static_cast<double>(trials));
  }
  rep.k3 = rep.c12 + rep.c23 - rep.c13;
  rep.violated = rep.k3 > 1.0 + rep.threshold;
  return rep;
}

inline LgReport lg_correlators(double theta) {
  return lg_correlators(lg_qubit_scenario(theta));
}

inline double total_variation(const std::vector<double>& p,
                              const std::vector<double>& q) {
  if (p.size() != q.size())
    throw DimensionMismatch("total_variation: length mismatch");
  double s = 0.0;
  for (size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

namespace detail {

inline NsitReport nsit_from_channel(
    const Scenario& sc,
    const std::function<Vec(const Vec&, const std::string&)>& with_channel,
    bool conditioned) {
  if (sc.default_measurements.empty() || sc.default_preps.empty())
    throw WrongScenarioKind("nsit_delta: scenario '" + sc.name +
                            "' has no default preparations or measurements");
  const Measurement& fin = sc.default_measurements.front();
  NsitReport rep;
  rep.conditioned = conditioned;
  for (const auto& prep : sc.default_preps) {
    const State& s = named_state(sc, prep);
    Vec v = with_channel(s.vec, prep);
    std::vector<double> absent, present;
    for (const auto& elbl : fin.effects) {
      const Effect& e = named_effect(sc, elbl);
      absent.push_back(probability(e, s));
      present.push_back(branch_probability(e.vec, v));
    }
    double tv = total_variation(absent, present);
    if (tv >= rep.delta) {
      rep.delta = tv;
      rep.prep = prep;
    }
  }
  rep.violated = rep.delta > rep.threshold;
  return rep;
}

}  // namespace detail

// Branch-marginalized form: the intermediate instrument is applied and its
// outcome discarded.
inline NsitReport nsit_delta(const Scenario& sc,
                             const std::string& instrument) {
  Mat ch = detail::marginal_channel(named_instrument(sc, instrument));
  return detail::nsit_from_channel(
      sc, [&](const Vec& v, const std::string&) { return Vec(ch * v); },
      false);
}

// Null-conditioned form: statistics are kept only when the null branch fired
// and renormalized.
inline NsitReport nsit_delta(const Scenario& sc, const NullResultSpec& spec) {
  const Instrument& ins = named_instrument(sc, spec.instrument);
  int b = detail::branch_index(ins, spec.null_outcome, spec.instrument);
  const Mat& m = ins.branches.at(b).matrix;
  return detail::nsit_from_channel(
      sc,
      [&](const Vec& v, const std::string& prep) {
        Vec w = m * v;
        double q = detail::branch_probability(sc.system.unit.vec, w);
        if (q < 1e-12)
          throw NullOutcomeProbabilityZero("null branch '" +
                                           spec.null_outcome +
                                           "' has probability 0 on '" + prep +
                                           "'");
        return Vec(w / q);
      },
      true);
}

}  // namespace gptkit
