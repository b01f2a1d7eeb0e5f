#pragma once

// Named experiment presets. Each scenario bundles a system with labeled
// states, effects, transforms and instruments, plus default preparation and
// measurement lists for data collection. Qubit scenarios use the
// four-component representation (normalization, then Bloch x/y/z): a state is
// (1, b) and the sharp effect along unit direction n is (1, n)/2, so
// probabilities come out as (1 + n.b)/2.

#include <Eigen/Geometry>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "gptkit/core.hpp"
#include "gptkit/errors.hpp"

namespace gptkit {

enum class GroundTruth { StrictlyClassical, Quantum, Other };

// A measurement is a labeled effect list that must sum to the unit effect.
struct Measurement {
  std::string id;
  std::vector<std::string> effects;
};

struct Scenario {
  std::string name;
  System system;
  std::map<std::string, State> states;
  std::map<std::string, Effect> effects;
  std::map<std::string, Transformation> transforms;
  std::map<std::string, Instrument> instruments;
  // Outcome value assignment (e.g. +1/-1) per instrument, for correlators.
  std::map<std::string, std::vector<double>> outcome_values;
  std::vector<std::string> default_preps;
  std::vector<Measurement> default_measurements;
  GroundTruth ground_truth = GroundTruth::Other;
};

template <class M>
const typename M::mapped_type& lookup(const M& m, const std::string& key,
                                      const char* what) {
  auto it = m.find(key);
  if (it == m.end())
    throw UnknownLabel(std::string(what) + " label not found: " + key);
  return it->second;
}

inline const State& named_state(const Scenario& sc, const std::string& k) {
  return lookup(sc.states, k, "state");
}
inline const Effect& named_effect(const Scenario& sc, const std::string& k) {
  return lookup(sc.effects, k, "effect");
}
inline const Transformation& named_transform(const Scenario& sc,
                                             const std::string& k) {
  return lookup(sc.transforms, k, "transform");
}
inline const Instrument& named_instrument(const Scenario& sc,
                                          const std::string& k) {
  return lookup(sc.instruments, k, "instrument");
}

// Maximally mixed state: uniform vertex mixture for simplicial systems,
// else whatever the builder designated (stored on the system).
struct MixedStateTag {};

inline State maximally_mixed(const System& sys) {
  if (sys.simplicial)
    return State{Vec::Constant(sys.dim, 1.0 / sys.dim), 1.0};
  if (sys.dim >= 1 && sys.unit.vec.size() == sys.dim &&
      std::abs(sys.unit.vec(0) - 1.0) < kLinTol) {
    // Qubit-style layout: normalization in slot 0, rest averages to zero.
    Vec v = Vec::Zero(sys.dim);
    v(0) = 1.0;
    return State{v, 1.0};
  }
  if (sys.states.empty())
    throw EmptyGeneratorList("maximally_mixed: no state generators");
  Vec v = Vec::Zero(sys.dim);
  for (const auto& s : sys.states) v += s.vec / s.normalization;
  v /= static_cast<double>(sys.states.size());
  return State{v, 1.0};
}

inline State depolarize(const System& sys, const State& s, double r) {
  if (r < 0.0 || r > 1.0)
    throw RateOutOfRange("depolarize: rate " + std::to_string(r));
  State mixed = maximally_mixed(sys);
  State out;
  out.vec = (1.0 - r) * s.vec + r * s.normalization * mixed.vec;
  out.normalization = s.normalization;
  return out;
}

namespace qubit {

using Vec3 = Eigen::Vector3d;

inline Vec state(const Vec3& bloch) {
  Vec v(4);
  v << 1.0, bloch(0), bloch(1), bloch(2);
  return v;
}

inline Vec sharp_effect(const Vec3& n) {
  Vec v(4);
  v << 0.5, 0.5 * n(0), 0.5 * n(1), 0.5 * n(2);
  return v;
}

inline Mat rotation(const Vec3& axis, double angle) {
  Mat m = Mat::Identity(4, 4);
  m.block<3, 3>(1, 1) = Eigen::AngleAxisd(angle, axis.normalized()).matrix();
  return m;
}

inline Mat depolarizing_channel(double r) {
  Mat m = Mat::Identity(4, 4);
  m.block<3, 3>(1, 1) *= (1.0 - r);
  return m;
}

// Measure along n and reprepare the corresponding eigenstate. Branch for
// outcome +: |s+><e+| in GPT form, i.e. rank-one outer product.
inline Instrument sharp_instrument(const Vec3& n,
                                   const std::string& plus_label = "+",
                                   const std::string& minus_label = "-") {
  Instrument ins;
  Vec sp = state(n), sm = state(-n);
  Vec ep = sharp_effect(n), em = sharp_effect(-n);
  ins.branches.push_back({sp * ep.transpose(), TransformKind::Nonincreasing});
  ins.branches.push_back({sm * em.transpose(), TransformKind::Nonincreasing});
  ins.outcomes = {plus_label, minus_label};
  return ins;
}

// System whose generator lists are exactly the named fragment pieces.
inline System fragment_system(const std::vector<Vec>& states,
                              const std::vector<Vec>& effects) {
  System sys;
  sys.dim = 4;
  sys.fragment = true;
  Vec u(4);
  u << 1, 0, 0, 0;
  sys.unit = Effect{u};
  sys.zero = Effect{Vec::Zero(4)};
  for (const auto& s : states) sys.states.push_back(State{s, 1.0});
  for (const auto& e : effects) {
    sys.effects.push_back(Effect{e});
    sys.effects.push_back(Effect{u - e});  // complements stay in the fragment
  }
  sys.effects.push_back(sys.unit);
  sys.effects.push_back(sys.zero);
  return sys;
}

}  // namespace qubit

inline Scenario classical_bit_scenario() {
  Scenario sc;
  sc.name = "classical_bit";
  sc.system = make_simplicial(2);
  sc.ground_truth = GroundTruth::StrictlyClassical;
  Vec v0(2), v1(2);
  v0 << 1, 0;
  v1 << 0, 1;
  sc.states["0"] = State{v0, 1.0};
  sc.states["1"] = State{v1, 1.0};
  sc.states["mixed"] = State{Vec::Constant(2, 0.5), 1.0};
  sc.effects["e0"] = Effect{v0};
  sc.effects["e1"] = Effect{v1};
  sc.transforms["identity"] = {Mat::Identity(2, 2), TransformKind::Preserving};
  sc.instruments["read"] = discriminator_instrument(sc.system);
  sc.outcome_values["read"] = {+1.0, -1.0};
  sc.default_preps = {"0", "1", "mixed"};
  sc.default_measurements = {{"read", {"e0", "e1"}}};
  return sc;
}

// Two-state classical system where a swap map goes unnoticed on the noisy
// control states but flips the crisp ones. noise = 0.25 gives controls
// (3/4, 1/4) and (1/4, 3/4).
inline Scenario counterexample_scenario(double noise = 0.25) {
  if (noise < 0.0 || noise > 0.5)
    throw NoiseOutOfRange("counterexample noise " + std::to_string(noise) +
                          " outside [0, 1/2]");
  Scenario sc;
  sc.name = "counterexample";
  sc.system = make_simplicial(2);
  sc.ground_truth = GroundTruth::StrictlyClassical;
  Vec v0(2), v1(2);
  v0 << 1, 0;
  v1 << 0, 1;
  sc.states["sbar1"] = State{v0, 1.0};
  sc.states["sbar2"] = State{v1, 1.0};
  Vec s1(2), s2(2);
  s1 << 1.0 - noise, noise;
  s2 << noise, 1.0 - noise;
  sc.states["s1"] = State{s1, 1.0};
  sc.states["s2"] = State{s2, 1.0};
  Mat swap(2, 2);
  swap << 0, 1, 1, 0;
  sc.transforms["phi"] = {swap, TransformKind::Preserving};
  sc.transforms["identity"] = {Mat::Identity(2, 2), TransformKind::Preserving};
  sc.effects["e"] = Effect{v0};
  sc.effects["not_e"] = Effect{v1};
  sc.instruments["read"] = discriminator_instrument(sc.system);
  sc.outcome_values["read"] = {+1.0, -1.0};
  sc.default_preps = {"s1", "s2", "sbar1", "sbar2"};
  sc.default_measurements = {{"M", {"e", "not_e"}}};
  return sc;
}

// Balanced two-path setup. The which-path instrument leaves both path
// populations untouched yet drops the bright-port probability from 1 to 1/2.
inline Scenario interferometer_scenario() {
  using qubit::sharp_effect;
  using qubit::state;
  using Vec3 = qubit::Vec3;
  Scenario sc;
  sc.name = "interferometer";
  sc.ground_truth = GroundTruth::Quantum;
  Vec3 x(1, 0, 0), z(0, 0, 1);
  std::vector<Vec> sts = {state(x), state(-x), state(z), state(-z)};
  std::vector<Vec> effs = {sharp_effect(z), sharp_effect(x)};
  sc.system = qubit::fragment_system(sts, effs);
  sc.states["input"] = State{state(x), 1.0};
  sc.states["path_a_state"] = State{state(z), 1.0};
  sc.states["path_b_state"] = State{state(-z), 1.0};
  sc.effects["path_a"] = Effect{sharp_effect(z)};
  sc.effects["path_b"] = Effect{sharp_effect(-z)};
  sc.effects["bright"] = Effect{sharp_effect(x)};
  sc.effects["dark"] = Effect{sharp_effect(-x)};
  sc.instruments["which_path"] = qubit::sharp_instrument(z, "a", "b");
  sc.outcome_values["which_path"] = {+1.0, -1.0};
  sc.transforms["identity"] = {Mat::Identity(4, 4), TransformKind::Preserving};
  // Half-wave shift in one arm: fixes both path populations, swaps the ports.
  sc.transforms["phase_flip"] = {qubit::rotation(Vec3(0, 0, 1), M_PI),
                                 TransformKind::Preserving};
  sc.default_preps = {"input"};
  sc.default_measurements = {{"path", {"path_a", "path_b"}},
                             {"detector", {"bright", "dark"}}};
  return sc;
}

// Three-time temporal-correlation setup: spin up, rotate by theta about y
// between measurement slots, sharp z readout with +1/-1 outcome values.
inline Scenario lg_qubit_scenario(double theta) {
  using qubit::sharp_effect;
  using qubit::state;
  using Vec3 = qubit::Vec3;
  Scenario sc;
  sc.name = "lg_qubit";
  sc.ground_truth = GroundTruth::Quantum;
  Vec3 y(0, 1, 0), z(0, 0, 1);
  std::vector<Vec> sts = {state(z), state(-z)};
  std::vector<Vec> effs = {sharp_effect(z)};
  sc.system = qubit::fragment_system(sts, effs);
  sc.states["init"] = State{state(z), 1.0};
  sc.effects["plus"] = Effect{sharp_effect(z)};
  sc.effects["minus"] = Effect{sharp_effect(-z)};
  sc.transforms["evolution"] = {qubit::rotation(y, theta),
                                TransformKind::Preserving};
  sc.instruments["measure"] = qubit::sharp_instrument(z);
  sc.outcome_values["measure"] = {+1.0, -1.0};
  sc.default_preps = {"init"};
  sc.default_measurements = {{"Q", {"plus", "minus"}}};
  return sc;
}

// Prepare along +x, optionally measure z in between, read out along x. The
// final +x probability is 1 without the intermediate measurement and 1/2
// with it marginalized, so the two-time marginal shifts by 1/2.
inline Scenario nsit_qubit_scenario() {
  using qubit::sharp_effect;
  using qubit::state;
  using Vec3 = qubit::Vec3;
  Scenario sc;
  sc.name = "nsit_qubit";
  sc.ground_truth = GroundTruth::Quantum;
  Vec3 x(1, 0, 0), z(0, 0, 1);
  std::vector<Vec> sts = {state(x), state(z), state(-z)};
  std::vector<Vec> effs = {sharp_effect(x), sharp_effect(z)};
  sc.system = qubit::fragment_system(sts, effs);
  sc.states["init"] = State{state(x), 1.0};
  sc.effects["final_plus"] = Effect{sharp_effect(x)};
  sc.effects["final_minus"] = Effect{sharp_effect(-x)};
  sc.instruments["measure"] = qubit::sharp_instrument(z);
  sc.outcome_values["measure"] = {+1.0, -1.0};
  sc.transforms["identity"] = {Mat::Identity(4, 4), TransformKind::Preserving};
  sc.default_preps = {"init"};
  sc.default_measurements = {{"F", {"final_plus", "final_minus"}}};
  return sc;
}

// Six Bloch-axis preparations probed with the three sharp axis measurements.
inline Scenario qubit_octahedron_scenario() {
  using qubit::sharp_effect;
  using qubit::state;
  using Vec3 = qubit::Vec3;
  Scenario sc;
  sc.name = "qubit_octahedron";
  sc.ground_truth = GroundTruth::Quantum;
  const std::vector<std::pair<std::string, Vec3>> axes = {
      {"x", Vec3(1, 0, 0)}, {"y", Vec3(0, 1, 0)}, {"z", Vec3(0, 0, 1)}};
  std::vector<Vec> sts, effs;
  for (const auto& [nm, ax] : axes) {
    sts.push_back(state(ax));
    sts.push_back(state(-ax));
    effs.push_back(sharp_effect(ax));
  }
  sc.system = qubit::fragment_system(sts, effs);
  for (const auto& [nm, ax] : axes) {
    sc.states[nm + "p"] = State{state(ax), 1.0};
    sc.states[nm + "m"] = State{state(-ax), 1.0};
    sc.effects[nm + "+"] = Effect{sharp_effect(ax)};
    sc.effects[nm + "-"] = Effect{sharp_effect(-ax)};
    sc.default_preps.push_back(nm + "p");
    sc.default_preps.push_back(nm + "m");
    sc.default_measurements.push_back({nm, {nm + "+", nm + "-"}});
  }
  sc.transforms["identity"] = {Mat::Identity(4, 4), TransformKind::Preserving};
  return sc;
}

// The x/z equatorial fragment: four preparations, two sharp measurements.
inline Scenario rebit_xz_scenario() {
  using qubit::sharp_effect;
  using qubit::state;
  using Vec3 = qubit::Vec3;
  Scenario sc;
  sc.name = "rebit_xz";
  sc.ground_truth = GroundTruth::Quantum;
  Vec3 x(1, 0, 0), z(0, 0, 1);
  std::vector<Vec> sts = {state(x), state(-x), state(z), state(-z)};
  std::vector<Vec> effs = {sharp_effect(x), sharp_effect(z)};
  sc.system = qubit::fragment_system(sts, effs);
  sc.states["xp"] = State{state(x), 1.0};
  sc.states["xm"] = State{state(-x), 1.0};
  sc.states["zp"] = State{state(z), 1.0};
  sc.states["zm"] = State{state(-z), 1.0};
  sc.effects["x+"] = Effect{sharp_effect(x)};
  sc.effects["x-"] = Effect{sharp_effect(-x)};
  sc.effects["z+"] = Effect{sharp_effect(z)};
  sc.effects["z-"] = Effect{sharp_effect(-z)};
  sc.transforms["identity"] = {Mat::Identity(4, 4), TransformKind::Preserving};
  sc.default_preps = {"xp", "xm", "zp", "zm"};
  sc.default_measurements = {{"X", {"x+", "x-"}}, {"Z", {"z+", "z-"}}};
  return sc;
}

namespace detail {

// Deterministic unit directions from the keyed counter stream; "random"
// scenario presets are identical across platforms and reruns.
inline qubit::Vec3 random_direction(uint64_t key, uint64_t i) {
  double z = 2.0 * keyed_uniform(key, 2 * i) - 1.0;
  double phi = 2.0 * M_PI * keyed_uniform(key, 2 * i + 1);
  double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return qubit::Vec3(r * std::cos(phi), r * std::sin(phi), z);
}

}  // namespace detail

// `count` deterministic pseudo-random directions; each contributes a pure
// preparation and the sharp two-outcome measurement along the same axis.
inline Scenario sharp_qubit_scenario(int count = 20, uint64_t seed = 11) {
  if (count < 1) throw Error("sharp_qubit_scenario: count must be >= 1");
  Scenario sc;
  sc.name = "sharp_qubit";
  sc.ground_truth = GroundTruth::Quantum;
  uint64_t key = hash_combine64(seed, fnv1a64("sharp_qubit"));
  std::vector<Vec> sts, effs;
  std::vector<qubit::Vec3> dirs;
  for (int i = 0; i < count; ++i) {
    dirs.push_back(detail::random_direction(key, static_cast<uint64_t>(i)));
    sts.push_back(qubit::state(dirs.back()));
    effs.push_back(qubit::sharp_effect(dirs.back()));
  }
  sc.system = qubit::fragment_system(sts, effs);
  for (int i = 0; i < count; ++i) {
    std::string id = "d" + std::to_string(i);
    sc.states[id] = State{sts[i], 1.0};
    sc.effects[id + "+"] = Effect{effs[i]};
    sc.effects[id + "-"] = Effect{sc.system.unit.vec - effs[i]};
    sc.default_preps.push_back(id);
    sc.default_measurements.push_back({id, {id + "+", id + "-"}});
  }
  sc.transforms["identity"] = {Mat::Identity(4, 4), TransformKind::Preserving};
  return sc;
}

// Validates the system together with every named object attached to it.
inline ValidationReport validate_scenario(const Scenario& sc) {
  System aug = sc.system;
  for (const auto& [k, s] : sc.states) aug.states.push_back(s);
  for (const auto& [k, e] : sc.effects) aug.effects.push_back(e);
  for (const auto& [k, t] : sc.transforms) aug.transformations.push_back(t);
  for (const auto& [k, i] : sc.instruments) aug.instruments.push_back(i);
  if (!aug.simplicial) aug.fragment = true;
  return validate_system(aug);
}

}  // namespace gptkit
