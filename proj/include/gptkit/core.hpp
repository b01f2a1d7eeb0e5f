#pragma once

// States, effects, transformations and instruments over a finite-dimensional
// real vector space, with probabilities given by the dot product. A system
// bundles generator lists for the state and effect sets; convex hulls are
// implied. Simplicial systems use the vertex-indicator basis, where states
// live on the probability simplex and effects fill the unit hypercube.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "gptkit/errors.hpp"
#include "gptkit/hull.hpp"
#include "gptkit/numeric.hpp"

namespace gptkit {

struct State {
  Vec vec;
  double normalization = 1.0;  // value of the unit effect on vec
};

struct Effect {
  Vec vec;
};

enum class TransformKind { Preserving, Nonincreasing };

struct Transformation {
  Mat matrix;
  TransformKind kind = TransformKind::Preserving;
};

struct Instrument {
  std::vector<Transformation> branches;  // all Nonincreasing
  std::vector<std::string> outcomes;     // one label per branch
};

struct System {
  int dim = 0;
  std::vector<State> states;    // generators for the state set
  std::vector<Effect> effects;  // generators for the effect set
  Effect unit;
  Effect zero;
  std::vector<Transformation> transformations;
  std::vector<Instrument> instruments;
  bool simplicial = false;
  // Hypercube effect sets beyond d = 12 are not enumerated; membership is
  // tested by coordinate bounds instead.
  bool implicit_hypercube = false;
  // Fragment systems list only the states/effects actually probed, so checks
  // that assume the generators exhaust the true sets are skipped.
  bool fragment = false;
};

inline double probability(const Effect& e, const State& s) {
  if (e.vec.size() != s.vec.size())
    throw DimensionMismatch("probability: effect dim " +
                            std::to_string(e.vec.size()) + " vs state dim " +
                            std::to_string(s.vec.size()));
  double p = e.vec.dot(s.vec);
  if (p < -kStructTol || p > 1.0 + kStructTol)
    throw ProbabilityOutOfRange("probability " + std::to_string(p) +
                                " outside [0,1]; invalid effect/state pair");
  return std::clamp(p, 0.0, 1.0);
}

inline State make_state(const System& sys, Vec v) {
  if (v.size() != sys.dim) throw DimensionMismatch("make_state: vector size");
  double n = sys.unit.vec.dot(v);
  return State{std::move(v), n};
}

inline State apply_transform(const System& sys, const Transformation& t,
                             const State& s) {
  if (t.matrix.cols() != s.vec.size() || t.matrix.rows() != sys.dim)
    throw DimensionMismatch("apply_transform: matrix shape");
  State out;
  out.vec = t.matrix * s.vec;
  out.normalization = sys.unit.vec.dot(out.vec);
  return out;
}

inline Instrument discriminator_instrument_for_dim(int d) {
  Instrument ins;
  for (int j = 0; j < d; ++j) {
    Mat m = Mat::Zero(d, d);
    m(j, j) = 1.0;  // project onto vertex j and reprepare it
    ins.branches.push_back({m, TransformKind::Nonincreasing});
    ins.outcomes.push_back(std::to_string(j));
  }
  return ins;
}

inline System make_simplicial(int d) {
  if (d < 1) throw Error("make_simplicial: dimension must be >= 1");
  System sys;
  sys.dim = d;
  sys.simplicial = true;
  sys.unit = Effect{Vec::Ones(d)};
  sys.zero = Effect{Vec::Zero(d)};
  for (int j = 0; j < d; ++j) {
    Vec v = Vec::Zero(d);
    v(j) = 1.0;
    sys.states.push_back(State{v, 1.0});
  }
  if (d <= 12) {
    for (long mask = 0; mask < (1L << d); ++mask) {
      Vec e = Vec::Zero(d);
      for (int j = 0; j < d; ++j)
        if (mask & (1L << j)) e(j) = 1.0;
      sys.effects.push_back(Effect{e});
    }
  } else {
    sys.implicit_hypercube = true;
  }
  sys.transformations.push_back(
      {Mat::Identity(d, d), TransformKind::Preserving});
  sys.instruments.push_back(discriminator_instrument_for_dim(d));
  return sys;
}

inline Instrument discriminator_instrument(const System& sys) {
  if (!sys.simplicial)
    throw NotSimplicial("discriminator_instrument: system is not simplicial");
  return discriminator_instrument_for_dim(sys.dim);
}

inline bool effect_in_hypercube(const Vec& e, double tol = kStructTol) {
  return (e.array() >= -tol).all() && (e.array() <= 1.0 + tol).all();
}

struct Violation {
  std::string kind;
  std::string detail;
  double magnitude = 0.0;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

namespace detail {

inline bool subnormalized_member(const System& sys, const Vec& v, double norm,
                                 double tol) {
  if (sys.simplicial || sys.implicit_hypercube)
    return (v.array() >= -tol).all() && std::abs(v.sum() - norm) <= tol;
  std::vector<Vec> gens;
  gens.push_back(Vec::Zero(sys.dim));
  for (const auto& s : sys.states) gens.push_back(s.vec);
  return in_convex_hull(v, gens, tol);
}

inline void check_transform_kind(const System& sys, const Transformation& t,
                                 const std::string& who, double tol,
                                 ValidationReport& rep) {
  for (size_t i = 0; i < sys.states.size(); ++i) {
    const auto& s = sys.states[i];
    Vec v = t.matrix * s.vec;
    double n = sys.unit.vec.dot(v);
    if (t.kind == TransformKind::Preserving) {
      if (std::abs(n - s.normalization) > tol)
        rep.violations.push_back({"TransformNotPreserving",
                                  who + " on state " + std::to_string(i),
                                  std::abs(n - s.normalization)});
    } else {
      if (n < -tol || n > s.normalization + tol)
        rep.violations.push_back({"TransformIncreasesNormalization",
                                  who + " on state " + std::to_string(i),
                                  std::max(-n, n - s.normalization)});
    }
    if (!sys.fragment && !detail::subnormalized_member(sys, v, n, tol))
      rep.violations.push_back(
          {"TransformNotPositive", who + " on state " + std::to_string(i), 0});
  }
}

}  // namespace detail

inline ValidationReport validate_system(const System& sys,
                                        double tol = kStructTol) {
  ValidationReport rep;
  auto bad_dim = [&](const std::string& what, long got) {
    rep.violations.push_back(
        {"DimensionMismatch", what + " has size " + std::to_string(got), 0});
  };
  if (sys.unit.vec.size() != sys.dim) bad_dim("unit effect", sys.unit.vec.size());
  if (sys.zero.vec.size() != sys.dim) bad_dim("zero effect", sys.zero.vec.size());
  for (size_t i = 0; i < sys.states.size(); ++i)
    if (sys.states[i].vec.size() != sys.dim)
      bad_dim("state " + std::to_string(i), sys.states[i].vec.size());
  for (size_t i = 0; i < sys.effects.size(); ++i)
    if (sys.effects[i].vec.size() != sys.dim)
      bad_dim("effect " + std::to_string(i), sys.effects[i].vec.size());
  if (!rep.ok()) return rep;  // remaining checks assume consistent shapes

  auto finite = [](const auto& m) { return m.allFinite(); };
  for (const auto& s : sys.states)
    if (!finite(s.vec) || !std::isfinite(s.normalization)) {
      rep.violations.push_back({"NonFinite", "state entries", 0});
      return rep;
    }
  for (const auto& e : sys.effects)
    if (!finite(e.vec)) {
      rep.violations.push_back({"NonFinite", "effect entries", 0});
      return rep;
    }

  if (sys.zero.vec.lpNorm<Eigen::Infinity>() > tol)
    rep.violations.push_back({"ZeroEffectNonzero", "",
                              sys.zero.vec.lpNorm<Eigen::Infinity>()});

  for (size_t i = 0; i < sys.states.size(); ++i) {
    const auto& s = sys.states[i];
    double n = sys.unit.vec.dot(s.vec);
    if (std::abs(n - s.normalization) > tol)
      rep.violations.push_back({"NormalizationMismatch",
                                "state " + std::to_string(i),
                                std::abs(n - s.normalization)});
    if (s.normalization < -tol || s.normalization > 1.0 + tol)
      rep.violations.push_back({"NormalizationOutOfRange",
                                "state " + std::to_string(i),
                                std::max(-s.normalization,
                                         s.normalization - 1.0)});
  }

  for (size_t j = 0; j < sys.effects.size(); ++j)
    for (size_t i = 0; i < sys.states.size(); ++i) {
      double p = sys.effects[j].vec.dot(sys.states[i].vec);
      if (p < -tol || p > 1.0 + tol)
        rep.violations.push_back({"EffectOutOfRange",
                                  "effect " + std::to_string(j) + " on state " +
                                      std::to_string(i),
                                  std::max(-p, p - 1.0)});
    }

  // Complement closure: u - e must again be an allowed effect. On hypercube
  // effect sets this holds coordinatewise; general lists get a hull test.
  if (sys.simplicial || sys.implicit_hypercube) {
    for (size_t j = 0; j < sys.effects.size(); ++j)
      if (!effect_in_hypercube(sys.unit.vec - sys.effects[j].vec, tol))
        rep.violations.push_back(
            {"ComplementNotClosed", "effect " + std::to_string(j), 0});
  } else if (!sys.effects.empty()) {
    std::vector<Vec> gens;
    for (const auto& e : sys.effects) gens.push_back(e.vec);
    for (size_t j = 0; j < sys.effects.size(); ++j) {
      Vec comp = sys.unit.vec - sys.effects[j].vec;
      if (!in_convex_hull(comp, gens, std::max(tol, 1e-8)))
        rep.violations.push_back(
            {"ComplementNotClosed", "effect " + std::to_string(j), 0});
    }
  }

  // Tomographic separation. Simplicial generators are distinct by
  // construction, and fragments are exempt (their lists are not exhaustive).
  if (!sys.fragment && !sys.simplicial) {
    for (size_t i = 0; i + 1 < sys.states.size(); ++i)
      for (size_t j = i + 1; j < sys.states.size(); ++j) {
        double sep = 0;
        for (const auto& e : sys.effects)
          sep = std::max(sep,
                         std::abs(e.vec.dot(sys.states[i].vec - sys.states[j].vec)));
        if (sep <= tol)
          rep.violations.push_back({"StatesNotSeparated",
                                    std::to_string(i) + "," + std::to_string(j),
                                    sep});
      }
    for (size_t i = 0; i + 1 < sys.effects.size(); ++i)
      for (size_t j = i + 1; j < sys.effects.size(); ++j) {
        double sep = 0;
        for (const auto& s : sys.states)
          sep = std::max(sep,
                         std::abs(s.vec.dot(sys.effects[i].vec - sys.effects[j].vec)));
        if (sep <= tol)
          rep.violations.push_back({"EffectsNotSeparated",
                                    std::to_string(i) + "," + std::to_string(j),
                                    sep});
      }
  }

  for (size_t t = 0; t < sys.transformations.size(); ++t)
    detail::check_transform_kind(sys, sys.transformations[t],
                                 "transform " + std::to_string(t), tol, rep);

  for (size_t k = 0; k < sys.instruments.size(); ++k) {
    const auto& ins = sys.instruments[k];
    if (ins.branches.size() != ins.outcomes.size())
      rep.violations.push_back(
          {"InstrumentLabelMismatch", "instrument " + std::to_string(k), 0});
    Mat total = Mat::Zero(sys.dim, sys.dim);
    for (size_t b = 0; b < ins.branches.size(); ++b) {
      const auto& br = ins.branches[b];
      if (br.kind != TransformKind::Nonincreasing)
        rep.violations.push_back({"InstrumentBranchKind",
                                  "instrument " + std::to_string(k) + " branch " +
                                      std::to_string(b),
                                  0});
      detail::check_transform_kind(
          sys, {br.matrix, TransformKind::Nonincreasing},
          "instrument " + std::to_string(k) + " branch " + std::to_string(b),
          tol, rep);
      total += br.matrix;
    }
    double deficit = 0;
    for (const auto& s : sys.states) {
      double n = sys.unit.vec.dot(total * s.vec);
      deficit = std::max(deficit, std::abs(n - s.normalization));
    }
    if (deficit > tol)
      rep.violations.push_back(
          {"NormalizationDeficit", "instrument " + std::to_string(k), deficit});
  }

  return rep;
}

}  // namespace gptkit
