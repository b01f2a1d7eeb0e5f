#include <catch2/catch_amalgamated.hpp>

#include "gptkit/core.hpp"

using namespace gptkit;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

bool has_violation(const ValidationReport& rep, const std::string& kind) {
  for (const auto& v : rep.violations)
    if (v.kind == kind) return true;
  return false;
}

double violation_magnitude(const ValidationReport& rep,
                           const std::string& kind) {
  for (const auto& v : rep.violations)
    if (v.kind == kind) return v.magnitude;
  return -1.0;
}

}  // namespace

TEST_CASE("simplicial systems have vertex states and hypercube effects") {
  for (int d : {1, 2, 3}) {
    System sys = make_simplicial(d);
    CHECK(sys.dim == d);
    CHECK(sys.states.size() == static_cast<size_t>(d));
    CHECK(sys.effects.size() == static_cast<size_t>(1 << d));
    CHECK(sys.unit.vec.sum() == d);
    CHECK(sys.zero.vec.isZero());
    CHECK(validate_system(sys).ok());
  }
  CHECK_THROWS_AS(make_simplicial(0), Error);
}

TEST_CASE("large simplicial systems keep effects implicit") {
  System sys = make_simplicial(16);
  CHECK(sys.implicit_hypercube);
  CHECK(sys.effects.empty());
  CHECK(validate_system(sys).ok());
  CHECK(effect_in_hypercube(sys.unit.vec));
  Vec bad = sys.unit.vec;
  bad(3) = 1.5;
  CHECK_FALSE(effect_in_hypercube(bad));
}

TEST_CASE("probability is the dot product with range checks") {
  State s{v2(0.75, 0.25), 1.0};
  CHECK_THAT(probability(Effect{v2(1, 0)}, s),
             Catch::Matchers::WithinAbs(0.75, 1e-15));
  CHECK_THAT(probability(Effect{v2(0, 1)}, s),
             Catch::Matchers::WithinAbs(0.25, 1e-15));
  CHECK(probability(Effect{v2(1, 1)}, s) == 1.0);

  // Sharp discrimination of a vertex state.
  State vertex{v2(1, 0), 1.0};
  CHECK(probability(Effect{v2(1, 0)}, vertex) == 1.0);
  CHECK(probability(Effect{v2(0, 1)}, vertex) == 0.0);

  // Values a hair outside [0,1] clamp; beyond tolerance they throw.
  CHECK(probability(Effect{v2(1, 0)}, State{v2(1.0 + 5e-10, 0), 1.0}) == 1.0);
  CHECK(probability(Effect{v2(1, 0)}, State{v2(-5e-10, 1), 1.0}) == 0.0);
  CHECK_THROWS_AS(probability(Effect{v2(1, 0)}, State{v2(2.0, -1.0), 1.0}),
                  ProbabilityOutOfRange);

  Vec w(3);
  w << 1, 0, 0;
  CHECK_THROWS_AS(probability(Effect{w}, s), DimensionMismatch);
}

TEST_CASE("apply_transform recomputes normalization") {
  System sys = make_simplicial(2);
  Mat swap(2, 2);
  swap << 0, 1, 1, 0;
  State s{v2(0.75, 0.25), 1.0};
  State t = apply_transform(sys, {swap, TransformKind::Preserving}, s);
  CHECK_THAT(t.vec(0), Catch::Matchers::WithinAbs(0.25, 1e-15));
  CHECK_THAT(t.vec(1), Catch::Matchers::WithinAbs(0.75, 1e-15));
  CHECK(t.normalization == 1.0);

  Mat keep0 = Mat::Zero(2, 2);
  keep0(0, 0) = 1.0;
  State u = apply_transform(sys, {keep0, TransformKind::Nonincreasing}, s);
  CHECK_THAT(u.normalization, Catch::Matchers::WithinAbs(0.75, 1e-15));
}

TEST_CASE("probability is linear in both arguments") {
  System sys = make_simplicial(3);
  Vec a(3), b(3), e1(3), e2(3);
  a << 0.2, 0.3, 0.5;
  b << 0.6, 0.1, 0.3;
  e1 << 1, 0, 1;
  e2 << 0.4, 0.9, 0.1;
  for (double alpha : {0.0, 0.25, 0.7, 1.0}) {
    State mix = make_state(sys, alpha * a + (1 - alpha) * b);
    double lhs = probability(Effect{e1}, mix);
    double rhs = alpha * probability(Effect{e1}, make_state(sys, a)) +
                 (1 - alpha) * probability(Effect{e1}, make_state(sys, b));
    CHECK_THAT(lhs, Catch::Matchers::WithinAbs(rhs, 1e-12));
    Vec emix = alpha * e1 + (1 - alpha) * e2;
    double lhse = probability(Effect{emix}, make_state(sys, a));
    double rhse = alpha * probability(Effect{e1}, make_state(sys, a)) +
                  (1 - alpha) * probability(Effect{e2}, make_state(sys, a));
    CHECK_THAT(lhse, Catch::Matchers::WithinAbs(rhse, 1e-12));
  }
}

TEST_CASE("convex hull membership") {
  std::vector<Vec> gens = {v2(1, 0), v2(0, 1)};
  CHECK(in_convex_hull(v2(0.5, 0.5), gens));
  CHECK(in_convex_hull(v2(1, 0), gens));
  // Displaced off the segment by 0.1: clearly outside.
  CHECK_FALSE(in_convex_hull(v2(0.6, 0.5), gens));
  CHECK_THROWS_AS(in_convex_hull(v2(0, 0), {}), EmptyGeneratorList);
}

TEST_CASE("discriminator instrument repeats and reads out vertices") {
  System sys = make_simplicial(3);
  Instrument disc = discriminator_instrument(sys);
  REQUIRE(disc.branches.size() == 3);

  Vec p(3);
  p << 0.2, 0.3, 0.5;
  State s = make_state(sys, p);
  for (int j = 0; j < 3; ++j) {
    State out = apply_transform(sys, disc.branches[j], s);
    CHECK_THAT(out.normalization, Catch::Matchers::WithinAbs(p(j), 1e-15));
    // Repeating the same branch changes nothing further.
    State again = apply_transform(sys, disc.branches[j], out);
    CHECK((again.vec - out.vec).lpNorm<Eigen::Infinity>() < 1e-15);
    // Other branches annihilate the repreparated vertex.
    for (int l = 0; l < 3; ++l)
      if (l != j)
        CHECK(apply_transform(sys, disc.branches[l], out).normalization <
              1e-15);
  }
  // Branch normalizations sum to 1: the instrument is complete.
  double total = 0;
  for (const auto& b : disc.branches)
    total += apply_transform(sys, b, s).normalization;
  CHECK_THAT(total, Catch::Matchers::WithinAbs(1.0, 1e-12));

  System frag;
  frag.dim = 2;
  CHECK_THROWS_AS(discriminator_instrument(frag), NotSimplicial);
}

TEST_CASE("validate_system flags out-of-range effects") {
  System sys = make_simplicial(2);
  sys.effects.push_back(Effect{v2(1.2, 0)});
  auto rep = validate_system(sys);
  REQUIRE(has_violation(rep, "EffectOutOfRange"));
  CHECK_THAT(violation_magnitude(rep, "EffectOutOfRange"),
             Catch::Matchers::WithinAbs(0.2, 1e-12));
}

TEST_CASE("validate_system flags leaky instruments") {
  System sys = make_simplicial(2);
  Instrument leaky = discriminator_instrument(sys);
  for (auto& b : leaky.branches) b.matrix *= 0.9;
  sys.instruments.push_back(leaky);
  auto rep = validate_system(sys);
  REQUIRE(has_violation(rep, "NormalizationDeficit"));
  CHECK_THAT(violation_magnitude(rep, "NormalizationDeficit"),
             Catch::Matchers::WithinAbs(0.1, 1e-12));
}

TEST_CASE("validate_system checks transforms against their declared kind") {
  System sys = make_simplicial(2);
  sys.transformations.push_back({2.0 * Mat::Identity(2, 2),
                                 TransformKind::Preserving});
  auto rep = validate_system(sys);
  CHECK(has_violation(rep, "TransformNotPreserving"));

  System sys2 = make_simplicial(2);
  sys2.transformations.push_back({2.0 * Mat::Identity(2, 2),
                                  TransformKind::Nonincreasing});
  CHECK(has_violation(validate_system(sys2),
                      "TransformIncreasesNormalization"));

  // A stochastic matrix is fine either way.
  Mat noisy(2, 2);
  noisy << 0.9, 0.2, 0.1, 0.8;
  System sys3 = make_simplicial(2);
  sys3.transformations.push_back({noisy, TransformKind::Preserving});
  CHECK(validate_system(sys3).ok());

  // Positivity: a determinant-preserving sign flip leaves the simplex.
  Mat flip(2, 2);
  flip << 1.5, 0.5, -0.5, 0.5;
  System sys4 = make_simplicial(2);
  sys4.transformations.push_back({flip, TransformKind::Preserving});
  CHECK(has_violation(validate_system(sys4), "TransformNotPositive"));
}

TEST_CASE("validate_system checks complement closure on general systems") {
  System sys;
  sys.dim = 2;
  sys.unit = Effect{v2(1, 1)};
  sys.zero = Effect{v2(0, 0)};
  sys.states = {State{v2(1, 0), 1.0}, State{v2(0, 1), 1.0}};
  sys.effects = {sys.zero, sys.unit, Effect{v2(0.8, 0.1)}};
  auto rep = validate_system(sys);
  CHECK(has_violation(rep, "ComplementNotClosed"));

  sys.effects.push_back(Effect{v2(0.2, 0.9)});  // add the missing complement
  CHECK_FALSE(has_violation(validate_system(sys), "ComplementNotClosed"));
}

TEST_CASE("validate_system flags normalization mismatches") {
  System sys = make_simplicial(2);
  sys.states.push_back(State{v2(0.5, 0.5), 0.9});
  CHECK(has_violation(validate_system(sys), "NormalizationMismatch"));

  System sys2 = make_simplicial(2);
  sys2.states.push_back(State{v2(0.8, 0.8), 1.6});
  CHECK(has_violation(validate_system(sys2), "NormalizationOutOfRange"));
}

TEST_CASE("validate_system flags indistinguishable generators") {
  System sys;
  sys.dim = 2;
  sys.unit = Effect{v2(1, 1)};
  sys.zero = Effect{v2(0, 0)};
  sys.states = {State{v2(0.5, 0.5), 1.0}, State{v2(0.5, 0.5), 1.0}};
  sys.effects = {sys.zero, sys.unit};
  auto rep = validate_system(sys);
  CHECK(has_violation(rep, "StatesNotSeparated"));

  sys.fragment = true;  // fragments are exempt
  CHECK_FALSE(has_violation(validate_system(sys), "StatesNotSeparated"));
}
