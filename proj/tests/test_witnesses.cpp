#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "gptkit/embedding.hpp"
#include "gptkit/scenarios.hpp"
#include "gptkit/simulator.hpp"
#include "gptkit/tomography.hpp"
#include "gptkit/witnesses.hpp"
#include "oracles.hpp"

using namespace gptkit;

namespace {

RealizedGpt exact_fit(const Scenario& sc) {
  auto dm =
      build_data_matrix(sc, sc.default_preps, sc.default_measurements, 0, 7);
  return fit_realized_gpt(dm);
}

void check_report_invariants(const NondisturbanceReport& rep) {
  double mx = 0.0;
  for (const auto& [lbl, d] : rep.control_disturbances) {
    CHECK(d >= 0.0);
    mx = std::max(mx, d);
  }
  CHECK(rep.max_control == Catch::Approx(mx).margin(1e-15));
  CHECK(rep.witness_value ==
        Catch::Approx(rep.test_disturbance - rep.max_control).margin(1e-15));
  CHECK(rep.fires == (rep.witness_value > rep.threshold));
}

// Three-vertex system where the map folds vertex c onto vertex 0 and leaves
// the other two alone.
Scenario three_state_fold_scenario() {
  Scenario sc;
  sc.name = "three_state_fold";
  sc.system = make_simplicial(3);
  sc.ground_truth = GroundTruth::StrictlyClassical;
  for (int i = 0; i < 3; ++i) {
    Vec v = Vec::Zero(3);
    v(i) = 1.0;
    sc.states["v" + std::to_string(i)] = State{v, 1.0};
    sc.effects["e" + std::to_string(i)] = Effect{v};
  }
  Mat fold(3, 3);
  fold << 1, 0, 1, 0, 1, 0, 0, 0, 0;
  sc.transforms["fold"] = {fold, TransformKind::Preserving};
  sc.transforms["identity"] = {Mat::Identity(3, 3),
                               TransformKind::Preserving};
  sc.default_preps = {"v0", "v1", "v2"};
  sc.default_measurements = {{"read", {"e0", "e1", "e2"}}};
  return sc;
}

}  // namespace

TEST_CASE("disturbance values on the noisy-control swap scenario") {
  Scenario sc = counterexample_scenario();
  CHECK(disturbance(sc, "sbar1", "phi", "e") == Catch::Approx(1.0));
  CHECK(disturbance(sc, "sbar2", "phi", "e") == Catch::Approx(1.0));
  CHECK(disturbance(sc, "s1", "phi", "e") == Catch::Approx(0.5));
  CHECK(disturbance(sc, "s2", "phi", "e") == Catch::Approx(0.5));
  for (const auto& lbl : {"sbar1", "sbar2", "s1", "s2"})
    CHECK(disturbance(sc, lbl, "identity", "e") ==
          Catch::Approx(0.0).margin(1e-12));
  CHECK_THROWS_AS(disturbance(sc, "nope", "phi", "e"), UnknownLabel);
  CHECK_THROWS_AS(disturbance(sc, "s1", "nope", "e"), UnknownLabel);
  CHECK_THROWS_AS(disturbance(sc, "s1", "phi", "nope"), UnknownLabel);
}

TEST_CASE("phase flip spares the path states and inverts the ports") {
  Scenario sc = interferometer_scenario();
  CHECK(disturbance(sc, "path_a_state", "phase_flip", "bright") ==
        Catch::Approx(0.0).margin(1e-12));
  CHECK(disturbance(sc, "path_b_state", "phase_flip", "bright") ==
        Catch::Approx(0.0).margin(1e-12));
  CHECK(disturbance(sc, "input", "phase_flip", "bright") ==
        Catch::Approx(1.0));

  // Independent projective-model check of the same three numbers.
  using oracles::born;
  using oracles::density;
  using oracles::rotation_unitary;
  using oracles::sharp_povm;
  using Vec3 = oracles::Vec3;
  auto u = rotation_unitary(Vec3(0, 0, 1), M_PI);
  for (const auto& [bloch, expect] :
       std::vector<std::pair<Vec3, double>>{{Vec3(0, 0, 1), 0.0},
                                            {Vec3(0, 0, -1), 0.0},
                                            {Vec3(1, 0, 0), 1.0}}) {
    auto rho = density(bloch);
    double before = born(rho, sharp_povm(Vec3(1, 0, 0)));
    double after = born(u * rho * u.adjoint(), sharp_povm(Vec3(1, 0, 0)));
    CHECK(std::abs(after - before) == Catch::Approx(expect).margin(1e-12));
  }

  auto rep = nondisturbance_witness(sc, {"path_a_state", "path_b_state"},
                                    "input", "phase_flip", "bright");
  check_report_invariants(rep);
  CHECK(rep.max_control == Catch::Approx(0.0).margin(1e-12));
  CHECK(rep.test_disturbance == Catch::Approx(1.0));
  CHECK(rep.fires);
}

TEST_CASE("witness fires on noisy controls of a simplex-embeddable system") {
  Scenario sc = counterexample_scenario(0.25);

  auto rep = nondisturbance_witness(sc, {"s1", "s2"}, "sbar1", "phi", "e");
  check_report_invariants(rep);
  CHECK(rep.max_control == Catch::Approx(0.5));
  CHECK(rep.test_disturbance == Catch::Approx(1.0));
  CHECK(rep.witness_value == Catch::Approx(0.5));
  CHECK(rep.trials == 0);
  CHECK(rep.fires);

  // The same scenario's full exact data is two-dimensional and classical.
  auto cls = classify(exact_fit(sc));
  CHECK(cls.label == MacroClass::ConsistentWithMacrorealism);
  CHECK(cls.same_dimension.verdict == Verdict::Feasible);

  // With the crisp states as controls the ordering flips and nothing fires.
  auto quiet = nondisturbance_witness(sc, {"sbar1", "sbar2"}, "s1", "phi",
                                      "e");
  check_report_invariants(quiet);
  CHECK(quiet.max_control == Catch::Approx(1.0));
  CHECK(quiet.test_disturbance == Catch::Approx(0.5));
  CHECK_FALSE(quiet.fires);
}

TEST_CASE("a state outside the control family trips the witness") {
  Scenario sc = three_state_fold_scenario();
  CHECK(disturbance(sc, "v0", "fold", "e0") == Catch::Approx(0.0));
  CHECK(disturbance(sc, "v1", "fold", "e0") == Catch::Approx(0.0));
  CHECK(disturbance(sc, "v2", "fold", "e0") == Catch::Approx(1.0));

  auto rep = nondisturbance_witness(sc, {"v0", "v1"}, "v2", "fold", "e0");
  check_report_invariants(rep);
  CHECK(rep.max_control == Catch::Approx(0.0).margin(1e-12));
  CHECK(rep.fires);

  auto cls = classify(exact_fit(sc));
  CHECK(cls.label == MacroClass::ConsistentWithMacrorealism);
}

TEST_CASE("sampled witness agrees with exact mode on large samples") {
  Scenario sc = counterexample_scenario();
  auto exact = nondisturbance_witness(sc, {"s1", "s2"}, "sbar1", "phi", "e");
  auto rep =
      nondisturbance_witness(sc, {"s1", "s2"}, "sbar1", "phi", "e", 20000, 5);
  check_report_invariants(rep);
  CHECK(rep.trials == 20000);
  CHECK(rep.threshold > 0.0);
  CHECK(rep.threshold < 0.05);
  CHECK(rep.witness_value ==
        Catch::Approx(exact.witness_value).margin(3 * rep.threshold));
  CHECK(rep.fires);

  auto quiet = nondisturbance_witness(sc, {"sbar1", "sbar2"}, "s1", "phi",
                                      "e", 20000, 5);
  check_report_invariants(quiet);
  CHECK_FALSE(quiet.fires);
}

TEST_CASE("null-result form records the conditioning mode") {
  Scenario sc = interferometer_scenario();
  NullResultSpec phi{"which_path", "a"};

  auto cond = nondisturbance_witness(sc, {"path_a_state"}, "input", phi, true,
                                     "bright");
  check_report_invariants(cond);
  CHECK(cond.conditioned);
  CHECK(cond.max_control == Catch::Approx(0.0).margin(1e-12));
  CHECK(cond.test_disturbance == Catch::Approx(0.5));
  CHECK(cond.fires);

  auto marg = nondisturbance_witness(sc, {"path_a_state", "path_b_state"},
                                     "input", phi, false, "bright");
  check_report_invariants(marg);
  CHECK_FALSE(marg.conditioned);
  CHECK(marg.max_control == Catch::Approx(0.0).margin(1e-12));
  CHECK(marg.test_disturbance == Catch::Approx(0.5));
  CHECK(marg.fires);

  // Conditioning on a branch the state never takes is an error.
  CHECK_THROWS_AS(nondisturbance_witness(sc, {"path_b_state"}, "input", phi,
                                         true, "bright"),
                  NullOutcomeProbabilityZero);

  // Sampled conditioned statistics stay close to the exact ones.
  auto samp = nondisturbance_witness(sc, {"path_a_state"}, "input", phi, true,
                                     "bright", 20000, 9);
  check_report_invariants(samp);
  CHECK(samp.conditioned);
  CHECK(samp.trials == 20000);
  CHECK(samp.witness_value == Catch::Approx(0.5).margin(3 * samp.threshold));
}

TEST_CASE("control mixtures never exceed the worst control disturbance") {
  Scenario ce = counterexample_scenario();
  CHECK(convexity_bound_check(ce, {"sbar1", "sbar2"}, "phi", "e", 1000, 3));
  CHECK(convexity_bound_check(ce, {"s1", "s2"}, "phi", "e", 1000, 3));
  CHECK(convexity_bound_check(ce, {"s1", "s2", "sbar1", "sbar2"}, "phi", "e",
                              1000, 4));
  CHECK(convexity_bound_check(ce, {"sbar1", "sbar2"}, "identity", "e", 200,
                              5));

  Scenario cb = classical_bit_scenario();
  CHECK(convexity_bound_check(cb, {"0", "1"}, "identity", "e0", 200, 6));

  Scenario fold = three_state_fold_scenario();
  CHECK(convexity_bound_check(fold, {"v0", "v1", "v2"}, "fold", "e0", 1000,
                              7));
}

TEST_CASE("rotating qubit correlators match the projective model") {
  auto rep = lg_correlators(M_PI / 3);
  CHECK(rep.c12 == Catch::Approx(0.5).margin(1e-9));
  CHECK(rep.c23 == Catch::Approx(0.5).margin(1e-9));
  CHECK(rep.c13 == Catch::Approx(-0.5).margin(1e-9));
  CHECK(rep.k3 == Catch::Approx(1.5).margin(1e-9));
  CHECK(rep.k3 == Catch::Approx(rep.c12 + rep.c23 - rep.c13).margin(1e-12));
  CHECK(rep.violated);

  auto frozen = lg_correlators(0.0);
  CHECK(frozen.c12 == Catch::Approx(1.0));
  CHECK(frozen.c23 == Catch::Approx(1.0));
  CHECK(frozen.c13 == Catch::Approx(1.0));
  CHECK(frozen.k3 == Catch::Approx(1.0));
  CHECK_FALSE(frozen.violated);

  // Sequential projective oracle: prepare z+, rotate by theta between slots,
  // measure z sharply with Lueders update.
  using oracles::born;
  using oracles::density;
  using oracles::rotation_unitary;
  using oracles::sharp_povm;
  using Vec3 = oracles::Vec3;
  using Mat2c = oracles::Mat2c;
  // project_update returns the subnormalized branch P rho P, so the branch
  // probability is already inside the second Born value.
  auto oracle_corr = [](double theta, int pre, int gap) {
    auto u = rotation_unitary(Vec3(0, 1, 0), theta);
    Vec3 z(0, 0, 1);
    Mat2c rho = density(z);
    for (int t = 0; t < pre; ++t) rho = u * rho * u.adjoint();
    double c = 0.0;
    for (int a = 0; a < 2; ++a) {
      Vec3 na = a == 0 ? z : Vec3(-z);
      Mat2c rha = oracles::project_update(rho, na);
      for (int t = 0; t < gap; ++t) rha = u * rha * u.adjoint();
      for (int b = 0; b < 2; ++b) {
        Vec3 nb = b == 0 ? z : Vec3(-z);
        double va = a == 0 ? 1.0 : -1.0;
        double vb = b == 0 ? 1.0 : -1.0;
        c += va * vb * born(rha, sharp_povm(nb));
      }
    }
    return c;
  };
  for (double theta : {0.3, 0.7, 1.2, 2.1}) {
    auto r = lg_correlators(theta);
    CHECK(r.c12 == Catch::Approx(oracle_corr(theta, 0, 1)).margin(1e-9));
    CHECK(r.c23 == Catch::Approx(oracle_corr(theta, 1, 1)).margin(1e-9));
    CHECK(r.c13 == Catch::Approx(oracle_corr(theta, 0, 2)).margin(1e-9));
    CHECK(r.k3 == Catch::Approx(r.c12 + r.c23 - r.c13).margin(1e-12));
  }

  CHECK_THROWS_AS(lg_correlators(classical_bit_scenario()),
                  WrongScenarioKind);
}

TEST_CASE("classical two-state chains never beat the three-time bound") {
  uint64_t key = fnv1a64("lg-classical-chain");
  uint64_t ctr = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Scenario sc = classical_bit_scenario();
    double a = keyed_uniform(key, ctr++);
    double b = keyed_uniform(key, ctr++);
    Mat step(2, 2);
    step << a, b, 1.0 - a, 1.0 - b;
    sc.transforms["step"] = {step, TransformKind::Preserving};
    double p0 = keyed_uniform(key, ctr++);
    Vec init(2);
    init << p0, 1.0 - p0;
    sc.states["chain_init"] = State{init, 1.0};
    auto rep = lg_correlators(sc, LgLabels{"chain_init", "step", "read"});
    CHECK(rep.k3 <= 1.0 + 1e-9);
    CHECK(rep.k3 >= -3.0 - 1e-9);
    CHECK(rep.k3 ==
          Catch::Approx(rep.c12 + rep.c23 - rep.c13).margin(1e-12));
  }
}

TEST_CASE("which-path detection shifts the fringe statistics") {
  Scenario sc = nsit_qubit_scenario();

  auto marg = nsit_delta(sc, "measure");
  CHECK(marg.delta == Catch::Approx(0.5).margin(1e-9));
  CHECK(marg.violated);
  CHECK_FALSE(marg.conditioned);
  CHECK(marg.prep == "init");

  auto cond = nsit_delta(sc, NullResultSpec{"measure", "+"});
  CHECK(cond.delta == Catch::Approx(0.5).margin(1e-9));
  CHECK(cond.violated);
  CHECK(cond.conditioned);

  // Projective oracle for the marginalized branch: 1 vs 1/2 on the + port.
  using oracles::born;
  using oracles::density;
  using oracles::project_update;
  using oracles::sharp_povm;
  using Vec3 = oracles::Vec3;
  auto rho = density(Vec3(1, 0, 0));
  auto povm = sharp_povm(Vec3(1, 0, 0));
  double without = born(rho, povm);
  auto mixed = born(project_update(rho, Vec3(0, 0, 1)), povm) +
               born(project_update(rho, Vec3(0, 0, -1)), povm);
  CHECK(std::abs(without - mixed) == Catch::Approx(0.5).margin(1e-12));

  SECTION("identity channel leaves the statistics alone") {
    Scenario id = sc;
    id.instruments["noop"] = Instrument{
        {{Mat::Identity(4, 4), TransformKind::Nonincreasing}}, {"pass"}};
    auto rep = nsit_delta(id, "noop");
    CHECK(rep.delta == Catch::Approx(0.0).margin(1e-12));
    CHECK_FALSE(rep.violated);
  }

  SECTION("classical discriminator does not signal in time") {
    Scenario cb = classical_bit_scenario();
    auto rep = nsit_delta(cb, "read");
    CHECK(rep.delta == Catch::Approx(0.0).margin(1e-12));
    CHECK_FALSE(rep.violated);
  }

  SECTION("conditioning on an impossible branch is an error") {
    Scenario down = sc;
    down.states["zminus"] =
        State{qubit::state(qubit::Vec3(0, 0, -1)), 1.0};
    down.default_preps = {"zminus"};
    CHECK_THROWS_AS(nsit_delta(down, NullResultSpec{"measure", "+"}),
                    NullOutcomeProbabilityZero);
    CHECK_THROWS_AS(nsit_delta(down, NullResultSpec{"measure", "bogus"}),
                    UnknownLabel);
  }
}

TEST_CASE("total variation is a metric dominating outcome differences") {
  uint64_t key = fnv1a64("tv-metric");
  uint64_t ctr = 0;
  auto draw = [&](int n) {
    std::vector<double> p(n);
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      p[i] = keyed_uniform(key, ctr++) + 1e-3;
      s += p[i];
    }
    for (auto& x : p) x /= s;
    return p;
  };
  for (int trial = 0; trial < 50; ++trial) {
    auto p = draw(4), q = draw(4), r = draw(4);
    double pq = total_variation(p, q);
    CHECK(pq >= 0.0);
    CHECK(pq <= 1.0);
    CHECK(pq == Catch::Approx(total_variation(q, p)).margin(1e-15));
    CHECK(total_variation(p, p) == Catch::Approx(0.0).margin(1e-15));
    CHECK(total_variation(p, r) <= pq + total_variation(q, r) + 1e-15);
    for (size_t i = 0; i < p.size(); ++i)
      CHECK(pq >= std::abs(p[i] - q[i]) - 1e-15);
  }
  CHECK_THROWS_AS(total_variation({0.5, 0.5}, {1.0}), DimensionMismatch);
}
