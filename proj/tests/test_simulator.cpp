#include <catch2/catch_amalgamated.hpp>

#include "gptkit/simulator.hpp"
#include "oracles.hpp"

using namespace gptkit;
using Catch::Matchers::WithinAbs;

TEST_CASE("exact distribution on plain prepare-measure schedules") {
  Scenario sc = counterexample_scenario(0.25);
  Schedule sched = plain_schedule("s1", {"M", {"e", "not_e"}});
  Distribution d = exact_distribution(sc, sched);
  REQUIRE(d.p.size() == 2);
  CHECK_THAT(d.p[0], WithinAbs(0.75, 1e-15));
  CHECK_THAT(d.p[1], WithinAbs(0.25, 1e-15));

  sched.steps.push_back({ScheduleStep::Kind::Transform, "phi"});
  Distribution ds = exact_distribution(sc, sched);
  CHECK_THAT(ds.p[0], WithinAbs(0.25, 1e-15));
  CHECK_THAT(ds.p[1], WithinAbs(0.75, 1e-15));
}

TEST_CASE("incomplete final measurements are rejected") {
  Scenario sc = counterexample_scenario();
  Schedule sched = plain_schedule("s1", {"M", {"e"}});
  CHECK_THROWS_AS(exact_distribution(sc, sched), InvalidMeasurement);
}

TEST_CASE("joint distribution over instrument plus final outcomes") {
  Scenario sc = nsit_qubit_scenario();
  Schedule sched = plain_schedule("init", {"F", {"final_plus", "final_minus"}});
  sched.steps.push_back({ScheduleStep::Kind::Instr, "measure"});
  Distribution d = exact_distribution(sc, sched);
  REQUIRE(d.p.size() == 4);
  for (double p : d.p) CHECK_THAT(p, WithinAbs(0.25, 1e-12));
  double total = 0;
  for (double p : d.p) total += p;
  CHECK_THAT(total, WithinAbs(1.0, 1e-12));
}

TEST_CASE("marginalizing an instrument equals summing its branches") {
  Scenario sc = lg_qubit_scenario(M_PI / 3);
  // Same schedule with the instrument kept vs replaced by its branch sum.
  Scenario sc2 = sc;
  const auto& ins = named_instrument(sc, "measure");
  Mat total = Mat::Zero(4, 4);
  for (const auto& b : ins.branches) total += b.matrix;
  sc2.transforms["measure_sum"] = {total, TransformKind::Preserving};

  Schedule joint = plain_schedule("init", {"Q", {"plus", "minus"}});
  joint.steps.push_back({ScheduleStep::Kind::Transform, "evolution"});
  joint.steps.push_back({ScheduleStep::Kind::Instr, "measure"});
  joint.steps.push_back({ScheduleStep::Kind::Transform, "evolution"});

  Schedule marg = plain_schedule("init", {"Q", {"plus", "minus"}});
  marg.steps.push_back({ScheduleStep::Kind::Transform, "evolution"});
  marg.steps.push_back({ScheduleStep::Kind::Transform, "measure_sum"});
  marg.steps.push_back({ScheduleStep::Kind::Transform, "evolution"});

  Distribution dj = exact_distribution(sc, joint);
  Distribution dm = exact_distribution(sc2, marg);
  REQUIRE(dj.p.size() == 4);
  REQUIRE(dm.p.size() == 2);
  for (int f = 0; f < 2; ++f) {
    double sum = 0;
    for (size_t i = 0; i < dj.p.size(); ++i)
      if (dj.outcomes[i].back() == f) sum += dj.p[i];
    CHECK_THAT(sum, WithinAbs(dm.p[f], 1e-12));
  }
}

TEST_CASE("sampling is deterministic in the seed and cell only") {
  Scenario sc = counterexample_scenario();
  Schedule sched = plain_schedule("s1", {"M", {"e", "not_e"}});
  auto a = sample_counts(sc, sched, 10000, 42);
  auto b = sample_counts(sc, sched, 10000, 42);
  CHECK(a == b);
  auto c = sample_counts(sc, sched, 10000, 43);
  CHECK(a != c);
  long long total = 0;
  for (auto v : a) total += v;
  CHECK(total == 10000);
}

TEST_CASE("deterministic distributions sample deterministically") {
  Scenario sc = counterexample_scenario();
  Schedule sched = plain_schedule("sbar1", {"M", {"e", "not_e"}});
  auto counts = sample_counts(sc, sched, 5000, 7);
  CHECK(counts[0] == 5000);
  CHECK(counts[1] == 0);
}

TEST_CASE("sampled frequencies concentrate at the exact probability") {
  Scenario sc = counterexample_scenario(0.25);
  Schedule sched = plain_schedule("s1", {"M", {"e", "not_e"}});
  const long long n = 1000000;
  auto counts = sample_counts(sc, sched, n, 2024);
  double f = static_cast<double>(counts[0]) / n;
  // 3.5 binomial sigma at p = 0.75.
  CHECK_THAT(f, WithinAbs(0.75, 3.5 * std::sqrt(0.75 * 0.25 / n)));
}

TEST_CASE("cell frequencies stay within five sigma almost always") {
  // 1000 cells at one million trials each; at most one 5-sigma outlier.
  Scenario sc = counterexample_scenario(0.25);
  const long long n = 1000000;
  int outliers = 0, cells = 0;
  for (uint64_t seed = 0; seed < 250; ++seed) {
    for (const auto& prep : sc.default_preps) {
      Schedule sched = plain_schedule(prep, sc.default_measurements[0]);
      Distribution d = exact_distribution(sc, sched);
      auto counts = sample_counts(sc, sched, n, seed);
      double p = d.p[0];
      double f = static_cast<double>(counts[0]) / n;
      double sigma = std::sqrt(std::max(p * (1 - p), 1e-12) / n);
      if (std::abs(f - p) >= 5 * sigma) ++outliers;
      ++cells;
    }
  }
  CHECK(cells == 1000);
  CHECK(outliers <= 1);
}

TEST_CASE("data matrix layout and exact ranks") {
  Scenario sc = counterexample_scenario(0.25);
  DataMatrix dm = build_data_matrix(sc, sc.default_preps,
                                    sc.default_measurements, 0, 0);
  REQUIRE(dm.F.rows() == 4);
  REQUIRE(dm.F.cols() == 3);
  CHECK(dm.F.col(0).isOnes());
  CHECK_THAT(dm.F(0, 1), WithinAbs(0.75, 1e-15));  // s1 under e
  CHECK_THAT(dm.F(2, 1), WithinAbs(1.0, 1e-15));   // sbar1 under e
  CHECK(oracles::matrix_rank(dm.F) == 2);
  CHECK(dm.V.isConstant(1e-6));
  CHECK(dm.record.trials_per_cell == 0);

  Scenario oct = qubit_octahedron_scenario();
  DataMatrix qm = build_data_matrix(oct, oct.default_preps,
                                    oct.default_measurements, 0, 0);
  REQUIRE(qm.F.rows() == 6);
  REQUIRE(qm.F.cols() == 7);
  CHECK(oracles::matrix_rank(qm.F) == 4);
}

TEST_CASE("sampled data matrices carry binomial variances") {
  Scenario sc = counterexample_scenario(0.25);
  const long long n = 10000;
  DataMatrix dm = build_data_matrix(sc, sc.default_preps,
                                    sc.default_measurements, n, 5);
  for (int i = 0; i < dm.F.rows(); ++i)
    for (int j = 0; j < dm.F.cols(); ++j) {
      CHECK(dm.V(i, j) >= 1.0 / (4.0 * n * n) - 1e-18);
      double f = dm.F(i, j);
      CHECK(dm.V(i, j) >= f * (1 - f) / n - 1e-18);
    }
  // The unit column is exact by construction but keeps the variance floor.
  CHECK_THAT(dm.V(0, 0), WithinAbs(1.0 / (4.0 * n * n), 1e-20));
}

TEST_CASE("worker count does not change the record") {
  Scenario sc = qubit_octahedron_scenario();
  DataMatrix a = build_data_matrix(sc, sc.default_preps,
                                   sc.default_measurements, 20000, 9, 1);
  DataMatrix b = build_data_matrix(sc, sc.default_preps,
                                   sc.default_measurements, 20000, 9, 4);
  REQUIRE(a.record.cells.size() == b.record.cells.size());
  for (size_t i = 0; i < a.record.cells.size(); ++i) {
    CHECK(a.record.cells[i].prep == b.record.cells[i].prep);
    CHECK(a.record.cells[i].values == b.record.cells[i].values);
  }
  CHECK((a.F - b.F).lpNorm<Eigen::Infinity>() == 0.0);
}
