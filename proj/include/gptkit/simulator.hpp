#pragma once

// Exact outcome distributions for prepare / transform / measure schedules,
// and finite-sample counts drawn from them. Sampling uses a counter-based
// generator keyed on (seed, preparation, measurement, trial), so results are
// bit-identical regardless of evaluation order or worker count.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <future>
#include <map>
#include <numeric>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "gptkit/core.hpp"
#include "gptkit/errors.hpp"
#include "gptkit/scenarios.hpp"

namespace gptkit {

struct ScheduleStep {
  enum class Kind { Transform, Instr };
  Kind kind = Kind::Transform;
  std::string label;
};

struct Schedule {
  std::string prep;
  std::vector<ScheduleStep> steps;
  std::string measurement_id;
  std::vector<std::string> final_effects;
};

inline Schedule plain_schedule(const std::string& prep, const Measurement& m) {
  return Schedule{prep, {}, m.id, m.effects};
}

// Joint distribution over (instrument outcomes..., final outcome). Outcome
// index tuples follow branch order; probabilities are clamped at -1e-12 and
// anything more negative is treated as an invalid pairing.
struct Distribution {
  std::vector<std::vector<int>> outcomes;
  std::vector<std::string> labels;  // joined outcome labels, "a.b.c"
  std::vector<double> p;
};

inline Distribution exact_distribution(const Scenario& sc,
                                       const Schedule& sched) {
  const System& sys = sc.system;
  const State& prep = named_state(sc, sched.prep);

  Vec esum = Vec::Zero(sys.dim);
  std::vector<const Effect*> finals;
  for (const auto& lbl : sched.final_effects) {
    finals.push_back(&named_effect(sc, lbl));
    esum += finals.back()->vec;
  }
  if ((esum - sys.unit.vec).lpNorm<Eigen::Infinity>() > kStructTol)
    throw InvalidMeasurement("final effects of measurement '" +
                             sched.measurement_id +
                             "' do not sum to the unit effect");

  struct Node {
    Vec v;
    std::vector<int> outcome;
    std::string label;
  };
  std::vector<Node> nodes = {{prep.vec, {}, ""}};
  for (const auto& step : sched.steps) {
    if (step.kind == ScheduleStep::Kind::Transform) {
      const auto& t = named_transform(sc, step.label);
      for (auto& n : nodes) n.v = t.matrix * n.v;
    } else {
      const auto& ins = named_instrument(sc, step.label);
      std::vector<Node> next;
      for (const auto& n : nodes)
        for (size_t b = 0; b < ins.branches.size(); ++b) {
          Node m = n;
          m.v = ins.branches[b].matrix * n.v;
          m.outcome.push_back(static_cast<int>(b));
          m.label += ins.outcomes[b] + ".";
          next.push_back(std::move(m));
        }
      nodes = std::move(next);
    }
  }

  Distribution dist;
  for (const auto& n : nodes)
    for (size_t f = 0; f < finals.size(); ++f) {
      double p = finals[f]->vec.dot(n.v);
      if (p < -kStructTol)
        throw ProbabilityOutOfRange("schedule probability " +
                                    std::to_string(p));
      p = std::clamp(p, 0.0, 1.0);
      auto out = n.outcome;
      out.push_back(static_cast<int>(f));
      dist.outcomes.push_back(std::move(out));
      dist.labels.push_back(n.label + sched.final_effects[f]);
      dist.p.push_back(p);
    }
  return dist;
}

inline uint64_t cell_key(uint64_t seed, const std::string& prep,
                         const std::string& meas) {
  uint64_t k = hash_combine64(seed, fnv1a64(prep));
  return hash_combine64(k, fnv1a64(meas));
}

// n draws from the schedule's exact distribution. Deterministic in
// (seed, prep, measurement_id, trial index) only.
inline std::vector<long long> sample_counts(const Scenario& sc,
                                            const Schedule& sched,
                                            long long n, uint64_t seed) {
  Distribution dist = exact_distribution(sc, sched);
  std::vector<double> cdf(dist.p.size());
  std::partial_sum(dist.p.begin(), dist.p.end(), cdf.begin());
  if (!cdf.empty()) cdf.back() = std::max(cdf.back(), 1.0);
  std::vector<long long> counts(dist.p.size(), 0);
  uint64_t key = cell_key(seed, sched.prep, sched.measurement_id);
  for (long long t = 0; t < n; ++t) {
    double u = keyed_uniform(key, static_cast<uint64_t>(t));
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    ++counts[std::min<size_t>(it - cdf.begin(), counts.size() - 1)];
  }
  return counts;
}

struct CountsCell {
  std::string prep;
  std::string meas;
  std::vector<std::string> outcome_labels;
  std::vector<double> values;  // integer counts, or frequencies when exact
  long long trials = 0;        // 0 marks exact-mode frequencies
};

struct CountsRecord {
  std::string scenario;
  uint64_t seed = 0;
  long long trials_per_cell = 0;
  std::vector<CountsCell> cells;
};

struct DataColumn {
  int measurement = -1;  // -1 for the unit column
  int outcome = -1;
  std::string label;
};

struct DataMatrix {
  CountsRecord record;
  Mat F;  // rows: preparations; col 0: unit, then one col per outcome
  Mat V;  // elementwise variance floor for weighting
  std::vector<std::string> row_ids;
  std::vector<DataColumn> cols;
};

// Rebuilds the frequency and variance matrices from a counts record. Cells
// may arrive in any order; every preparation must carry every measurement
// with one consistent outcome list per measurement.
inline DataMatrix data_matrix_from_record(CountsRecord rec) {
  if (rec.cells.empty())
    throw CountsFormatError("counts record has no cells");
  // A repeated preparation label opens a fresh row per occurrence, so
  // deliberately duplicated preps stay separate rows.
  std::vector<std::string> meas_ids;
  std::map<std::string, std::vector<std::string>> outcomes;
  std::vector<std::pair<std::string, int>> rows;
  std::map<std::pair<std::string, int>, int> row_of;
  std::map<std::pair<std::string, std::string>, int> seen;
  std::vector<int> cell_row(rec.cells.size());
  for (size_t c = 0; c < rec.cells.size(); ++c) {
    const auto& cell = rec.cells[c];
    if (cell.values.size() != cell.outcome_labels.size())
      throw CountsFormatError("cell " + cell.prep + "/" + cell.meas +
                              ": values do not match outcome labels");
    auto it = outcomes.find(cell.meas);
    if (it == outcomes.end()) {
      meas_ids.push_back(cell.meas);
      outcomes[cell.meas] = cell.outcome_labels;
    } else if (it->second != cell.outcome_labels) {
      throw CountsFormatError("measurement '" + cell.meas +
                              "' has inconsistent outcome lists");
    }
    int occ = seen[std::make_pair(cell.prep, cell.meas)]++;
    auto key = std::make_pair(cell.prep, occ);
    auto r = row_of.find(key);
    if (r == row_of.end()) {
      r = row_of.emplace(key, static_cast<int>(rows.size())).first;
      rows.push_back(key);
    }
    cell_row[c] = r->second;
  }

  DataMatrix dm;
  for (const auto& [prep, occ] : rows) dm.row_ids.push_back(prep);
  dm.cols.push_back({-1, -1, "unit"});
  std::map<std::string, int> col_base;
  {
    int base = 1;
    for (size_t m = 0; m < meas_ids.size(); ++m) {
      col_base[meas_ids[m]] = base;
      for (size_t o = 0; o < outcomes[meas_ids[m]].size(); ++o)
        dm.cols.push_back({static_cast<int>(m), static_cast<int>(o),
                           meas_ids[m] + ":" + outcomes[meas_ids[m]][o]});
      base += static_cast<int>(outcomes[meas_ids[m]].size());
    }
  }

  const int nrow = static_cast<int>(rows.size());
  const int ncol = static_cast<int>(dm.cols.size());
  dm.F = Mat::Zero(nrow, ncol);
  dm.V = Mat::Constant(nrow, ncol, 1e-6);
  dm.F.col(0).setOnes();
  std::vector<std::vector<bool>> filled(
      nrow, std::vector<bool>(meas_ids.size(), false));
  for (size_t c = 0; c < rec.cells.size(); ++c) {
    const CountsCell& cell = rec.cells[c];
    int pi = cell_row[c];
    int mi = static_cast<int>(std::find(meas_ids.begin(), meas_ids.end(),
                                        cell.meas) -
                              meas_ids.begin());
    filled[pi][mi] = true;
    int base = col_base[cell.meas];
    for (size_t o = 0; o < cell.values.size(); ++o) {
      int j = base + static_cast<int>(o);
      double f = cell.trials == 0
                     ? cell.values[o]
                     : cell.values[o] / static_cast<double>(cell.trials);
      dm.F(pi, j) = f;
      if (cell.trials > 0) {
        double nn = static_cast<double>(cell.trials);
        dm.V(pi, j) = std::max(f * (1.0 - f) / nn, 1.0 / (4.0 * nn * nn));
      }
    }
  }
  for (int pi = 0; pi < nrow; ++pi)
    for (size_t mi = 0; mi < meas_ids.size(); ++mi)
      if (!filled[pi][mi])
        throw CountsFormatError("missing cell " + rows[pi].first + "/" +
                                meas_ids[mi]);
  // The unit column is exact by construction but keeps the variance floor.
  if (rec.trials_per_cell > 0) {
    double nn = static_cast<double>(rec.trials_per_cell);
    dm.V.col(0).setConstant(1.0 / (4.0 * nn * nn));
  }
  dm.record = std::move(rec);
  return dm;
}

// Collects prep x measurement frequencies. n = 0 requests exact
// probabilities; the variance is then a uniform 1e-6 pseudo-weight.
inline DataMatrix build_data_matrix(const Scenario& sc,
                                    const std::vector<std::string>& preps,
                                    const std::vector<Measurement>& meas,
                                    long long n, uint64_t seed,
                                    int workers = 1) {
  if (preps.empty() || meas.empty())
    throw EmptyGeneratorList("build_data_matrix: empty preps or measurements");
  CountsRecord rec;
  rec.scenario = sc.name;
  rec.seed = seed;
  rec.trials_per_cell = n;

  const size_t ncells = preps.size() * meas.size();
  std::vector<CountsCell> cells(ncells);
  auto run_cell = [&](size_t idx) {
    size_t pi = idx / meas.size(), mi = idx % meas.size();
    Schedule sched = plain_schedule(preps[pi], meas[mi]);
    CountsCell cell;
    cell.prep = preps[pi];
    cell.meas = meas[mi].id;
    cell.outcome_labels = meas[mi].effects;
    cell.trials = n;
    if (n == 0) {
      Distribution dist = exact_distribution(sc, sched);
      cell.values.assign(dist.p.begin(), dist.p.end());
    } else {
      auto counts = sample_counts(sc, sched, n, seed);
      cell.values.assign(counts.begin(), counts.end());
    }
    cells[idx] = std::move(cell);
  };
  if (workers <= 1 || ncells <= 1) {
    for (size_t i = 0; i < ncells; ++i) run_cell(i);
  } else {
    std::vector<std::future<void>> fut;
    std::atomic<size_t> next{0};
    int nw = std::min<int>(workers, static_cast<int>(ncells));
    for (int w = 0; w < nw; ++w)
      fut.push_back(std::async(std::launch::async, [&]() {
        for (size_t i = next.fetch_add(1); i < ncells; i = next.fetch_add(1))
          run_cell(i);
      }));
    for (auto& f : fut) f.get();
  }
  rec.cells = std::move(cells);
  return data_matrix_from_record(std::move(rec));
}

}  // namespace gptkit
