#pragma once

// File formats and run plumbing for the command-line driver: a strict JSON
// run configuration with a versioned schema, the counts CSV with its JSON
// metadata sidecar, the realized-GPT CSV, and the JSON run report. Writers
// are deterministic: fixed key order, fixed row order, round-trip number
// formatting, so identical inputs reproduce files byte for byte.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gptkit/embedding.hpp"
#include "gptkit/errors.hpp"
#include "gptkit/scenarios.hpp"
#include "gptkit/simulator.hpp"
#include "gptkit/tomography.hpp"
#include "gptkit/witnesses.hpp"

namespace gptkit {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kConfigSchema = 1;

inline constexpr const char* kCountsFile = "counts.csv";
inline constexpr const char* kCountsMetaSuffix = ".meta.json";
inline constexpr const char* kReportFile = "report.json";
inline constexpr const char* kRealizedFile = "realized.csv";
inline constexpr const char* kWitnessReportFile = "witness_report.json";
inline constexpr const char* kDemoReportFile = "demo_report.json";
inline constexpr const char* kSummaryFile = "summary.csv";

// Which built-in scenario to instantiate; the knob fields only apply to the
// scenarios that take them and are ignored elsewhere.
struct ScenarioSpec {
  std::string name;
  double noise = 0.25;      // counterexample
  double theta = M_PI / 3;  // lg_qubit
  int count = 20;           // sharp_qubit
  uint64_t gen_seed = 11;   // sharp_qubit direction seed
};

inline Scenario builtin_scenario(const ScenarioSpec& s) {
  if (s.name == "classical_bit") return classical_bit_scenario();
  if (s.name == "counterexample") return counterexample_scenario(s.noise);
  if (s.name == "interferometer") return interferometer_scenario();
  if (s.name == "lg_qubit") return lg_qubit_scenario(s.theta);
  if (s.name == "nsit_qubit") return nsit_qubit_scenario();
  if (s.name == "qubit_octahedron") return qubit_octahedron_scenario();
  if (s.name == "rebit_xz") return rebit_xz_scenario();
  if (s.name == "sharp_qubit")
    return sharp_qubit_scenario(s.count, s.gen_seed);
  throw UnknownLabel("unknown scenario '" + s.name + "'");
}

// One witness selection. Which fields matter depends on kind:
//   nondisturbance: controls, test, effect, and either transform or
//                   instrument + null_outcome (+ conditioned)
//   convexity_check: controls, transform, effect, samples
//   lg:   prep/evolve/instrument label overrides
//   nsit: instrument, optionally null_outcome (+ conditioned)
struct WitnessSpec {
  std::string kind;
  std::vector<std::string> controls;
  std::string test;
  std::string transform;
  std::string instrument;
  std::string null_outcome;
  std::string effect;
  bool conditioned = true;
  int samples = 1000;
  std::string prep;
  std::string evolve;
};

struct RunConfig {
  ScenarioSpec scenario;
  long long trials_per_cell = 0;  // 0 = exact-mode frequencies
  bool seed_set = false;
  uint64_t seed = 0;
  std::string out;
  FitOptions tomography;
  double embed_tol = kEmbedTol;
  int embed_budget = 12;
  std::vector<WitnessSpec> witnesses;
  std::string raw;  // original config text, hashed into reports
};

namespace ioformat {

using nlohmann::json;

// Unknown keys are config errors so a typo never silently changes a run.
inline void expect_keys(const json& j,
                        std::initializer_list<const char*> allowed,
                        const std::string& where) {
  if (!j.is_object())
    throw ConfigError("config: " + where + " must be an object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* a : allowed)
      if (item.key() == a) {
        known = true;
        break;
      }
    if (!known)
      throw ConfigError("config: unknown key '" + item.key() + "' in " +
                        where);
  }
}

inline std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

inline double parse_number(const std::string& s, const std::string& where) {
  const char* b = s.c_str();
  char* end = nullptr;
  double v = std::strtod(b, &end);
  if (end == b || *end != '\0' || !std::isfinite(v))
    throw CountsFormatError(where + ": bad number '" + s + "'");
  return v;
}

}  // namespace ioformat

inline RunConfig parse_run_config(const std::string& text) {
  using ioformat::expect_keys;
  using nlohmann::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  RunConfig cfg;
  cfg.raw = text;
  try {
    expect_keys(j,
                {"schema", "scenario", "trials_per_cell", "seed", "out",
                 "tomography", "embedding", "witnesses"},
                "document root");
    if (!j.contains("schema") || !j["schema"].is_number_integer() ||
        j["schema"].get<int>() != kConfigSchema)
      throw ConfigError("config: schema must be the integer " +
                        std::to_string(kConfigSchema));
    if (!j.contains("scenario"))
      throw ConfigError("config: missing scenario");
    const json& s = j["scenario"];
    expect_keys(s, {"name", "noise", "theta", "count", "gen_seed"},
                "scenario");
    if (!s.contains("name"))
      throw ConfigError("config: scenario needs a name");
    cfg.scenario.name = s["name"].get<std::string>();
    if (s.contains("noise")) cfg.scenario.noise = s["noise"].get<double>();
    if (s.contains("theta")) cfg.scenario.theta = s["theta"].get<double>();
    if (s.contains("count")) cfg.scenario.count = s["count"].get<int>();
    if (s.contains("gen_seed"))
      cfg.scenario.gen_seed = s["gen_seed"].get<uint64_t>();
    if (j.contains("trials_per_cell"))
      cfg.trials_per_cell = j["trials_per_cell"].get<long long>();
    if (j.contains("seed")) {
      cfg.seed_set = true;
      cfg.seed = j["seed"].get<uint64_t>();
    }
    if (j.contains("out")) cfg.out = j["out"].get<std::string>();
    if (j.contains("tomography")) {
      const json& t = j["tomography"];
      expect_keys(t, {"k", "k_max", "threshold", "max_iterations", "rel_tol"},
                  "tomography");
      if (t.contains("k")) cfg.tomography.k = t["k"].get<int>();
      if (t.contains("k_max")) cfg.tomography.k_max = t["k_max"].get<int>();
      if (t.contains("threshold"))
        cfg.tomography.threshold = t["threshold"].get<double>();
      if (t.contains("max_iterations"))
        cfg.tomography.max_iterations = t["max_iterations"].get<int>();
      if (t.contains("rel_tol"))
        cfg.tomography.rel_tol = t["rel_tol"].get<double>();
    }
    if (j.contains("embedding")) {
      const json& e = j["embedding"];
      expect_keys(e, {"tol", "budget"}, "embedding");
      if (e.contains("tol")) cfg.embed_tol = e["tol"].get<double>();
      if (e.contains("budget")) cfg.embed_budget = e["budget"].get<int>();
    }
    if (j.contains("witnesses")) {
      if (!j["witnesses"].is_array())
        throw ConfigError("config: witnesses must be a list");
      for (const json& w : j["witnesses"]) {
        expect_keys(w,
                    {"kind", "controls", "test", "transform", "instrument",
                     "null_outcome", "effect", "conditioned", "samples",
                     "prep", "evolve"},
                    "witness entry");
        WitnessSpec spec;
        if (!w.contains("kind"))
          throw ConfigError("config: witness entry needs a kind");
        spec.kind = w["kind"].get<std::string>();
        if (spec.kind != "nondisturbance" && spec.kind != "convexity_check" &&
            spec.kind != "lg" && spec.kind != "nsit")
          throw ConfigError("config: unknown witness kind '" + spec.kind +
                            "'");
        if (w.contains("controls"))
          spec.controls = w["controls"].get<std::vector<std::string>>();
        if (w.contains("test")) spec.test = w["test"].get<std::string>();
        if (w.contains("transform"))
          spec.transform = w["transform"].get<std::string>();
        if (w.contains("instrument"))
          spec.instrument = w["instrument"].get<std::string>();
        if (w.contains("null_outcome"))
          spec.null_outcome = w["null_outcome"].get<std::string>();
        if (w.contains("effect")) spec.effect = w["effect"].get<std::string>();
        if (w.contains("conditioned"))
          spec.conditioned = w["conditioned"].get<bool>();
        if (w.contains("samples")) spec.samples = w["samples"].get<int>();
        if (w.contains("prep")) spec.prep = w["prep"].get<std::string>();
        if (w.contains("evolve")) spec.evolve = w["evolve"].get<std::string>();
        cfg.witnesses.push_back(std::move(spec));
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (cfg.trials_per_cell < 0)
    throw ConfigError("config: trials_per_cell must be >= 0");
  if (cfg.trials_per_cell > 0 && !cfg.seed_set)
    throw ConfigError("config: seed is required when trials_per_cell > 0");
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

inline std::string config_hash_hex(const std::string& raw) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(raw)));
  return buf;
}

// ---- counts CSV + metadata sidecar ----------------------------------------

inline void write_counts_csv(std::ostream& os, const CountsRecord& rec) {
  os << "prep_id,meas_id,outcome_id,count\n";
  for (const auto& cell : rec.cells)
    for (size_t o = 0; o < cell.outcome_labels.size(); ++o)
      os << cell.prep << ',' << cell.meas << ',' << cell.outcome_labels[o]
         << ',' << ioformat::format_g17(cell.values[o]) << '\n';
}

inline nlohmann::json counts_meta_json(const CountsRecord& rec) {
  nlohmann::json m;
  m["schema"] = kConfigSchema;
  m["scenario"] = rec.scenario;
  m["seed"] = rec.seed;
  m["trials_per_cell"] = rec.trials_per_cell;  // 0 marks exact frequencies
  return m;
}

// Rows group into cells by consecutive (prep, meas); per-cell trial counts
// come from the sidecar. The writer emits cells contiguously, so a faithful
// round trip preserves the record.
inline CountsRecord read_counts_csv(std::istream& is,
                                    const nlohmann::json& meta) {
  using nlohmann::json;
  if (!meta.is_object())
    throw CountsFormatError("counts metadata must be an object");
  for (const auto& item : meta.items())
    if (item.key() != "schema" && item.key() != "scenario" &&
        item.key() != "seed" && item.key() != "trials_per_cell")
      throw CountsFormatError("counts metadata: unknown key '" + item.key() +
                              "'");
  CountsRecord rec;
  try {
    if (!meta.contains("schema") ||
        meta["schema"].get<int>() != kConfigSchema)
      throw CountsFormatError("counts metadata: schema must be " +
                              std::to_string(kConfigSchema));
    rec.scenario = meta.value("scenario", std::string());
    rec.seed = meta.value("seed", uint64_t{0});
    rec.trials_per_cell = meta.value("trials_per_cell", 0LL);
  } catch (const json::exception& e) {
    throw CountsFormatError(std::string("counts metadata: ") + e.what());
  }
  if (rec.trials_per_cell < 0)
    throw CountsFormatError("counts metadata: negative trials_per_cell");

  std::string line;
  if (!std::getline(is, line))
    throw CountsFormatError("counts CSV: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "prep_id,meas_id,outcome_id,count")
    throw CountsFormatError("counts CSV: bad header '" + line + "'");
  size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto fields = ioformat::split_csv_line(line);
    const std::string where = "counts CSV line " + std::to_string(lineno);
    if (fields.size() != 4)
      throw CountsFormatError(where + ": expected 4 fields, got " +
                              std::to_string(fields.size()));
    if (fields[0].empty() || fields[1].empty() || fields[2].empty())
      throw CountsFormatError(where + ": empty identifier");
    double v = ioformat::parse_number(fields[3], where);
    if (rec.cells.empty() || rec.cells.back().prep != fields[0] ||
        rec.cells.back().meas != fields[1]) {
      CountsCell cell;
      cell.prep = fields[0];
      cell.meas = fields[1];
      cell.trials = rec.trials_per_cell;
      rec.cells.push_back(std::move(cell));
    }
    CountsCell& cell = rec.cells.back();
    if (std::find(cell.outcome_labels.begin(), cell.outcome_labels.end(),
                  fields[2]) != cell.outcome_labels.end())
      throw CountsFormatError(where + ": duplicate outcome '" + fields[2] +
                              "' in cell " + cell.prep + "/" + cell.meas);
    cell.outcome_labels.push_back(fields[2]);
    cell.values.push_back(v);
  }
  if (rec.cells.empty())
    throw CountsFormatError("counts CSV: no data rows");
  return rec;
}

inline void save_counts(const std::filesystem::path& csv_path,
                        const CountsRecord& rec) {
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv)
    throw CountsFormatError("cannot write '" + csv_path.string() + "'");
  write_counts_csv(csv, rec);
  std::ofstream meta(csv_path.string() + kCountsMetaSuffix, std::ios::binary);
  if (!meta)
    throw CountsFormatError("cannot write counts metadata for '" +
                            csv_path.string() + "'");
  meta << counts_meta_json(rec).dump(2) << '\n';
}

inline CountsRecord load_counts(const std::filesystem::path& csv_path) {
  std::ifstream csv(csv_path, std::ios::binary);
  if (!csv)
    throw CountsFormatError("cannot open '" + csv_path.string() + "'");
  std::ifstream meta(csv_path.string() + kCountsMetaSuffix, std::ios::binary);
  if (!meta)
    throw CountsFormatError("missing counts metadata '" + csv_path.string() +
                            kCountsMetaSuffix + "'");
  nlohmann::json m;
  try {
    meta >> m;
  } catch (const nlohmann::json::exception& e) {
    throw CountsFormatError(std::string("counts metadata: ") + e.what());
  }
  return read_counts_csv(csv, m);
}

// ---- realized-GPT CSV ------------------------------------------------------

inline void write_realized_csv(std::ostream& os, const RealizedGpt& g) {
  os << "kind,id";
  for (int c = 0; c < g.k; ++c) os << ",c" << c;
  os << '\n';
  for (size_t i = 0; i < g.states.size(); ++i) {
    os << "state," << g.state_ids[i];
    for (int c = 0; c < g.k; ++c)
      os << ',' << ioformat::format_g17(g.states[i](c));
    os << '\n';
  }
  for (size_t i = 0; i < g.effects.size(); ++i) {
    os << "effect," << g.effect_ids[i];
    for (int c = 0; c < g.k; ++c)
      os << ',' << ioformat::format_g17(g.effects[i](c));
    os << '\n';
  }
}

// ---- report JSON fragments -------------------------------------------------

inline nlohmann::json embedding_json(const EmbeddingResult& r) {
  nlohmann::json e;
  e["verdict"] = to_string(r.verdict);
  e["method"] = r.method;
  e["dimension_used"] = r.dimension_used;
  e["max_probability_error"] = r.max_probability_error;
  return e;
}

inline nlohmann::json classification_json(const Classification& c) {
  nlohmann::json j;
  j["label"] = to_string(c.label);
  j["noncontextual"] = embedding_json(c.noncontextual);
  j["same_dimension"] = embedding_json(c.same_dimension);
  return j;
}

inline nlohmann::json realized_summary_json(const RealizedGpt& g) {
  nlohmann::json j;
  j["k"] = g.k;
  j["n_states"] = g.states.size();
  j["n_effects"] = g.effects.size();
  j["chi2_per_dof"] = g.fit.chi2_per_dof;
  j["residual_max"] = g.fit.residual_max;
  j["iterations"] = g.fit.iterations;
  j["converged"] = g.fit.converged;
  j["rank_threshold_met"] = g.fit.rank_threshold_met;
  j["delta_fit"] = g.delta_fit;
  return j;
}

inline nlohmann::json witness_json(const NondisturbanceReport& r) {
  nlohmann::json j;
  j["kind"] = "nondisturbance";
  j["control_disturbances"] = r.control_disturbances;
  j["max_control"] = r.max_control;
  j["test_disturbance"] = r.test_disturbance;
  j["witness_value"] = r.witness_value;
  j["threshold"] = r.threshold;
  j["fires"] = r.fires;
  j["trials"] = r.trials;
  j["conditioned"] = r.conditioned;
  return j;
}

inline nlohmann::json witness_json(const LgReport& r) {
  nlohmann::json j;
  j["kind"] = "lg";
  j["c12"] = r.c12;
  j["c23"] = r.c23;
  j["c13"] = r.c13;
  j["k3"] = r.k3;
  j["threshold"] = r.threshold;
  j["violated"] = r.violated;
  j["trials"] = r.trials;
  return j;
}

inline nlohmann::json witness_json(const NsitReport& r) {
  nlohmann::json j;
  j["kind"] = "nsit";
  j["delta"] = r.delta;
  j["threshold"] = r.threshold;
  j["violated"] = r.violated;
  j["conditioned"] = r.conditioned;
  j["prep"] = r.prep;
  return j;
}

// Flattens the report tree to "dotted.path,value" rows for external plotting
// tools. Scalar values keep their JSON encoding, so strings stay quoted and
// numbers round-trip.
inline void flatten_json(const nlohmann::json& j, const std::string& prefix,
                         std::vector<std::pair<std::string, std::string>>* out) {
  if (j.is_object()) {
    for (const auto& item : j.items())
      flatten_json(item.value(),
                   prefix.empty() ? item.key() : prefix + "." + item.key(),
                   out);
  } else if (j.is_array()) {
    for (size_t i = 0; i < j.size(); ++i)
      flatten_json(j[i], prefix + "[" + std::to_string(i) + "]", out);
  } else {
    out->emplace_back(prefix, j.dump());
  }
}

inline std::string csv_summary(const nlohmann::json& report) {
  std::vector<std::pair<std::string, std::string>> rows;
  flatten_json(report, "", &rows);
  std::string s = "key,value\n";
  for (const auto& [k, v] : rows) s += k + "," + v + "\n";
  return s;
}

// ---- run orchestration -----------------------------------------------------

inline nlohmann::json report_header(const RunConfig& cfg) {
  nlohmann::json rep;
  rep["schema"] = kConfigSchema;
  rep["tool_version"] = kToolVersion;
  rep["config_hash"] = config_hash_hex(cfg.raw);
  return rep;
}

inline CountsRecord simulate_counts(const RunConfig& cfg, const Scenario& sc,
                                    int workers = 1) {
  DataMatrix dm = build_data_matrix(sc, sc.default_preps,
                                    sc.default_measurements,
                                    cfg.trials_per_cell, cfg.seed, workers);
  return dm.record;
}

// Tomography, both embedding tests, and the three-way classification on one
// counts record. The classification block is omitted when the fit did not
// converge; the caller decides how loudly to fail.
inline nlohmann::json analyze_record(const CountsRecord& rec,
                                     const RunConfig& cfg,
                                     RealizedGpt* out_g = nullptr) {
  DataMatrix dm = data_matrix_from_record(rec);
  RealizedGpt g = fit_realized_gpt(dm, cfg.tomography);
  nlohmann::json rep = report_header(cfg);
  rep["scenario"] = {{"name", rec.scenario},
                     {"seed", rec.seed},
                     {"trials_per_cell", rec.trials_per_cell}};
  rep["counts"] = {{"cells", rec.cells.size()},
                   {"preparations", dm.row_ids.size()},
                   {"columns", dm.cols.size()}};
  rep["realized"] = realized_summary_json(g);
  if (g.fit.converged) {
    Classification c = classify(g, cfg.embed_tol, cfg.embed_budget);
    rep["classification"] = classification_json(c);
  }
  if (out_g) *out_g = std::move(g);
  return rep;
}

inline nlohmann::json run_one_witness(const Scenario& sc,
                                      const WitnessSpec& w,
                                      const RunConfig& cfg) {
  if (w.kind == "nondisturbance") {
    NondisturbanceReport r =
        w.instrument.empty()
            ? nondisturbance_witness(sc, w.controls, w.test, w.transform,
                                     w.effect, cfg.trials_per_cell, cfg.seed)
            : nondisturbance_witness(
                  sc, w.controls, w.test,
                  NullResultSpec{w.instrument, w.null_outcome}, w.conditioned,
                  w.effect, cfg.trials_per_cell, cfg.seed);
    return witness_json(r);
  }
  if (w.kind == "convexity_check") {
    bool ok = convexity_bound_check(sc, w.controls, w.transform, w.effect,
                                    w.samples, cfg.seed);
    nlohmann::json j;
    j["kind"] = "convexity_check";
    j["samples"] = w.samples;
    j["bound_holds"] = ok;
    return j;
  }
  if (w.kind == "lg") {
    LgLabels lbl;
    if (!w.prep.empty()) lbl.prep = w.prep;
    if (!w.evolve.empty()) lbl.evolve = w.evolve;
    if (!w.instrument.empty()) lbl.instrument = w.instrument;
    return witness_json(
        lg_correlators(sc, lbl, cfg.trials_per_cell, cfg.seed));
  }
  if (w.kind == "nsit") {
    std::string ins = w.instrument.empty() ? "measure" : w.instrument;
    NsitReport r = w.null_outcome.empty()
                       ? nsit_delta(sc, ins)
                       : nsit_delta(sc, NullResultSpec{ins, w.null_outcome});
    return witness_json(r);
  }
  throw ConfigError("config: unknown witness kind '" + w.kind + "'");
}

inline nlohmann::json run_witnesses(const Scenario& sc, const RunConfig& cfg) {
  nlohmann::json rep = report_header(cfg);
  rep["scenario"] = {{"name", sc.name}};
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& w : cfg.witnesses) arr.push_back(run_one_witness(sc, w, cfg));
  rep["witnesses"] = arr;
  return rep;
}

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write '" + path.string() + "'");
  os << content;
}

inline void write_json_file(const std::filesystem::path& path,
                            const nlohmann::json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace gptkit
