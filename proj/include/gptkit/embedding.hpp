#pragma once

// Simplex embedding tests for realized fragments.
//
// test_noncontextuality asks for an embedding into a simplex of any
// dimension: a cone decomposition sum_i g_i h_i^T = I with g_i in the dual
// effect cone and h_i in the dual state cone. Closing effects under
// complements (build_cones) makes kappa(e) <= 1 automatic, so the search
// reduces to one small LP over products of dual extreme rays: minimize the
// largest entrywise deviation of the weighted sum from the identity.
// Feasible verdicts carry a checked certificate; Infeasible means even the
// entrywise deviation cannot be brought within tol over the exact dual
// rays. Borderline LP values are settled in exact rational arithmetic.
//
// test_strict_classicality asks for an embedding into the simplex of the
// realized dimension k: k vertex points in the normalized state slice whose
// convex hull covers all realized states while every realized effect stays
// within [0,1] (tol-inflated) on the vertices. Routes, in order: minimal
// hull generators when they already fit a simplex; k=2 exact rational
// segment LP (complete); k=3 tangent wrap decision around the state hull
// inside the effect polygon (complete for bounded polygons, with the hull
// shrunk enough to dominate the certificate slack so Infeasible is sound);
// k>=3 alternating vertex refinement; the noncontextuality test as an
// a-fortiori infeasibility route. Every Feasible verdict is gated on an
// explicit certificate check.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "gptkit/cones.hpp"
#include "gptkit/errors.hpp"
#include "gptkit/hull.hpp"
#include "gptkit/linprog.hpp"
#include "gptkit/numeric.hpp"
#include "gptkit/tomography.hpp"

namespace gptkit {

enum class Verdict { Feasible, Infeasible, Undetermined };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Feasible: return "feasible";
    case Verdict::Infeasible: return "infeasible";
    default: return "undetermined";
  }
}

// Row i of state_map sends a realized state s to its weight on simplex
// vertex i; row i of effect_map sends a realized effect e to its value on
// vertex i. Probabilities factor as (effect_map e) . (state_map s).
struct EmbeddingCertificate {
  Mat state_map;                 // m x k
  Mat effect_map;                // m x k
  std::vector<double> weights;   // LP weights behind the maps, if any
};

struct EmbeddingResult {
  Verdict verdict = Verdict::Undetermined;
  std::optional<EmbeddingCertificate> certificate;
  double max_probability_error = 0.0;  // over realized pairs, certificate only
  int dimension_used = 0;              // simplex vertex count of certificate
  std::string method;
};

namespace detail {

using Rational = boost::multiprecision::cpp_rational;

inline bool probabilities_in_range(const RealizedGpt& g, double tol) {
  for (const auto& e : g.effects)
    for (const auto& s : g.states) {
      double p = e.dot(s);
      if (p < -tol || p > 1.0 + tol) return false;
    }
  return true;
}

struct CertCheck {
  double max_err = 0.0;
  bool pass = false;
};

inline CertCheck check_certificate(const RealizedGpt& g, const Mat& state_map,
                                   const Mat& effect_map, double tol) {
  CertCheck c;
  const double slack = tol + 1e-12;
  bool ranges = true;
  std::vector<Vec> kappas;
  kappas.reserve(g.effects.size());
  for (const auto& e : g.effects) {
    Vec ke = effect_map * e;
    if (ke.minCoeff() < -slack || ke.maxCoeff() > 1.0 + slack) ranges = false;
    kappas.push_back(std::move(ke));
  }
  for (const auto& s : g.states) {
    Vec is = state_map * s;
    if (is.minCoeff() < -slack) ranges = false;
    if (std::abs(is.sum() - 1.0) > slack) ranges = false;
    for (size_t j = 0; j < g.effects.size(); ++j) {
      double err = std::abs(kappas[j].dot(is) - g.effects[j].dot(s));
      c.max_err = std::max(c.max_err, err);
    }
  }
  c.pass = ranges && c.max_err <= tol + 1e-12;
  return c;
}

inline EmbeddingResult verdict_only(Verdict v, std::string method) {
  EmbeddingResult r;
  r.verdict = v;
  r.method = std::move(method);
  return r;
}

// ---- noncontextuality LP --------------------------------------------------

// Keeps the weight support at or below `target` columns without changing
// the weighted sum (Caratheodory step on the flattened rank-one products).
inline void caratheodory_reduce(std::vector<int>& idx, std::vector<double>& w,
                                const std::vector<Vec>& cols, int target) {
  while (static_cast<int>(idx.size()) > target) {
    const int m = static_cast<int>(idx.size());
    Mat a(cols[idx[0]].size(), m);
    for (int j = 0; j < m; ++j) a.col(j) = cols[idx[j]];
    Eigen::FullPivLU<Mat> lu(a);
    lu.setThreshold(1e-12);
    Mat ker = lu.kernel();
    if (ker.cols() == 0 || ker.col(0).lpNorm<Eigen::Infinity>() < 1e-14) break;
    Vec d = ker.col(0);
    if (d.maxCoeff() <= 0) d = -d;
    double alpha = std::numeric_limits<double>::infinity();
    int drop = -1;
    for (int j = 0; j < m; ++j)
      if (d(j) > 1e-14 && w[j] / d(j) < alpha) {
        alpha = w[j] / d(j);
        drop = j;
      }
    if (drop < 0) break;
    std::vector<int> nidx;
    std::vector<double> nw;
    for (int j = 0; j < m; ++j) {
      if (j == drop) continue;
      double wj = w[j] - alpha * d(j);
      if (wj > 1e-14) {
        nidx.push_back(idx[j]);
        nw.push_back(wj);
      }
    }
    if (static_cast<int>(nidx.size()) >= m) break;
    idx = std::move(nidx);
    w = std::move(nw);
  }
}

struct NcWeights {
  std::vector<int> idx;  // flat index a * B + b into ray products
  std::vector<double> w;
};

inline EmbeddingResult nc_certificate(const RealizedGpt& g, const ConePair& cp,
                                      NcWeights ws, double tol,
                                      const std::string& method) {
  const int k = g.k;
  const int nb = static_cast<int>(cp.dual_state_rays.size());
  const size_t total = cp.dual_effect_rays.size() * cp.dual_state_rays.size();

  std::vector<Vec> flat(total);
  for (size_t f = 0; f < total; ++f) flat[f] = Vec();
  for (int f : ws.idx) {
    const Vec& sig = cp.dual_effect_rays[f / nb];
    const Vec& hat = cp.dual_state_rays[f % nb];
    Vec c(k * k);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) c(i * k + j) = sig(i) * hat(j);
    flat[f] = std::move(c);
  }
  caratheodory_reduce(ws.idx, ws.w, flat, k * k);

  const int m = static_cast<int>(ws.idx.size());
  if (m == 0) return verdict_only(Verdict::Undetermined, method + "-empty");
  Mat state_map(m, k), effect_map(m, k);
  for (int r = 0; r < m; ++r) {
    const Vec& sig = cp.dual_effect_rays[ws.idx[r] / nb];
    const Vec& hat = cp.dual_state_rays[ws.idx[r] % nb];
    double su = sig.dot(cp.unit);
    if (su < 1e-10)
      return verdict_only(Verdict::Undetermined, method + "-degenerate");
    effect_map.row(r) = (sig / su).transpose();
    state_map.row(r) = (ws.w[r] * su) * hat.transpose();
  }
  auto chk = check_certificate(g, state_map, effect_map, tol);
  EmbeddingResult r;
  r.max_probability_error = chk.max_err;
  r.dimension_used = m;
  r.method = method;
  r.certificate = EmbeddingCertificate{state_map, effect_map, ws.w};
  r.verdict = chk.pass ? Verdict::Feasible : Verdict::Undetermined;
  if (!chk.pass) r.method += "-borderline";
  return r;
}

// Exact rational feasibility of sum w_ab sig_a hat_b^T = I entrywise within
// tol, weights nonnegative. decided=false when the instance is too large.
inline std::optional<NcWeights> nc_exact_decide(const ConePair& cp, double tol,
                                                bool* decided) {
  const int k = cp.k;
  const int na = static_cast<int>(cp.dual_effect_rays.size());
  const int nb = static_cast<int>(cp.dual_state_rays.size());
  *decided = true;
  // Rational pivots rewrite the whole (2k^2+1) x (na*nb) tableau with growing
  // bit lengths, so the exact net only covers modest cone pairs.
  if (static_cast<long long>(na) * nb > 1200) {
    *decided = false;
    return std::nullopt;
  }
  LpModel<Rational> lp;
  for (int f = 0; f < na * nb; ++f) lp.add_var(true);
  Rational rtol(tol);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      std::vector<std::pair<int, Rational>> terms;
      for (int a = 0; a < na; ++a)
        for (int b = 0; b < nb; ++b) {
          Rational c = Rational(cp.dual_effect_rays[a](i)) *
                       Rational(cp.dual_state_rays[b](j));
          if (c != 0) terms.emplace_back(a * nb + b, c);
        }
      Rational target(i == j ? 1 : 0);
      lp.add_constraint(terms, LpModel<Rational>::LE, target + rtol);
      lp.add_constraint(terms, LpModel<Rational>::GE, target - rtol);
    }
  LpResult<Rational> res;
  try {
    res = lp.minimize();
  } catch (const Error&) {
    *decided = false;
    return std::nullopt;
  }
  if (res.status == LpStatus::Infeasible) return std::nullopt;
  if (res.status != LpStatus::Optimal) {
    *decided = false;
    return std::nullopt;
  }
  NcWeights ws;
  for (int f = 0; f < na * nb; ++f) {
    double w = res.x[f].template convert_to<double>();
    if (w > 1e-14) {
      ws.idx.push_back(f);
      ws.w.push_back(w);
    }
  }
  return ws;
}

}  // namespace detail

// Decides whether the realized fragment embeds into a simplex of any
// dimension. Throws DegenerateCone when states or effects fail to span,
// DimensionTooLarge above k = 6.
inline EmbeddingResult test_noncontextuality(const RealizedGpt& g,
                                             double tol = kEmbedTol) {
  using namespace detail;
  if (!probabilities_in_range(g, tol))
    return verdict_only(Verdict::Infeasible, "probability-range");
  const int k = g.k;
  if (k == 1) {
    Mat one = Mat::Ones(1, 1);
    auto chk = check_certificate(g, one, one, tol);
    EmbeddingResult r;
    r.verdict = chk.pass ? Verdict::Feasible : Verdict::Undetermined;
    r.certificate = EmbeddingCertificate{one, one, {1.0}};
    r.max_probability_error = chk.max_err;
    r.dimension_used = 1;
    r.method = "trivial";
    return r;
  }

  ConePair cp = build_cones(g);
  const int na = static_cast<int>(cp.dual_effect_rays.size());
  const int nb = static_cast<int>(cp.dual_state_rays.size());

  LpModel<double> lp;
  for (int f = 0; f < na * nb; ++f) lp.add_var(true);
  int tvar = lp.add_var(true);
  lp.set_cost(tvar, 1.0);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      std::vector<std::pair<int, double>> terms;
      for (int a = 0; a < na; ++a)
        for (int b = 0; b < nb; ++b) {
          double c = cp.dual_effect_rays[a](i) * cp.dual_state_rays[b](j);
          if (std::abs(c) > 1e-14) terms.emplace_back(a * nb + b, c);
        }
      double target = (i == j) ? 1.0 : 0.0;
      auto le = terms;
      le.emplace_back(tvar, -1.0);
      lp.add_constraint(le, LpModel<double>::LE, target);
      auto ge = terms;
      ge.emplace_back(tvar, 1.0);
      lp.add_constraint(ge, LpModel<double>::GE, target);
    }
  auto res = lp.minimize();
  if (res.status != LpStatus::Optimal)
    return verdict_only(Verdict::Undetermined, "lp-failed");
  const double tstar = res.objective;

  auto exact_path = [&]() -> EmbeddingResult {
    bool decided = true;
    auto ws = nc_exact_decide(cp, tol, &decided);
    if (!decided) return verdict_only(Verdict::Undetermined, "borderline");
    if (!ws) return verdict_only(Verdict::Infeasible, "lp-exact");
    return nc_certificate(g, cp, std::move(*ws), tol, "lp-exact");
  };

  if (tstar <= tol) {
    double wmax = 0;
    for (int f = 0; f < na * nb; ++f) wmax = std::max(wmax, res.x[f]);
    NcWeights ws;
    for (int f = 0; f < na * nb; ++f)
      if (res.x[f] > std::max(1e-14, 1e-12 * wmax)) {
        ws.idx.push_back(f);
        ws.w.push_back(res.x[f]);
      }
    auto out = nc_certificate(g, cp, std::move(ws), tol, "lp-double");
    if (out.verdict == Verdict::Feasible) return out;
    auto ex = exact_path();
    return ex.verdict == Verdict::Undetermined ? out : ex;
  }
  if (tstar > 11.0 * tol)
    return verdict_only(Verdict::Infeasible, "lp-double");
  return exact_path();
}

namespace detail {

// ---- strict classicality: shared pieces ------------------------------------

struct Slice {
  int k = 0;
  std::vector<Vec> x;                       // states, unit coordinate dropped
  std::vector<std::pair<double, Vec>> eff;  // (constant, gradient)
};

inline Slice make_slice(const RealizedGpt& g) {
  Slice s;
  s.k = g.k;
  const int n = g.k - 1;
  for (const auto& st : g.states) {
    Vec v = st.tail(n) / st(0);
    s.x.push_back(std::move(v));
  }
  for (const auto& e : g.effects) {
    Vec a = e.tail(n);
    if (a.lpNorm<Eigen::Infinity>() <= 1e-12) continue;  // constant on slice
    s.eff.emplace_back(e(0), std::move(a));
  }
  return s;
}

// Certificate for a vertex list given in slice coordinates. Unused rows pad
// the maps to k rows with zero state weight and a repeated in-range value.
inline EmbeddingResult simplex_certificate(const RealizedGpt& g,
                                           const std::vector<Vec>& verts,
                                           double tol,
                                           const std::string& method) {
  const int k = g.k;
  const int mv = static_cast<int>(verts.size());
  Mat t(k, mv);
  for (int a = 0; a < mv; ++a) {
    t(0, a) = 1.0;
    if (k > 1) t.col(a).tail(k - 1) = verts[a];
  }
  Eigen::CompleteOrthogonalDecomposition<Mat> cod(t);
  Mat pinv = cod.pseudoInverse();
  Mat state_map = Mat::Zero(k, k);
  state_map.topRows(mv) = pinv;
  Mat effect_map(k, k);
  for (int r = 0; r < k; ++r)
    effect_map.row(r) = t.col(std::min(r, mv - 1)).transpose();
  auto chk = check_certificate(g, state_map, effect_map, tol);
  EmbeddingResult out;
  out.max_probability_error = chk.max_err;
  out.dimension_used = k;
  out.method = method;
  out.certificate = EmbeddingCertificate{state_map, effect_map, {}};
  out.verdict = chk.pass ? Verdict::Feasible : Verdict::Undetermined;
  return out;
}

// Exact decision for k = 2: a covering segment [p, q] with every effect
// value inside the tolerance box at both ends.
inline std::optional<std::pair<double, double>> segment_lp_exact(
    const Slice& s, double tol) {
  LpModel<Rational> lp;
  int p = lp.add_var(false);
  int q = lp.add_var(false);
  lp.set_cost(q, 1);
  lp.set_cost(p, -1);
  Rational rtol(tol);
  for (const auto& x : s.x) {
    Rational xv(x(0));
    lp.add_constraint({{p, Rational(1)}}, LpModel<Rational>::LE, xv);
    lp.add_constraint({{q, Rational(1)}}, LpModel<Rational>::GE, xv);
  }
  for (const auto& [b, a] : s.eff) {
    Rational rb(b), ra(a(0));
    for (int v : {p, q}) {
      lp.add_constraint({{v, ra}}, LpModel<Rational>::GE, -rtol - rb);
      lp.add_constraint({{v, ra}}, LpModel<Rational>::LE,
                        Rational(1) + rtol - rb);
    }
  }
  auto res = lp.minimize();
  if (res.status != LpStatus::Optimal) return std::nullopt;
  return std::make_pair(res.x[p].template convert_to<double>(),
                        res.x[q].template convert_to<double>());
}

// Best barycentric fit of x by rows of v (m x n): minimizes the largest
// coordinate residual subject to weights on the simplex.
inline double bary_fit(const Mat& v, const Vec& x, Vec* lam) {
  const int m = static_cast<int>(v.rows());
  const int n = static_cast<int>(v.cols());
  LpModel<double> lp;
  std::vector<int> lv(m);
  for (int a = 0; a < m; ++a) lv[a] = lp.add_var(true);
  int tv = lp.add_var(true);
  lp.set_cost(tv, 1.0);
  std::vector<std::pair<int, double>> sum;
  for (int a = 0; a < m; ++a) sum.emplace_back(lv[a], 1.0);
  lp.add_constraint(sum, LpModel<double>::EQ, 1.0);
  for (int c = 0; c < n; ++c) {
    std::vector<std::pair<int, double>> row;
    for (int a = 0; a < m; ++a) row.emplace_back(lv[a], v(a, c));
    auto le = row;
    le.emplace_back(tv, -1.0);
    lp.add_constraint(le, LpModel<double>::LE, x(c));
    auto ge = row;
    ge.emplace_back(tv, 1.0);
    lp.add_constraint(ge, LpModel<double>::GE, x(c));
  }
  auto r = lp.minimize();
  if (r.status != LpStatus::Optimal)
    return std::numeric_limits<double>::infinity();
  if (lam) {
    lam->resize(m);
    for (int a = 0; a < m; ++a) (*lam)(a) = r.x[lv[a]];
  }
  return r.objective;
}

// Alternates between barycentric weights for fixed vertices and an LP that
// moves the vertices inside the effect box to cover the states. Returns a
// gated certificate when the residual reaches zero.
inline std::optional<EmbeddingResult> refine_vertices(const RealizedGpt& g,
                                                      const Slice& s, Mat v,
                                                      double tol, int rounds,
                                                      const char* method) {
  const int k = s.k;
  const int n = k - 1;
  const int m = static_cast<int>(v.rows());
  const int ns = static_cast<int>(s.x.size());

  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < rounds; ++it) {
    Mat lam(ns, m);
    bool ok = true;
    for (int i = 0; i < ns; ++i) {
      Vec l;
      if (!std::isfinite(bary_fit(v, s.x[i], &l))) {
        ok = false;
        break;
      }
      lam.row(i) = l.transpose();
    }
    if (!ok) return std::nullopt;

    LpModel<double> lp;
    std::vector<std::vector<int>> vidx(m, std::vector<int>(n));
    for (int a = 0; a < m; ++a)
      for (int c = 0; c < n; ++c) vidx[a][c] = lp.add_var(false);
    int tv = lp.add_var(true);
    lp.set_cost(tv, 1.0);
    for (int i = 0; i < ns; ++i)
      for (int c = 0; c < n; ++c) {
        std::vector<std::pair<int, double>> row;
        for (int a = 0; a < m; ++a)
          if (std::abs(lam(i, a)) > 1e-14)
            row.emplace_back(vidx[a][c], lam(i, a));
        auto le = row;
        le.emplace_back(tv, -1.0);
        lp.add_constraint(le, LpModel<double>::LE, s.x[i](c));
        auto ge = row;
        ge.emplace_back(tv, 1.0);
        lp.add_constraint(ge, LpModel<double>::GE, s.x[i](c));
      }
    for (const auto& [b, aeff] : s.eff)
      for (int a = 0; a < m; ++a) {
        std::vector<std::pair<int, double>> row;
        for (int c = 0; c < n; ++c)
          if (std::abs(aeff(c)) > 1e-14) row.emplace_back(vidx[a][c], aeff(c));
        if (row.empty()) continue;
        lp.add_constraint(row, LpModel<double>::GE, -tol - b);
        lp.add_constraint(row, LpModel<double>::LE, 1.0 + tol - b);
      }
    auto r = lp.minimize();
    if (r.status != LpStatus::Optimal) return std::nullopt;
    for (int a = 0; a < m; ++a)
      for (int c = 0; c < n; ++c) v(a, c) = r.x[vidx[a][c]];
    double t = r.objective;
    bool last = (it + 1 == rounds) || (it > 1 && t >= 0.999 * prev);
    if (t <= 1e-10 || last) {
      std::vector<Vec> verts;
      for (int a = 0; a < m; ++a) verts.push_back(v.row(a).transpose());
      auto cand = simplex_certificate(g, verts, tol, method);
      if (cand.verdict == Verdict::Feasible) return cand;
      return std::nullopt;
    }
    prev = t;
  }
  return std::nullopt;
}

inline std::optional<EmbeddingResult> alternating_search(const RealizedGpt& g,
                                                         const Slice& s,
                                                         double tol,
                                                         int restarts,
                                                         uint64_t key) {
  const int k = s.k;
  const int n = k - 1;
  const int m = k;

  Vec lo = s.x[0], hi = s.x[0];
  for (const auto& x : s.x) {
    lo = lo.cwiseMin(x);
    hi = hi.cwiseMax(x);
  }
  Vec mid = 0.5 * (lo + hi);
  Vec rad = 0.5 * (hi - lo) + Vec::Ones(n) * 1e-3;

  for (int rs = 0; rs < restarts; ++rs) {
    uint64_t rkey = hash_combine64(key, static_cast<uint64_t>(rs));
    uint64_t ctr = 0;
    Mat v(m, n);
    double inflate = 1.0 + 0.5 * rs;
    for (int a = 0; a < m; ++a)
      for (int c = 0; c < n; ++c)
        v(a, c) =
            mid(c) + inflate * rad(c) * (2.0 * keyed_uniform(rkey, ctr++) - 1.0);
    if (auto r = refine_vertices(g, s, v, tol, 25, "alternating")) return r;
  }
  return std::nullopt;
}

// ---- strict classicality, k = 3: tangent wrap decision ---------------------

namespace geo {

using P2 = Eigen::Vector2d;

inline double cross2(const P2& a, const P2& b) {
  return a.x() * b.y() - a.y() * b.x();
}

// Keep n.x <= c (Sutherland-Hodgman step); polygon CCW.
inline std::vector<P2> clip(const std::vector<P2>& poly, const P2& n,
                            double c) {
  std::vector<P2> out;
  const int m = static_cast<int>(poly.size());
  for (int i = 0; i < m; ++i) {
    const P2& a = poly[i];
    const P2& b = poly[(i + 1) % m];
    double da = n.dot(a) - c, db = n.dot(b) - c;
    if (da <= 0) out.push_back(a);
    if ((da < 0 && db > 0) || (da > 0 && db < 0)) {
      double t = da / (da - db);
      out.push_back(a + t * (b - a));
    }
  }
  return out;
}

inline std::vector<P2> hull2d(std::vector<P2> pts) {
  std::sort(pts.begin(), pts.end(), [](const P2& a, const P2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const P2& a, const P2& b) {
                          return (a - b).lpNorm<Eigen::Infinity>() < 1e-14;
                        }),
            pts.end());
  const int n = static_cast<int>(pts.size());
  if (n < 3) return pts;
  std::vector<P2> h(2 * n);
  int k = 0;
  for (int i = 0; i < n; ++i) {
    while (k >= 2 && cross2(h[k - 1] - h[k - 2], pts[i] - h[k - 2]) <= 0) --k;
    h[k++] = pts[i];
  }
  for (int i = n - 2, t = k + 1; i >= 0; --i) {
    while (k >= t && cross2(h[k - 1] - h[k - 2], pts[i] - h[k - 2]) <= 0) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  return h;  // CCW
}

struct Boundary {
  std::vector<P2> v;        // CCW vertices
  std::vector<double> cum;  // cum[i] = arc length at vertex i; cum[m] = total
  double total = 0;

  void build() {
    const int m = static_cast<int>(v.size());
    cum.assign(m + 1, 0.0);
    for (int i = 0; i < m; ++i)
      cum[i + 1] = cum[i] + (v[(i + 1) % m] - v[i]).norm();
    total = cum[m];
  }
  P2 at(double a) const {
    const int m = static_cast<int>(v.size());
    a = std::fmod(a, total);
    if (a < 0) a += total;
    int lo = static_cast<int>(std::upper_bound(cum.begin(), cum.end(), a) -
                              cum.begin()) -
             1;
    lo = std::min(std::max(lo, 0), m - 1);
    double len = cum[lo + 1] - cum[lo];
    double t = len > 0 ? (a - cum[lo]) / len : 0.0;
    return v[lo] + t * (v[(lo + 1) % m] - v[lo]);
  }
};

}  // namespace geo

struct WrapMachine {
  geo::Boundary p;         // effect polygon boundary
  std::vector<geo::P2> q;  // shrunk state hull, CCW
  double scale = 1.0;
  bool ok = true;

  // One tangent-advance step: from boundary arc a, take the supporting ray
  // keeping q on the left that advances furthest, return its exit arc lift.
  double step(double a) {
    geo::P2 x = p.at(a);
    geo::P2 best = q[0];
    for (const auto& w : q)
      if (geo::cross2(best - x, w - x) < 0) best = w;
    for (const auto& w : q)
      if (geo::cross2(best - x, w - x) < -1e-9 * scale * scale) {
        ok = false;
        return a;
      }
    geo::P2 d = best - x;
    const int m = static_cast<int>(p.v.size());
    double tbest = std::numeric_limits<double>::infinity();
    double arc = a;
    for (int i = 0; i < m; ++i) {
      geo::P2 e0 = p.v[i], e1 = p.v[(i + 1) % m];
      geo::P2 ed = e1 - e0;
      double det = geo::cross2(d, -ed);
      if (std::abs(det) < 1e-18 * scale * scale) continue;
      geo::P2 rhs = e0 - x;
      double t = geo::cross2(rhs, -ed) / det;
      double sp = geo::cross2(d, rhs) / det;
      if (t > 1.0 + 1e-12 && sp >= -1e-9 && sp <= 1.0 + 1e-9 && t < tbest) {
        tbest = t;
        double seg = p.cum[i + 1] - p.cum[i];
        arc = p.cum[i] + std::min(std::max(sp, 0.0), 1.0) * seg;
      }
    }
    if (!std::isfinite(tbest)) {
      ok = false;
      return a;
    }
    double adv = std::fmod(arc - a, p.total);
    if (adv <= 1e-13 * p.total) adv += p.total;
    if (adv > p.total) adv -= p.total;
    return a + adv;
  }

  double wrap3(double a, std::array<geo::P2, 4>* pts) {
    double a0 = a;
    for (int i = 0; i < 3; ++i) {
      if (pts) (*pts)[i] = p.at(a);
      a = step(a);
      if (!ok) return 0.0;
    }
    if (pts) (*pts)[3] = p.at(a);
    return a - a0;
  }
};

// Outcome: 1 feasible (res set), -1 certified infeasible, 0 undecided.
inline int wrap_decide(const RealizedGpt& g, const Slice& s, double tol,
                       EmbeddingResult* res) {
  using geo::P2;
  double maxc = 1.0;
  for (const auto& x : s.x) maxc = std::max(maxc, x.lpNorm<Eigen::Infinity>());
  const double bigR = 1e3 * (1.0 + maxc);

  std::vector<P2> poly = {
      {-bigR, -bigR}, {bigR, -bigR}, {bigR, bigR}, {-bigR, bigR}};
  for (const auto& [b, a] : s.eff) {
    P2 n(a(0), a(1));
    double nn = n.norm();
    poly = geo::clip(poly, -n / nn, (b + tol) / nn);
    if (poly.empty()) break;
    poly = geo::clip(poly, n / nn, (1.0 + tol - b) / nn);
    if (poly.empty()) break;
  }
  if (poly.size() < 3) return 0;
  for (const auto& v : poly)
    if (v.lpNorm<Eigen::Infinity>() >= 0.999 * bigR) return 0;  // unbounded

  std::vector<P2> pts;
  for (const auto& x : s.x) pts.emplace_back(x(0), x(1));
  auto qh = geo::hull2d(pts);
  if (qh.size() < 3) return 0;  // degenerate hull handled by caller routes
  P2 c = P2::Zero();
  for (const auto& v : qh) c += v;
  c /= static_cast<double>(qh.size());
  double area2 = 0;
  for (size_t i = 0; i < qh.size(); ++i)
    area2 += geo::cross2(qh[i], qh[(i + 1) % qh.size()]);
  if (std::abs(area2) < 1e-14 * (1.0 + maxc) * (1.0 + maxc)) return 0;

  double diam_p = 0;
  for (const auto& u : poly)
    for (const auto& w : poly) diam_p = std::max(diam_p, (u - w).norm());
  double r_in = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < qh.size(); ++i) {
    P2 e0 = qh[i], e1 = qh[(i + 1) % qh.size()];
    P2 ed = e1 - e0;
    double len = ed.norm();
    if (len < 1e-300) continue;
    r_in = std::min(r_in, std::abs(geo::cross2(ed, c - e0)) / len);
  }
  // The hull must be shrunk deeper than the largest geometric miss a
  // gate-passing certificate may leave, else Infeasible would be unsound.
  const double slack = tol + 1e-12;
  double shrink = std::max(1e-9, 1.5 * slack * diam_p / r_in);
  const bool sound = shrink <= 0.05;

  // wm wraps the shrunk hull: its advance upper-bounds drive the Infeasible
  // certificate. wf wraps the exact hull: only its chains can yield triangles
  // that cover the original states and pass the certificate gate.
  WrapMachine wm;
  wm.p.v = poly;
  wm.p.build();
  wm.scale = 1.0 + maxc;
  for (const auto& v : qh) wm.q.push_back(c + (1.0 - shrink) * (v - c));
  WrapMachine wf;
  wf.p = wm.p;
  wf.scale = wm.scale;
  wf.q = qh;

  const double L = wm.p.total;
  const double margin = 1e-6 * (1.0 + L);

  // A chain x0..x3 around the exact hull whose advance reaches L gives a
  // containing triangle directly: the closing chord x2 -> x0 stays on the
  // hull's far side because x0 + L lies within the third tangent interval.
  int polish_budget = 8;
  auto try_feasible = [&](double a) -> bool {
    std::array<P2, 4> ch;
    double w = wf.wrap3(a, &ch);
    if (!wf.ok) {
      wf.ok = true;
      return false;
    }
    Mat v(3, 2);
    for (int i = 0; i < 3; ++i) v.row(i) << ch[i].x(), ch[i].y();
    if (w >= L - margin) {
      std::vector<Vec> verts;
      for (int i = 0; i < 3; ++i) verts.push_back(v.row(i).transpose());
      auto direct = simplex_certificate(g, verts, tol, "tangent-wrap");
      if (direct.verdict == Verdict::Feasible) {
        *res = std::move(direct);
        return true;
      }
    }
    if (polish_budget > 0) {
      --polish_budget;
      if (auto pol = refine_vertices(g, s, v, tol, 6, "tangent-wrap")) {
        *res = std::move(*pol);
        return true;
      }
    }
    return false;
  };

  struct Iv {
    double a, b, f3b;
    double bound() const { return f3b - a; }
  };
  auto cmp = [](const Iv& l, const Iv& r) { return l.bound() < r.bound(); };
  std::priority_queue<Iv, std::vector<Iv>, decltype(cmp)> heap(cmp);

  const std::vector<double>& brk = wm.p.cum;
  std::vector<double> f3(brk.size());
  for (size_t i = 0; i < brk.size(); ++i) {
    double w = wm.wrap3(brk[i], nullptr);
    if (!wm.ok) return 0;
    f3[i] = brk[i] + w;
    if (w >= L - margin && try_feasible(brk[i])) return 1;
  }
  for (size_t i = 0; i + 1 < brk.size(); ++i)
    heap.push({brk[i], brk[i + 1], f3[i + 1]});

  bool any_stuck = false;
  int evals = 0;
  const int max_evals = 20000;
  while (!heap.empty() && evals < max_evals) {
    Iv iv = heap.top();
    heap.pop();
    if (iv.bound() < L - margin)
      return (any_stuck || !sound) ? 0 : -1;
    if (iv.b - iv.a < 1e-11 * L) {
      any_stuck = true;
      continue;
    }
    double m = 0.5 * (iv.a + iv.b);
    double w = wm.wrap3(m, nullptr);
    ++evals;
    if (!wm.ok) return 0;
    if (w >= L - margin && try_feasible(m)) return 1;
    heap.push({iv.a, m, m + w});
    heap.push({m, iv.b, iv.f3b});
  }
  if (heap.empty() && !any_stuck && sound) return -1;
  return 0;
}

}  // namespace detail

// Decides whether the realized fragment embeds into the simplex of its own
// dimension k: k vertices in the normalized state slice covering all
// realized states, with every realized effect within [0,1] on the vertices.
inline EmbeddingResult test_strict_classicality(const RealizedGpt& g,
                                                double tol = kEmbedTol,
                                                int budget = 12) {
  using namespace detail;
  if (!probabilities_in_range(g, tol))
    return verdict_only(Verdict::Infeasible, "probability-range");
  const int k = g.k;
  if (g.states.empty()) return verdict_only(Verdict::Undetermined, "no-states");

  if (k == 1) return simplex_certificate(g, {Vec(0)}, tol, "trivial");

  Slice s = make_slice(g);

  // Minimal hull generators already within the simplex vertex budget.
  auto gens = hull_generator_indices(s.x, kInnerApproxTol);
  if (static_cast<int>(gens.size()) <= k) {
    std::vector<Vec> verts;
    for (int i : gens) verts.push_back(s.x[i]);
    auto r = simplex_certificate(g, verts, tol, "hull-simplex");
    if (r.verdict == Verdict::Feasible) return r;
  }

  if (k == 2) {
    auto seg = segment_lp_exact(s, tol);
    if (!seg) return verdict_only(Verdict::Infeasible, "segment-lp-exact");
    Vec p(1), q(1);
    p << seg->first;
    q << seg->second;
    std::vector<Vec> verts = {p, q};
    if (std::abs(seg->second - seg->first) < 1e-14) verts = {p};
    auto r = simplex_certificate(g, verts, tol, "segment-lp-exact");
    if (r.verdict == Verdict::Feasible) return r;
    return verdict_only(Verdict::Undetermined, "segment-borderline");
  }

  if (k == 3) {
    EmbeddingResult wr;
    int w = wrap_decide(g, s, tol, &wr);
    if (w > 0) return wr;
    if (w < 0) return verdict_only(Verdict::Infeasible, "tangent-wrap");
  }

  uint64_t key =
      hash_combine64(fnv1a64("strict-classicality"), static_cast<uint64_t>(k));
  if (auto r = alternating_search(g, s, tol, budget, key)) return *r;

  try {
    auto nc = test_noncontextuality(g, tol);
    if (nc.verdict == Verdict::Infeasible)
      return verdict_only(Verdict::Infeasible, "noncontextuality-implied");
  } catch (const DegenerateCone&) {
  }
  return verdict_only(Verdict::Undetermined, "exhausted");
}

enum class EmbeddingTest { Noncontextuality, StrictClassicality };

// Smallest depolarizing rate r (states mixed toward their barycenter) that
// makes the chosen test Feasible, located by bisection; 0 when already
// feasible. Feasibility is monotone in r because depolarized states are
// convex mixtures of less-depolarized ones, so a certificate transfers.
inline double robustness_depolarizing(const RealizedGpt& g,
                                      EmbeddingTest which,
                                      double tol = kEmbedTol,
                                      int iterations = 20, int budget = 12) {
  auto feasible = [&](const RealizedGpt& x) -> bool {
    try {
      auto r = which == EmbeddingTest::Noncontextuality
                   ? test_noncontextuality(x, tol)
                   : test_strict_classicality(x, tol, budget);
      return r.verdict == Verdict::Feasible;
    } catch (const DegenerateCone&) {
      return false;
    }
  };
  if (feasible(g)) return 0.0;
  Vec bary = Vec::Zero(g.k);
  for (const auto& s : g.states) bary += s;
  bary /= static_cast<double>(g.states.size());
  auto mixed = [&](double r) {
    RealizedGpt c = g;
    for (auto& s : c.states) s = (1.0 - r) * s + r * bary;
    return c;
  };
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < iterations; ++i) {
    double m = 0.5 * (lo + hi);
    if (feasible(mixed(m)))
      hi = m;
    else
      lo = m;
  }
  return hi;
}

enum class MacroClass {
  ConsistentWithMacrorealism,
  NoncontextualNotMacrorealist,
  Contextual,
  Undetermined
};

inline const char* to_string(MacroClass m) {
  switch (m) {
    case MacroClass::ConsistentWithMacrorealism:
      return "consistent-with-macrorealism";
    case MacroClass::NoncontextualNotMacrorealist:
      return "noncontextual-not-macrorealist";
    case MacroClass::Contextual:
      return "contextual";
    default:
      return "undetermined";
  }
}

struct Classification {
  MacroClass label = MacroClass::Undetermined;
  EmbeddingResult noncontextual;
  EmbeddingResult same_dimension;
};

inline Classification classify(const RealizedGpt& g, double tol = kEmbedTol,
                               int budget = 12) {
  Classification c;
  c.noncontextual = test_noncontextuality(g, tol);
  c.same_dimension = test_strict_classicality(g, tol, budget);
  if (c.same_dimension.verdict == Verdict::Feasible)
    c.label = MacroClass::ConsistentWithMacrorealism;
  else if (c.noncontextual.verdict == Verdict::Infeasible)
    c.label = MacroClass::Contextual;
  else if (c.noncontextual.verdict == Verdict::Feasible &&
           c.same_dimension.verdict == Verdict::Infeasible)
    c.label = MacroClass::NoncontextualNotMacrorealist;
  else
    c.label = MacroClass::Undetermined;
  return c;
}

}  // namespace gptkit
