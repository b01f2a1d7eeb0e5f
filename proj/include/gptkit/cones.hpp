#pragma once

// Dual cone extreme rays by the incremental double description method.
// The dual of cone(r_1..r_n) is {y : y.r_i >= 0 for all i}; it is pointed
// exactly when the r_i span the whole space, which build_cones enforces.

#include <string>
#include <vector>

#include "gptkit/errors.hpp"
#include "gptkit/numeric.hpp"
#include "gptkit/tomography.hpp"

namespace gptkit {

namespace detail {

constexpr double kConeTol = 1e-9;

struct DdRay {
  Vec y;
  std::vector<uint64_t> zero;  // bitset over processed constraints
};

inline bool zero_bit(const std::vector<uint64_t>& z, int i) {
  return (z[i >> 6] >> (i & 63)) & 1;
}
inline void set_zero_bit(std::vector<uint64_t>& z, int i) {
  z[i >> 6] |= uint64_t(1) << (i & 63);
}
inline std::vector<uint64_t> zero_and(const std::vector<uint64_t>& a,
                                      const std::vector<uint64_t>& b) {
  std::vector<uint64_t> r(a.size());
  for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] & b[i];
  return r;
}
inline bool zero_superset(const std::vector<uint64_t>& big,
                          const std::vector<uint64_t>& small) {
  for (size_t i = 0; i < small.size(); ++i)
    if ((big[i] & small[i]) != small[i]) return false;
  return true;
}

// Extreme rays of {y : rays[i].y >= 0}. Input rays must span R^k.
inline std::vector<Vec> dual_cone_rays(std::vector<Vec> rays, int k) {
  // Normalize and dedupe the constraint list.
  std::vector<Vec> cons;
  for (auto& r : rays) {
    double n = r.norm();
    if (n < 1e-12) continue;
    Vec u = r / n;
    bool dup = false;
    for (const auto& c : cons)
      if ((c - u).lpNorm<Eigen::Infinity>() <= kConeTol) {
        dup = true;
        break;
      }
    if (!dup) cons.push_back(u);
  }
  const int n = static_cast<int>(cons.size());
  if (n == 0) throw DegenerateCone("dual cone: no generators");
  const int words = (n + 63) / 64;

  // Greedy linearly independent subset for the initial simplicial cone.
  std::vector<int> base;
  Mat basis(k, 0);
  for (int i = 0; i < n && static_cast<int>(base.size()) < k; ++i) {
    Mat trial(k, basis.cols() + 1);
    trial.leftCols(basis.cols()) = basis;
    trial.col(basis.cols()) = cons[i];
    if (linear_rank(trial, 1e-9) == trial.cols()) {
      basis = trial;
      base.push_back(i);
    }
  }
  if (static_cast<int>(base.size()) < k)
    throw DegenerateCone("dual cone: generators do not span the space");

  Mat b(k, k);
  for (int j = 0; j < k; ++j) b.row(j) = cons[base[j]].transpose();
  Mat binv = b.partialPivLu().inverse();

  std::vector<DdRay> cur;
  for (int j = 0; j < k; ++j) {
    DdRay r;
    r.y = binv.col(j).normalized();
    r.zero.assign(words, 0);
    for (int l = 0; l < k; ++l)
      if (l != j) set_zero_bit(r.zero, base[l]);
    cur.push_back(std::move(r));
  }

  std::vector<bool> in_base(n, false);
  for (int i : base) in_base[i] = true;

  for (int c = 0; c < n; ++c) {
    if (in_base[c]) continue;
    const Vec& g = cons[c];
    std::vector<double> val(cur.size());
    std::vector<int> pos, neg;
    for (size_t i = 0; i < cur.size(); ++i) {
      val[i] = g.dot(cur[i].y);
      if (val[i] > kConeTol)
        pos.push_back(static_cast<int>(i));
      else if (val[i] < -kConeTol)
        neg.push_back(static_cast<int>(i));
      else
        set_zero_bit(cur[i].zero, c);
    }
    if (neg.empty()) continue;

    std::vector<DdRay> next;
    for (size_t i = 0; i < cur.size(); ++i)
      if (val[i] > -kConeTol) next.push_back(cur[i]);

    for (int p : pos)
      for (int m : neg) {
        auto common = zero_and(cur[p].zero, cur[m].zero);
        // Combinatorial adjacency: no third ray's zero set contains the
        // common zero set of p and m.
        bool adjacent = true;
        for (size_t w = 0; w < cur.size(); ++w) {
          if (static_cast<int>(w) == p || static_cast<int>(w) == m) continue;
          if (zero_superset(cur[w].zero, common)) {
            adjacent = false;
            break;
          }
        }
        if (!adjacent) continue;
        DdRay r;
        r.y = (val[p] * cur[m].y - val[m] * cur[p].y).normalized();
        r.zero = std::move(common);
        set_zero_bit(r.zero, c);
        next.push_back(std::move(r));
      }
    cur = std::move(next);
  }

  std::vector<Vec> out;
  for (auto& r : cur) out.push_back(std::move(r.y));
  return out;
}

}  // namespace detail

struct ConePair {
  int k = 0;
  std::vector<Vec> state_rays;
  std::vector<Vec> effect_rays;       // complement-closed
  std::vector<Vec> dual_state_rays;   // nonnegative on every state ray
  std::vector<Vec> dual_effect_rays;  // nonnegative on every effect ray
  Vec unit;                           // (1, 0, ..., 0) in the fixed gauge
};

// Closing the effect list under complements u - e changes nothing about
// simplex embeddability (kappa(u-e) = 1 - kappa(e) extends any embedding)
// but guarantees certificate entries stay below one.
inline ConePair build_cones(const RealizedGpt& g) {
  const int k = g.k;
  if (k > 6)
    throw DimensionTooLarge("build_cones: realized dimension " +
                            std::to_string(k) + " exceeds 6");
  ConePair cp;
  cp.k = k;
  cp.unit = Vec::Zero(k);
  cp.unit(0) = 1.0;

  cp.state_rays = g.states;
  for (const auto& e : g.effects) {
    cp.effect_rays.push_back(e);
    cp.effect_rays.push_back(cp.unit - e);
  }

  Mat sm(k, cp.state_rays.size());
  for (size_t i = 0; i < cp.state_rays.size(); ++i)
    sm.col(i) = cp.state_rays[i];
  if (linear_rank(sm, 1e-9) < k)
    throw DegenerateCone("build_cones: states do not span dimension " +
                         std::to_string(k));
  Mat em(k, cp.effect_rays.size());
  for (size_t i = 0; i < cp.effect_rays.size(); ++i)
    em.col(i) = cp.effect_rays[i];
  if (linear_rank(em, 1e-9) < k)
    throw DegenerateCone("build_cones: effects do not span dimension " +
                         std::to_string(k));

  cp.dual_state_rays = detail::dual_cone_rays(cp.state_rays, k);
  cp.dual_effect_rays = detail::dual_cone_rays(cp.effect_rays, k);

  for (const auto& h : cp.dual_state_rays)
    for (const auto& s : cp.state_rays)
      if (h.dot(s) < -1e-7)
        throw Error("build_cones: dual state ray violates its cone");
  for (const auto& sg : cp.dual_effect_rays)
    for (const auto& e : cp.effect_rays)
      if (sg.dot(e) < -1e-7)
        throw Error("build_cones: dual effect ray violates its cone");
  return cp;
}

}  // namespace gptkit
