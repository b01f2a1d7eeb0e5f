#pragma once

#include <vector>

#include "gptkit/errors.hpp"
#include "gptkit/linprog.hpp"
#include "gptkit/numeric.hpp"

namespace gptkit {

// L-infinity distance from p to conv(gens), as the optimum of a small LP.
inline double hull_distance(const Vec& p, const std::vector<Vec>& gens) {
  if (gens.empty()) throw EmptyGeneratorList("hull_distance: no generators");
  const int k = static_cast<int>(p.size());
  for (const auto& g : gens)
    if (g.size() != k) throw DimensionMismatch("hull_distance: generator size");

  LpModel<double> lp;
  std::vector<int> lam(gens.size());
  for (auto& v : lam) v = lp.add_var();
  int t = lp.add_var();
  lp.set_cost(t, 1.0);
  for (int c = 0; c < k; ++c) {
    std::vector<std::pair<int, double>> up, dn;
    for (size_t i = 0; i < gens.size(); ++i) {
      up.emplace_back(lam[i], gens[i](c));
      dn.emplace_back(lam[i], gens[i](c));
    }
    up.emplace_back(t, -1.0);
    dn.emplace_back(t, 1.0);
    lp.add_constraint(std::move(up), LpModel<double>::LE, p(c));
    lp.add_constraint(std::move(dn), LpModel<double>::GE, p(c));
  }
  std::vector<std::pair<int, double>> sum;
  for (size_t i = 0; i < gens.size(); ++i) sum.emplace_back(lam[i], 1.0);
  lp.add_constraint(std::move(sum), LpModel<double>::EQ, 1.0);

  auto r = lp.minimize();
  if (r.status != LpStatus::Optimal)
    throw Error("hull_distance: LP did not solve");
  return r.objective;
}

inline bool in_convex_hull(const Vec& p, const std::vector<Vec>& gens,
                           double tol = kStructTol) {
  return hull_distance(p, gens) <= tol;
}

// Indices of points that are not convex combinations of the others, scanned
// in input order so the result is deterministic. Near-duplicates keep their
// first occurrence.
inline std::vector<int> hull_generator_indices(const std::vector<Vec>& pts,
                                               double tol = kInnerApproxTol) {
  std::vector<int> keep;
  for (size_t i = 0; i < pts.size(); ++i) {
    bool dup = false;
    for (int j : keep)
      if ((pts[i] - pts[j]).template lpNorm<Eigen::Infinity>() <= tol) {
        dup = true;
        break;
      }
    if (!dup) keep.push_back(static_cast<int>(i));
  }
  // Greedy removal pass: drop a point if the remaining ones still cover it.
  for (size_t n = 0; n < keep.size();) {
    std::vector<Vec> others;
    for (size_t j = 0; j < keep.size(); ++j)
      if (j != n) others.push_back(pts[keep[j]]);
    if (!others.empty() && in_convex_hull(pts[keep[n]], others, tol))
      keep.erase(keep.begin() + n);
    else
      ++n;
  }
  return keep;
}

}  // namespace gptkit
