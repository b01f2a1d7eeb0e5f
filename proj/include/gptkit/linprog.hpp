#pragma once

// Dense two-phase primal simplex, templated on the scalar so the same code
// runs in double for speed and in an exact rational type when a feasibility
// question lands too close to the tolerance to trust floating point.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "gptkit/errors.hpp"

namespace gptkit {

enum class LpStatus { Optimal, Infeasible, Unbounded };

template <class T>
struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  std::vector<T> x;  // user variable values, valid when Optimal
  T objective{};
};

namespace detail {

template <class T>
struct LpEps {
  // Exact types compare against zero.
  static T entering() { return T(0); }
  static T pivot() { return T(0); }
  static T feas() { return T(0); }
};

template <>
struct LpEps<double> {
  static double entering() { return 1e-9; }
  static double pivot() { return 1e-10; }
  static double feas() { return 1e-8; }
};

}  // namespace detail

template <class T>
class LpModel {
 public:
  enum Rel { LE, GE, EQ };

  int add_var(bool nonneg = true) {
    nonneg_.push_back(nonneg);
    cost_.push_back(T(0));
    return static_cast<int>(nonneg_.size()) - 1;
  }

  void set_cost(int v, T c) { cost_.at(v) = std::move(c); }

  void add_constraint(std::vector<std::pair<int, T>> terms, Rel rel, T rhs) {
    rows_.push_back({std::move(terms), rel, std::move(rhs)});
  }

  int num_vars() const { return static_cast<int>(nonneg_.size()); }

  LpResult<T> minimize() const {
    // Map user variables to standard-form columns; free vars split in two.
    const int nu = num_vars();
    std::vector<int> pos_col(nu), neg_col(nu, -1);
    int n = 0;
    for (int v = 0; v < nu; ++v) {
      pos_col[v] = n++;
      if (!nonneg_[v]) neg_col[v] = n++;
    }
    int nslack = 0;
    for (const auto& r : rows_)
      if (r.rel != EQ) ++nslack;
    const int m = static_cast<int>(rows_.size());
    const int ncols = n + nslack;

    std::vector<std::vector<T>> a(m, std::vector<T>(ncols, T(0)));
    std::vector<T> b(m, T(0));
    std::vector<T> c(ncols, T(0));
    for (int v = 0; v < nu; ++v) {
      c[pos_col[v]] = cost_[v];
      if (neg_col[v] >= 0) c[neg_col[v]] = -cost_[v];
    }
    int slack_at = n;
    for (int i = 0; i < m; ++i) {
      const auto& r = rows_[i];
      for (const auto& [v, coef] : r.terms) {
        a[i][pos_col[v]] += coef;
        if (neg_col[v] >= 0) a[i][neg_col[v]] -= coef;
      }
      b[i] = r.rhs;
      if (r.rel == LE) a[i][slack_at++] = T(1);
      if (r.rel == GE) a[i][slack_at++] = T(-1);
      if (b[i] < T(0)) {
        for (auto& e : a[i]) e = -e;
        b[i] = -b[i];
      }
    }

    std::vector<T> xstd;
    LpResult<T> out;
    out.status = solve_standard(a, b, c, ncols, xstd, out.objective);
    if (out.status == LpStatus::Optimal) {
      out.x.resize(nu);
      for (int v = 0; v < nu; ++v) {
        out.x[v] = xstd[pos_col[v]];
        if (neg_col[v] >= 0) out.x[v] -= xstd[neg_col[v]];
      }
    }
    return out;
  }

 private:
  struct Row {
    std::vector<std::pair<int, T>> terms;
    Rel rel;
    T rhs;
  };
  std::vector<bool> nonneg_;
  std::vector<T> cost_;
  std::vector<Row> rows_;

  // min c.x  s.t.  A x = b,  x >= 0,  b >= 0 on entry.
  static LpStatus solve_standard(std::vector<std::vector<T>>& a,
                                 std::vector<T>& b, const std::vector<T>& c,
                                 int n, std::vector<T>& x, T& objective) {
    const int m = static_cast<int>(a.size());
    if (m == 0) {
      // Unconstrained nonnegative variables sit at zero unless pushed down.
      for (int j = 0; j < n; ++j)
        if (c[j] < T(0)) return LpStatus::Unbounded;
      x.assign(n, T(0));
      objective = T(0);
      return LpStatus::Optimal;
    }

    // Full tableau with artificial columns appended: m x (n + m + 1).
    std::vector<std::vector<T>> tab(m + 1, std::vector<T>(n + m + 1, T(0)));
    std::vector<int> basis(m);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) tab[i][j] = a[i][j];
      tab[i][n + i] = T(1);
      tab[i][n + m] = b[i];
      basis[i] = n + i;
    }
    // Phase-1 cost row: minimize sum of artificials.
    auto& z = tab[m];
    for (int i = 0; i < m; ++i)
      for (int j = 0; j <= n + m; ++j) z[j] -= tab[i][j];
    for (int i = 0; i < m; ++i) z[n + i] = T(0);

    if (!iterate(tab, basis, n + m)) throw Error("simplex: phase 1 unbounded");
    if (-z[n + m] > detail::LpEps<T>::feas()) return LpStatus::Infeasible;

    // Drive leftover artificials out of the basis; drop redundant rows.
    std::vector<bool> dead_row(m, false);
    for (int i = 0; i < m; ++i) {
      if (basis[i] < n) continue;
      int piv = -1;
      for (int j = 0; j < n; ++j) {
        T v = tab[i][j] < T(0) ? T(-tab[i][j]) : tab[i][j];
        if (v > detail::LpEps<T>::pivot()) {
          piv = j;
          break;
        }
      }
      if (piv < 0) {
        dead_row[i] = true;
        continue;
      }
      pivot(tab, basis, i, piv, n + m);
    }

    // Phase-2 cost row.
    for (int j = 0; j <= n + m; ++j) z[j] = T(0);
    for (int j = 0; j < n; ++j) z[j] = c[j];
    for (int i = 0; i < m; ++i) {
      if (dead_row[i] || basis[i] >= n) continue;
      if (z[basis[i]] == T(0)) continue;
      T f = z[basis[i]];
      for (int j = 0; j <= n + m; ++j) z[j] -= f * tab[i][j];
    }
    // Artificial columns are no longer eligible.
    if (!iterate(tab, basis, n, &dead_row)) return LpStatus::Unbounded;

    x.assign(n, T(0));
    for (int i = 0; i < m; ++i)
      if (!dead_row[i] && basis[i] < n) x[basis[i]] = tab[i][n + m];
    objective = -z[n + m];
    return LpStatus::Optimal;
  }

  // Primal simplex sweep over columns [0, ncols). Dantzig rule with a
  // permanent switch to Bland once the iteration count suggests cycling.
  static bool iterate(std::vector<std::vector<T>>& tab, std::vector<int>& basis,
                      int ncols, const std::vector<bool>* dead = nullptr) {
    const int m = static_cast<int>(basis.size());
    const int rhs = static_cast<int>(tab[0].size()) - 1;
    auto& z = tab[m];
    const long bland_after = 3l * (m + ncols) + 50;
    for (long iter = 0;; ++iter) {
      if (iter > 500000) throw Error("simplex: iteration limit");
      const bool bland = iter > bland_after;
      int e = -1;
      T best = -detail::LpEps<T>::entering();
      for (int j = 0; j < ncols; ++j) {
        if (z[j] < best || (bland && z[j] < -detail::LpEps<T>::entering())) {
          best = z[j];
          e = j;
          if (bland) break;
        }
      }
      if (e < 0) return true;  // optimal
      int r = -1;
      T best_ratio{};
      for (int i = 0; i < m; ++i) {
        if (dead && (*dead)[i]) continue;
        if (tab[i][e] <= detail::LpEps<T>::pivot()) continue;
        T ratio = tab[i][rhs] / tab[i][e];
        if (r < 0 || ratio < best_ratio ||
            (ratio == best_ratio && basis[i] < basis[r])) {
          r = i;
          best_ratio = ratio;
        }
      }
      if (r < 0) return false;  // unbounded
      pivot(tab, basis, r, e, rhs);
    }
  }

  static void pivot(std::vector<std::vector<T>>& tab, std::vector<int>& basis,
                    int r, int e, int rhs) {
    auto& row = tab[r];
    T p = row[e];
    for (int j = 0; j <= rhs; ++j) row[j] /= p;
    row[e] = T(1);
    for (size_t i = 0; i < tab.size(); ++i) {
      if (static_cast<int>(i) == r) continue;
      T f = tab[i][e];
      if (f == T(0)) continue;
      for (int j = 0; j <= rhs; ++j) tab[i][j] -= f * row[j];
      tab[i][e] = T(0);
    }
    basis[r] = e;
  }
};

}  // namespace gptkit
