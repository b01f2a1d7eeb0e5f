#pragma once

// Theory-agnostic reconstruction: factor the frequency matrix F (rows are
// preparations, column 0 is the always-1 unit column, remaining columns are
// measurement outcomes) as F = S.E with inverse-variance weighting, choose
// the rank by a chi-square-per-dof threshold, then fix the linear gauge so
// the fitted unit effect is (1, 0, ..., 0) and every state has unit value on
// it. The realized states and effects are coordinates in an unknown linear
// gauge; only dot products carry meaning.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "gptkit/errors.hpp"
#include "gptkit/hull.hpp"
#include "gptkit/numeric.hpp"
#include "gptkit/simulator.hpp"

namespace gptkit {

struct RankScanEntry {
  int k = 0;
  double chi2_per_dof = 0.0;
  double objective = 0.0;  // raw weighted sum of squares
};

struct FitDiagnostics {
  double chi2_per_dof = 0.0;
  double residual_max = 0.0;
  std::vector<RankScanEntry> rank_scan;
  int iterations = 0;
  bool converged = false;          // ALS reached its stopping rule
  bool rank_threshold_met = true;  // some k <= k_max passed the chi2 gate
};

struct RealizedGpt {
  int k = 0;
  std::vector<std::string> state_ids;
  std::vector<std::string> effect_ids;  // effect_ids[0] == "unit"
  std::vector<Vec> states;              // unit value 1 after gauge fixing
  std::vector<Vec> effects;             // effects[0] == (1, 0, ..., 0)
  FitDiagnostics fit;
  double delta_fit = 0.0;  // worst out-of-[0,1] excursion of fitted probs
};

struct FitOptions {
  int k = 0;          // 0 = select automatically
  int k_max = 6;
  double threshold = 0.0;  // 0 = 1 + 3*sqrt(2/dof)
  int max_iterations = 5000;
  double rel_tol = 1e-10;
};

namespace detail {

struct AlsFit {
  Mat S, E;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

inline double weighted_objective(const Mat& F, const Mat& W, const Mat& S,
                                 const Mat& E) {
  return (W.array() * (F - S * E).array().square()).sum();
}

// Block coordinate descent on rows of S and columns of E. Ridge terms guard
// the normal equations when a factor direction is momentarily unused.
inline AlsFit als(const Mat& F, const Mat& V, int k, Mat S, Mat E,
                  int max_iters, double rel_tol) {
  const Mat W = V.cwiseInverse();
  AlsFit fit;
  double prev = weighted_objective(F, W, S, E);
  for (int it = 0; it < max_iters; ++it) {
    for (int i = 0; i < F.rows(); ++i) {
      Mat A = Mat::Zero(k, k);
      Vec rhs = Vec::Zero(k);
      for (int j = 0; j < F.cols(); ++j) {
        A.noalias() += W(i, j) * E.col(j) * E.col(j).transpose();
        rhs.noalias() += W(i, j) * F(i, j) * E.col(j);
      }
      A.diagonal().array() += 1e-12 * (1.0 + A.trace());
      S.row(i) = A.ldlt().solve(rhs).transpose();
    }
    for (int j = 0; j < F.cols(); ++j) {
      Mat A = Mat::Zero(k, k);
      Vec rhs = Vec::Zero(k);
      for (int i = 0; i < F.rows(); ++i) {
        A.noalias() += W(i, j) * S.row(i).transpose() * S.row(i);
        rhs.noalias() += W(i, j) * F(i, j) * S.row(i).transpose();
      }
      A.diagonal().array() += 1e-12 * (1.0 + A.trace());
      E.col(j) = A.ldlt().solve(rhs);
    }
    double obj = weighted_objective(F, W, S, E);
    fit.iterations = it + 1;
    if (prev - obj <= rel_tol * std::max(prev, 1e-300)) {
      fit.converged = true;
      prev = std::min(prev, obj);
      break;
    }
    prev = obj;
  }
  fit.S = std::move(S);
  fit.E = std::move(E);
  fit.objective = prev;
  return fit;
}

inline void svd_init(const Mat& F, int k, Mat& S, Mat& E) {
  Eigen::JacobiSVD<Mat> svd(F, Eigen::ComputeThinU | Eigen::ComputeThinV);
  S = Mat::Zero(F.rows(), k);
  E = Mat::Zero(k, F.cols());
  int avail = std::min<int>(k, svd.singularValues().size());
  for (int c = 0; c < avail; ++c) {
    double s = std::sqrt(std::max(0.0, svd.singularValues()(c)));
    S.col(c) = svd.matrixU().col(c) * s;
    E.row(c) = svd.matrixV().col(c).transpose() * s;
  }
}

inline AlsFit fit_rank(const Mat& F, const Mat& V, int k, int max_iters,
                       double rel_tol, const AlsFit* warm) {
  Mat S, E;
  svd_init(F, k, S, E);
  AlsFit best = als(F, V, k, S, E, max_iters, rel_tol);
  if (warm && warm->S.cols() == k - 1) {
    // Pad the previous rank's factors so the scan objective cannot rise.
    Mat Sw = Mat::Zero(F.rows(), k), Ew = Mat::Zero(k, F.cols());
    Sw.leftCols(k - 1) = warm->S;
    Ew.topRows(k - 1) = warm->E;
    uint64_t key = hash_combine64(0x5eedu, static_cast<uint64_t>(k));
    for (int i = 0; i < F.rows(); ++i)
      Sw(i, k - 1) = 1e-6 * (keyed_uniform(key, i) - 0.5);
    for (int j = 0; j < F.cols(); ++j)
      Ew(k - 1, j) = 1e-6 * (keyed_uniform(key, 1000 + j) - 0.5);
    AlsFit alt = als(F, V, k, Sw, Ew, max_iters, rel_tol);
    if (alt.objective < best.objective) best = alt;
  }
  return best;
}

inline int dof_for(const Mat& F, int k) {
  int dof = static_cast<int>(F.rows() * F.cols()) -
            k * static_cast<int>(F.rows() + F.cols()) + k * k;
  return std::max(dof, 1);
}

struct ScanOutcome {
  int k = 0;
  bool threshold_met = false;
  std::vector<RankScanEntry> scan;
  AlsFit chosen;
};

inline ScanOutcome scan_ranks(const Mat& F, const Mat& V, int k_max,
                              double threshold, int max_iterations,
                              double rel_tol) {
  if (F.rows() < 1 || F.cols() < 1)
    throw EmptyGeneratorList("rank scan: empty frequency matrix");
  k_max = std::min<int>({k_max, static_cast<int>(F.rows()),
                         static_cast<int>(F.cols())});
  ScanOutcome out;
  AlsFit prev;
  for (int k = 1; k <= k_max; ++k) {
    AlsFit fit =
        fit_rank(F, V, k, max_iterations, rel_tol, k > 1 ? &prev : nullptr);
    int dof = dof_for(F, k);
    double chi2 = fit.objective / dof;
    out.scan.push_back({k, chi2, fit.objective});
    double thr = threshold > 0 ? threshold : 1.0 + 3.0 * std::sqrt(2.0 / dof);
    prev = std::move(fit);
    if (chi2 <= thr) {
      out.k = k;
      out.threshold_met = true;
      out.chosen = std::move(prev);
      return out;
    }
  }
  out.k = k_max;
  out.threshold_met = false;
  out.chosen = std::move(prev);
  return out;
}

}  // namespace detail

struct RankSelection {
  int k = 0;
  bool threshold_met = false;  // false: no rank qualified, k_max returned
  std::vector<RankScanEntry> scan;
};

inline RankSelection select_rank(const Mat& F, const Mat& V, int k_max,
                                 double threshold = 0.0,
                                 int max_iterations = 5000,
                                 double rel_tol = 1e-10) {
  auto out = detail::scan_ranks(F, V, k_max, threshold, max_iterations,
                                rel_tol);
  return RankSelection{out.k, out.threshold_met, std::move(out.scan)};
}

inline RealizedGpt fit_realized_gpt(const DataMatrix& dm, FitOptions opt = {}) {
  const Mat& F = dm.F;
  const Mat& V = dm.V;
  RealizedGpt out;
  out.state_ids = dm.row_ids;

  detail::AlsFit fit;
  int k = 0;
  if (opt.k > 0) {
    k = std::min<int>({opt.k, static_cast<int>(F.rows()),
                       static_cast<int>(F.cols())});
    detail::AlsFit warm;
    if (k > 1) {
      warm = detail::fit_rank(F, V, k - 1, opt.max_iterations, opt.rel_tol,
                              nullptr);
      fit = detail::fit_rank(F, V, k, opt.max_iterations, opt.rel_tol, &warm);
    } else {
      fit = detail::fit_rank(F, V, k, opt.max_iterations, opt.rel_tol,
                             nullptr);
    }
    out.fit.rank_scan.push_back(
        {k, fit.objective / detail::dof_for(F, k), fit.objective});
  } else {
    auto scan = detail::scan_ranks(F, V, opt.k_max, opt.threshold,
                                   opt.max_iterations, opt.rel_tol);
    k = scan.k;
    fit = std::move(scan.chosen);
    out.fit.rank_scan = std::move(scan.scan);
    out.fit.rank_threshold_met = scan.threshold_met;
  }
  out.k = k;

  out.fit.iterations = fit.iterations;
  out.fit.converged = fit.converged;
  out.fit.chi2_per_dof = fit.objective / detail::dof_for(F, k);
  out.fit.residual_max =
      (F - fit.S * fit.E).cwiseAbs().maxCoeff();

  // Gauge: send the fitted unit column to (1,0,...,0). The map A has the
  // fitted unit as its first row and an orthonormal complement below;
  // states transform by A, effects by A^{-T}, preserving all dot products.
  Vec eu = fit.E.col(0);
  if (eu.norm() < 1e-8) {
    out.fit.converged = false;  // junk fit, leave raw coordinates
    for (int i = 0; i < fit.S.rows(); ++i) out.states.push_back(fit.S.row(i).transpose());
    for (int j = 0; j < fit.E.cols(); ++j) out.effects.push_back(fit.E.col(j));
  } else {
    Mat A(k, k);
    A.row(0) = eu.transpose();
    if (k > 1) {
      Eigen::HouseholderQR<Mat> qr(eu);
      Mat Q = qr.householderQ() * Mat::Identity(k, k);
      A.bottomRows(k - 1) = Q.rightCols(k - 1).transpose();
    }
    Mat At_inv = A.transpose().partialPivLu().inverse();
    for (int i = 0; i < fit.S.rows(); ++i) {
      Vec s = A * fit.S.row(i).transpose();
      if (std::abs(s(0)) < 1e-8) {
        out.fit.converged = false;
        out.states.push_back(s);
      } else {
        out.states.push_back(s / s(0));
      }
    }
    for (int j = 0; j < fit.E.cols(); ++j)
      out.effects.push_back(At_inv * fit.E.col(j));
    out.effects[0] = Vec::Zero(k);
    out.effects[0](0) = 1.0;
  }
  out.effect_ids.clear();
  for (const auto& c : dm.cols) out.effect_ids.push_back(c.label);
  if (!out.effect_ids.empty()) out.effect_ids[0] = "unit";

  double delta = 0.0;
  for (const auto& e : out.effects)
    for (const auto& s : out.states) {
      double p = e.dot(s);
      delta = std::max({delta, -p, p - 1.0});
    }
  out.delta_fit = std::max(delta, 0.0);
  return out;
}

struct InnerApprox {
  std::vector<Vec> states;
  std::vector<Vec> effects;
  std::vector<std::string> state_ids;
  std::vector<std::string> effect_ids;
};

// Drops realized states/effects that are convex combinations of the others,
// leaving hull generator lists.
inline InnerApprox inner_approx(const RealizedGpt& g,
                                double tol = kInnerApproxTol) {
  InnerApprox ia;
  auto skeep = hull_generator_indices(g.states, tol);
  for (int i : skeep) {
    ia.states.push_back(g.states[i]);
    ia.state_ids.push_back(g.state_ids.size() > static_cast<size_t>(i)
                               ? g.state_ids[i]
                               : std::to_string(i));
  }
  auto ekeep = hull_generator_indices(g.effects, tol);
  for (int i : ekeep) {
    ia.effects.push_back(g.effects[i]);
    ia.effect_ids.push_back(g.effect_ids.size() > static_cast<size_t>(i)
                                ? g.effect_ids[i]
                                : std::to_string(i));
  }
  return ia;
}

}  // namespace gptkit
