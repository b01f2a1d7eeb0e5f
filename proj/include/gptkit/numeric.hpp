#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string_view>

namespace gptkit {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Structural invariants (normalization sums, hull membership, instrument
// completeness) are checked against an absolute tolerance; identities that
// should hold to rounding error get the tighter relative one.
inline constexpr double kStructTol = 1e-9;
inline constexpr double kLinTol = 1e-12;

// Default tolerance for simplex-embedding feasibility decisions.
inline constexpr double kEmbedTol = 1e-6;

// Hull-generator pruning keeps a point only if it is farther than this from
// the hull of the others.
inline constexpr double kInnerApproxTol = 1e-7;

inline bool almost_equal(double a, double b, double tol = kStructTol) {
  return std::abs(a - b) <= tol;
}

// Relative check for quantities of unknown scale.
inline bool close_rel(double a, double b, double tol = kLinTol) {
  double scale = std::max({1.0, std::abs(a), std::abs(b)});
  return std::abs(a - b) <= tol * scale;
}

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// splitmix64 finalizer: a stateless bijective mixer. Sampling is keyed on
// (seed, cell, trial index) through this, so draws do not depend on
// evaluation order or on how work is split across threads.
inline uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline uint64_t hash_combine64(uint64_t h, uint64_t v) {
  return mix64(h ^ (v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2)));
}

// Uniform double in [0, 1) from the counter stream with the given key.
inline double keyed_uniform(uint64_t key, uint64_t counter) {
  return static_cast<double>(
             mix64(key + (counter + 1) * 0x9e3779b97f4a7c15ull) >> 11) *
         0x1.0p-53;
}

inline int affine_rank(const std::vector<Vec>& pts, double tol = 1e-9) {
  if (pts.empty()) return -1;
  Mat d(pts[0].size(), pts.size());
  for (size_t i = 0; i < pts.size(); ++i) d.col(i) = pts[i] - pts[0];
  if (d.cols() == 0 || d.rows() == 0) return 0;
  Eigen::JacobiSVD<Mat> svd(d);
  double top = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
  if (top <= tol) return 0;
  int r = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > tol * top) ++r;
  return r;
}

inline int linear_rank(const Mat& m, double tol = 1e-9) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Mat> svd(m);
  double top = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
  if (top <= 0) return 0;
  int r = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > tol * top) ++r;
  return r;
}

}  // namespace gptkit
