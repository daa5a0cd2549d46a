#pragma once

// Independent reference computations used as oracles by the tests. None of
// these call into the library's own factorizations.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <vector>

#include "gsmat/gsmat.hpp"

namespace gsmat::testing {

inline double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) { return max_abs(a - b); }

inline double max_abs_diff(const Vector& a, const Vector& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double rel_diff(const Matrix& a, const Matrix& b) {
  const double n = frobenius_norm(b);
  return frobenius_norm(a - b) / (n > 0 ? n : 1.0);
}

inline double rel_diff(const Vector& a, const Vector& b) {
  Vector d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const double n = norm2(b);
  return norm2(d) / (n > 0 ? n : 1.0);
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.
inline std::vector<double> symmetric_eigenvalues(Matrix a) {
  const std::size_t n = a.rows();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a(i, i);
  std::sort(ev.rbegin(), ev.rend());
  return ev;
}

/// Singular values from the eigenvalues of M^T M (or M M^T), descending.
inline std::vector<double> singular_values_oracle(const Matrix& m) {
  const Matrix g = m.rows() >= m.cols() ? transpose(m) * m : m * transpose(m);
  std::vector<double> ev = symmetric_eigenvalues(g);
  for (double& v : ev) v = std::sqrt(std::max(v, 0.0));
  return ev;
}

/// Determinant by Gaussian elimination with partial pivoting.
inline double determinant(Matrix a) {
  const std::size_t n = a.rows();
  double det = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
    if (a(piv, k) == 0.0) return 0.0;
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
      det = -det;
    }
    det *= a(k, k);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = a(i, k) / a(k, k);
      for (std::size_t j = k; j < n; ++j) a(i, j) -= f * a(k, j);
    }
  }
  return det;
}

/// Matrix exponential by scaling and squaring of a Taylor series.
inline Matrix expm(const Matrix& a) {
  const std::size_t n = a.rows();
  double nrm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += std::abs(a(i, j));
    nrm = std::max(nrm, row);
  }
  int squarings = 0;
  while (nrm > 0.25) {
    nrm *= 0.5;
    ++squarings;
  }
  const Matrix s = std::ldexp(1.0, -squarings) * a;
  Matrix result = Matrix::identity(n);
  Matrix term = Matrix::identity(n);
  for (int k = 1; k <= 30; ++k) {
    term = (1.0 / k) * (term * s);
    result = result + term;
  }
  for (int i = 0; i < squarings; ++i) result = result * result;
  return result;
}

/// Central difference of f along each entry of `x`.
inline Matrix finite_difference(const std::function<double(const Matrix&)>& f, const Matrix& x, double h = 1e-5) {
  Matrix g(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      Matrix xp = x, xm = x;
      xp(i, j) += h;
      xm(i, j) -= h;
      g(i, j) = (f(xp) - f(xm)) / (2.0 * h);
    }
  }
  return g;
}

/// Relative error with a floor so near-zero gradients compare absolutely.
inline double gradient_error(const Matrix& analytic, const Matrix& numeric) {
  return frobenius_norm(analytic - numeric) / std::max(1.0, frobenius_norm(numeric));
}

/// Dense P_L * L * P * R * P_R from explicit permutation matrices.
inline Matrix gs_dense_oracle(const GSMatrix& a) {
  const GSClassSpec& sp = a.spec();
  return as_dense(sp.p_l) * as_dense(a.left()) * as_dense(sp.p) * as_dense(a.right()) * as_dense(sp.p_r);
}

/// Squared projection error per Eckart-Young, from eigenvalues of each block's Gram matrix.
inline double projection_tail_oracle(const Matrix& a, const GSClassSpec& spec) {
  const Matrix inner = transpose(as_dense(spec.p_l)) * a * transpose(as_dense(spec.p_r));
  const BlockRankMap ranks = block_rank_map(spec);
  double tail = 0.0;
  for (std::size_t k1 = 0; k1 < spec.k_l; ++k1) {
    for (std::size_t k2 = 0; k2 < spec.k_r; ++k2) {
      const Matrix blk = submatrix(inner, k1 * spec.b_l.rows, k2 * spec.b_r.cols, spec.b_l.rows, spec.b_r.cols);
      const std::vector<double> ev = symmetric_eigenvalues(transpose(blk) * blk);
      for (std::size_t j = ranks(k1, k2); j < ev.size(); ++j) tail += std::max(ev[j], 0.0);
    }
  }
  return tail;
}

/// Exhaustive search for an inner permutation making every block of the
/// rank map exactly rank one; this is the structural meaning of Monarch.
inline bool monarch_brute_force(std::size_t k_l, BlockShape b_l, std::size_t k_r, BlockShape b_r) {
  const std::size_t s = b_l.cols * k_l;
  std::vector<std::size_t> sigma(s);
  std::iota(sigma.begin(), sigma.end(), 0);
  do {
    const GSClassSpec spec = make_gs_spec(k_l, b_l, k_r, b_r, Permutation(sigma));
    const BlockRankMap map = block_rank_map(spec);
    if (std::all_of(map.ranks.begin(), map.ranks.end(), [](std::size_t r) { return r == 1; })) return true;
  } while (std::next_permutation(sigma.begin(), sigma.end()));
  return false;
}

/// Random square-blocked spec GS(P_L, P, P_R) with b_L * k_L = b_R * k_R = n.
inline GSClassSpec random_square_spec(Rng& rng, std::size_t n, std::size_t b_l, std::size_t b_r, bool outer) {
  const Permutation p_l = outer ? random_permutation(rng, n) : Permutation::identity(n);
  const Permutation p_r = outer ? random_permutation(rng, n) : Permutation::identity(n);
  return make_gs_spec(n / b_l, {b_l, b_l}, n / b_r, {b_r, b_r}, p_l, random_permutation(rng, n), p_r);
}

}  // namespace gsmat::testing
