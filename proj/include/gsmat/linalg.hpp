#pragma once

// Small dense kernels used by the structured types: LU solve for Cayley
// blocks, one-sided Jacobi SVD for projection, Householder QR with column
// pivoting for re-orthogonalization. All sized for blocks of a few hundred
// rows at most.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "gsmat/error.hpp"
#include "gsmat/matrix.hpp"

namespace gsmat {

/// Solves A X = B by Gaussian elimination with partial pivoting.
inline Matrix lu_solve(Matrix a, Matrix b) {
  if (!a.is_square()) throw dimension_error("lu_solve: system matrix must be square");
  if (a.rows() != b.rows()) throw dimension_error("lu_solve: right-hand side row count mismatch");
  if (!all_finite(a) || !all_finite(b)) throw numerical_error("lu_solve: non-finite input");

  const std::size_t n = a.rows();
  double scale = 0.0;
  for (double v : a.data()) scale = std::max(scale, std::abs(v));
  const double tiny = std::max(scale, 1.0) * static_cast<double>(n) * std::numeric_limits<double>::epsilon();

  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
    if (std::abs(a(piv, k)) <= tiny) throw numerical_error("lu_solve: matrix is numerically singular");
    if (piv != k) {
      std::swap_ranges(a.row(k).begin(), a.row(k).end(), a.row(piv).begin());
      std::swap_ranges(b.row(k).begin(), b.row(k).end(), b.row(piv).begin());
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = a(i, k) / a(k, k);
      if (f == 0.0) continue;
      for (std::size_t j = k; j < n; ++j) a(i, j) -= f * a(k, j);
      for (std::size_t j = 0; j < b.cols(); ++j) b(i, j) -= f * b(k, j);
    }
  }
  for (std::size_t kk = n; kk-- > 0;) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = b(kk, j);
      for (std::size_t i = kk + 1; i < n; ++i) acc -= a(kk, i) * b(i, j);
      b(kk, j) = acc / a(kk, kk);
    }
  }
  return b;
}

/// Thin SVD: M = U diag(s) V^T with U p x k, V q x k, k = min(p, q).
struct Svd {
  Matrix u;
  Vector s;
  Matrix v;
};

namespace detail {

// Gram-Schmidt (twice) of `cand` against the first `count` columns of q.
inline bool orthonormal_completion_column(Matrix& q, std::size_t count, std::size_t target) {
  const std::size_t p = q.rows();
  for (std::size_t e = 0; e < p; ++e) {
    Vector cand(p, 0.0);
    cand[e] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t j = 0; j < count; ++j) {
        if (j == target) continue;
        double proj = 0.0;
        for (std::size_t i = 0; i < p; ++i) proj += q(i, j) * cand[i];
        for (std::size_t i = 0; i < p; ++i) cand[i] -= proj * q(i, j);
      }
    }
    const double nrm = norm2(cand);
    if (nrm > 0.5) {
      for (std::size_t i = 0; i < p; ++i) q(i, target) = cand[i] / nrm;
      return true;
    }
  }
  return false;
}

// One-sided Jacobi for p >= q.
inline Svd jacobi_svd_tall(const Matrix& m) {
  const std::size_t p = m.rows();
  const std::size_t q = m.cols();
  Matrix w = m;
  Matrix v = Matrix::identity(q);
  constexpr double eps = 1e-15;
  constexpr int max_sweeps = 100;

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t j = 0; j + 1 < q; ++j) {
      for (std::size_t k = j + 1; k < q; ++k) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < p; ++i) {
          alpha += w(i, j) * w(i, j);
          beta += w(i, k) * w(i, k);
          gamma += w(i, j) * w(i, k);
        }
        if (gamma == 0.0 || std::abs(gamma) <= eps * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < p; ++i) {
          const double wj = w(i, j), wk = w(i, k);
          w(i, j) = c * wj - s * wk;
          w(i, k) = s * wj + c * wk;
        }
        for (std::size_t i = 0; i < q; ++i) {
          const double vj = v(i, j), vk = v(i, k);
          v(i, j) = c * vj - s * vk;
          v(i, k) = s * vj + c * vk;
        }
      }
    }
    if (!rotated) break;
  }

  Svd out{Matrix(p, q), Vector(q), v};
  for (std::size_t j = 0; j < q; ++j) {
    double nrm = 0.0;
    for (std::size_t i = 0; i < p; ++i) nrm += w(i, j) * w(i, j);
    out.s[j] = std::sqrt(nrm);
  }
  std::vector<std::size_t> order(q);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return out.s[a] > out.s[b]; });

  Svd sorted{Matrix(p, q), Vector(q), Matrix(q, q)};
  const double smax = q > 0 ? out.s[order[0]] : 0.0;
  const double cutoff = smax * static_cast<double>(std::max(p, q)) * std::numeric_limits<double>::epsilon();
  std::vector<std::size_t> to_complete;
  for (std::size_t jj = 0; jj < q; ++jj) {
    const std::size_t j = order[jj];
    sorted.s[jj] = out.s[j];
    for (std::size_t i = 0; i < q; ++i) sorted.v(i, jj) = v(i, j);
    if (out.s[j] > cutoff && out.s[j] > 0.0) {
      for (std::size_t i = 0; i < p; ++i) sorted.u(i, jj) = w(i, j) / out.s[j];
    } else {
      to_complete.push_back(jj);
    }
  }
  for (std::size_t jj : to_complete) {
    // columns being completed are zero, so orthogonalizing against all q is fine
    if (!orthonormal_completion_column(sorted.u, q, jj))
      throw numerical_error("svd_small: failed to complete left singular basis");
  }
  return sorted;
}

}  // namespace detail

/// Small dense SVD by one-sided Jacobi. Singular values are nonincreasing;
/// each left singular vector has its first nonzero entry nonnegative.
inline Svd svd_small(const Matrix& m) {
  if (!all_finite(m)) throw numerical_error("svd_small: non-finite input");
  Svd r;
  if (m.rows() >= m.cols()) {
    r = detail::jacobi_svd_tall(m);
  } else {
    Svd t = detail::jacobi_svd_tall(transpose(m));
    r = Svd{std::move(t.v), std::move(t.s), std::move(t.u)};
  }
  for (std::size_t j = 0; j < r.s.size(); ++j) {
    for (std::size_t i = 0; i < r.u.rows(); ++i) {
      if (std::abs(r.u(i, j)) > 1e-12) {
        if (r.u(i, j) < 0.0) {
          for (std::size_t a = 0; a < r.u.rows(); ++a) r.u(a, j) = -r.u(a, j);
          for (std::size_t a = 0; a < r.v.rows(); ++a) r.v(a, j) = -r.v(a, j);
        }
        break;
      }
    }
  }
  return r;
}

/// M[:, perm] = Q R with Q p x p orthogonal and R p x q upper triangular.
struct PivotedQr {
  Matrix q;
  Matrix r;
  std::vector<std::size_t> perm;
};

/// Householder QR with column pivoting (largest remaining column norm first).
inline PivotedQr qr_pivoted(const Matrix& m) {
  if (!all_finite(m)) throw numerical_error("qr_pivoted: non-finite input");
  const std::size_t p = m.rows();
  const std::size_t q = m.cols();
  Matrix a = m;
  std::vector<std::size_t> perm(q);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<Vector> reflectors;
  const std::size_t steps = std::min(p, q);

  for (std::size_t k = 0; k < steps; ++k) {
    std::size_t best = k;
    double best_norm = -1.0;
    for (std::size_t j = k; j < q; ++j) {
      double nrm = 0.0;
      for (std::size_t i = k; i < p; ++i) nrm += a(i, j) * a(i, j);
      if (nrm > best_norm) {
        best_norm = nrm;
        best = j;
      }
    }
    if (best != k) {
      for (std::size_t i = 0; i < p; ++i) std::swap(a(i, k), a(i, best));
      std::swap(perm[k], perm[best]);
    }

    Vector v(p - k);
    for (std::size_t i = k; i < p; ++i) v[i - k] = a(i, k);
    const double xnorm = norm2(v);
    if (xnorm == 0.0) {
      reflectors.emplace_back();
      continue;
    }
    const double alpha = v[0] >= 0.0 ? -xnorm : xnorm;
    v[0] -= alpha;
    const double vv = dot(v, v);
    if (vv == 0.0) {
      reflectors.emplace_back();
      continue;
    }
    for (std::size_t j = k; j < q; ++j) {
      double proj = 0.0;
      for (std::size_t i = k; i < p; ++i) proj += v[i - k] * a(i, j);
      proj *= 2.0 / vv;
      for (std::size_t i = k; i < p; ++i) a(i, j) -= proj * v[i - k];
    }
    for (std::size_t i = k + 1; i < p; ++i) a(i, k) = 0.0;
    reflectors.push_back(std::move(v));
  }

  Matrix qm = Matrix::identity(p);
  for (std::size_t kk = reflectors.size(); kk-- > 0;) {
    const Vector& v = reflectors[kk];
    if (v.empty()) continue;
    const double vv = dot(v, v);
    for (std::size_t j = 0; j < p; ++j) {
      double proj = 0.0;
      for (std::size_t i = kk; i < p; ++i) proj += v[i - kk] * qm(i, j);
      proj *= 2.0 / vv;
      for (std::size_t i = kk; i < p; ++i) qm(i, j) -= proj * v[i - kk];
    }
  }
  return PivotedQr{std::move(qm), std::move(a), std::move(perm)};
}

}  // namespace gsmat
