#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "gsmat/error.hpp"
#include "gsmat/matrix.hpp"

namespace gsmat {

/// A bijection on {0, ..., n-1} stored as its scatter map: applying the
/// permutation sends x[i] to position sigma[i], so the matrix has its
/// nonzero at (sigma[i], i).
class Permutation {
 public:
  Permutation() = default;

  explicit Permutation(std::vector<std::size_t> sigma) : sigma_(std::move(sigma)) {
    std::vector<bool> seen(sigma_.size(), false);
    for (std::size_t i = 0; i < sigma_.size(); ++i) {
      const std::size_t t = sigma_[i];
      if (t >= sigma_.size() || seen[t]) {
        throw std::invalid_argument("Permutation: sigma is not a bijection on 0.." +
                                    std::to_string(sigma_.size() == 0 ? 0 : sigma_.size() - 1) + " (entry " +
                                    std::to_string(i) + " -> " + std::to_string(t) + ")");
      }
      seen[t] = true;
    }
  }

  static Permutation identity(std::size_t n) {
    std::vector<std::size_t> s(n);
    std::iota(s.begin(), s.end(), 0);
    return Permutation(std::move(s));
  }

  std::size_t size() const noexcept { return sigma_.size(); }
  std::size_t operator[](std::size_t i) const noexcept { return sigma_[i]; }
  const std::vector<std::size_t>& sigma() const noexcept { return sigma_; }

  bool is_identity() const noexcept {
    for (std::size_t i = 0; i < sigma_.size(); ++i)
      if (sigma_[i] != i) return false;
    return true;
  }

  bool operator==(const Permutation&) const = default;

 private:
  std::vector<std::size_t> sigma_;
};

/// P_(k,n): sigma(i) = (i mod k) * n/k + floor(i/k).
inline Permutation stride_perm(std::size_t k, std::size_t n) {
  if (k == 0 || n == 0 || n % k != 0) {
    throw std::invalid_argument("stride_perm: k=" + std::to_string(k) + " must divide n=" + std::to_string(n));
  }
  std::vector<std::size_t> s(n);
  const std::size_t stride = n / k;
  for (std::size_t i = 0; i < n; ++i) s[i] = (i % k) * stride + i / k;
  return Permutation(std::move(s));
}

/// Stride permutation acting on adjacent pairs (2t, 2t+1), which always land
/// on an adjacent even/odd pair.
inline Permutation paired_stride_perm(std::size_t k, std::size_t n) {
  if (k == 0 || n == 0 || n % (2 * k) != 0) {
    throw std::invalid_argument("paired_stride_perm: 2k=" + std::to_string(2 * k) +
                                " must divide n=" + std::to_string(n));
  }
  std::vector<std::size_t> s(n);
  const std::size_t chunk = n / k;
  for (std::size_t i = 0; i < n; ++i) s[i] = ((i / 2) % k) * chunk + 2 * (i / (2 * k)) + (i % 2);
  return Permutation(std::move(s));
}

inline Permutation invert(const Permutation& p) {
  std::vector<std::size_t> inv(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) inv[p[i]] = i;
  return Permutation(std::move(inv));
}

/// compose(p, q) applied to x equals apply(p, apply(q, x)).
inline Permutation compose(const Permutation& p, const Permutation& q) {
  if (p.size() != q.size()) {
    throw dimension_error("compose: sizes " + std::to_string(p.size()) + " and " + std::to_string(q.size()));
  }
  std::vector<std::size_t> s(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) s[i] = p[q[i]];
  return Permutation(std::move(s));
}

/// y = P x, i.e. y[sigma[i]] = x[i].
inline Vector apply(const Permutation& p, std::span<const double> x) {
  if (x.size() != p.size()) {
    throw dimension_error("permutation apply: expected length " + std::to_string(p.size()) + ", got " +
                          std::to_string(x.size()));
  }
  Vector y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[p[i]] = x[i];
  return y;
}

/// y = P^T x, i.e. y[i] = x[sigma[i]].
inline Vector apply_transpose(const Permutation& p, std::span<const double> x) {
  if (x.size() != p.size()) {
    throw dimension_error("permutation apply_transpose: expected length " + std::to_string(p.size()) + ", got " +
                          std::to_string(x.size()));
  }
  Vector y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[p[i]];
  return y;
}

/// P M: row i of M becomes row sigma[i].
inline Matrix permute_rows(const Permutation& p, const Matrix& m) {
  if (m.rows() != p.size()) throw dimension_error("permute_rows: row count mismatch");
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < p.size(); ++i) std::copy(m.row(i).begin(), m.row(i).end(), out.row(p[i]).begin());
  return out;
}

/// P^T M: row i of the result is row sigma[i] of M.
inline Matrix permute_rows_transpose(const Permutation& p, const Matrix& m) {
  if (m.rows() != p.size()) throw dimension_error("permute_rows_transpose: row count mismatch");
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < p.size(); ++i) std::copy(m.row(p[i]).begin(), m.row(p[i]).end(), out.row(i).begin());
  return out;
}

/// M P: column j of the result is column sigma[j] of M.
inline Matrix permute_cols(const Matrix& m, const Permutation& p) {
  if (m.cols() != p.size()) throw dimension_error("permute_cols: column count mismatch");
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < p.size(); ++j) out(i, j) = m(i, p[j]);
  return out;
}

/// M P^T: column j of M becomes column sigma[j].
inline Matrix permute_cols_transpose(const Matrix& m, const Permutation& p) {
  if (m.cols() != p.size()) throw dimension_error("permute_cols_transpose: column count mismatch");
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < p.size(); ++j) out(i, p[j]) = m(i, j);
  return out;
}

inline Matrix as_dense(const Permutation& p) {
  Matrix m(p.size(), p.size());
  for (std::size_t i = 0; i < p.size(); ++i) m(p[i], i) = 1.0;
  return m;
}

}  // namespace gsmat
