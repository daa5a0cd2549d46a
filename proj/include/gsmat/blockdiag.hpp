#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gsmat/error.hpp"
#include "gsmat/linalg.hpp"
#include "gsmat/matrix.hpp"

namespace gsmat {

/// diag(B_0, ..., B_{k-1}) with per-block (possibly rectangular) shapes.
class BlockDiagonal {
 public:
  BlockDiagonal() = default;
  explicit BlockDiagonal(std::vector<Matrix> blocks) : blocks_(std::move(blocks)) { index(); }

  /// k zero blocks of shape rows x cols.
  static BlockDiagonal zeros(std::size_t k, std::size_t rows, std::size_t cols) {
    return BlockDiagonal(std::vector<Matrix>(k, Matrix(rows, cols)));
  }
  static BlockDiagonal identity(std::size_t k, std::size_t b) {
    return BlockDiagonal(std::vector<Matrix>(k, Matrix::identity(b)));
  }

  std::size_t block_count() const noexcept { return blocks_.size(); }
  const Matrix& block(std::size_t i) const noexcept { return blocks_[i]; }
  Matrix& block(std::size_t i) noexcept { return blocks_[i]; }
  const std::vector<Matrix>& blocks() const noexcept { return blocks_; }

  std::size_t rows() const noexcept { return row_off_.back(); }
  std::size_t cols() const noexcept { return col_off_.back(); }
  std::size_t row_offset(std::size_t i) const noexcept { return row_off_[i]; }
  std::size_t col_offset(std::size_t i) const noexcept { return col_off_[i]; }

  /// Entries stored across all blocks.
  std::size_t parameter_count() const noexcept {
    std::size_t n = 0;
    for (const Matrix& b : blocks_) n += b.rows() * b.cols();
    return n;
  }

 private:
  void index() {
    row_off_.assign(1, 0);
    col_off_.assign(1, 0);
    for (const Matrix& b : blocks_) {
      row_off_.push_back(row_off_.back() + b.rows());
      col_off_.push_back(col_off_.back() + b.cols());
    }
  }

  std::vector<Matrix> blocks_;
  std::vector<std::size_t> row_off_{0};
  std::vector<std::size_t> col_off_{0};
};

inline Vector apply(const BlockDiagonal& bd, std::span<const double> x) {
  if (x.size() != bd.cols()) {
    throw dimension_error("block-diagonal apply: expected length " + std::to_string(bd.cols()) + ", got " +
                          std::to_string(x.size()));
  }
  Vector y(bd.rows(), 0.0);
  for (std::size_t k = 0; k < bd.block_count(); ++k) {
    const Matrix& b = bd.block(k);
    const std::size_t ro = bd.row_offset(k), co = bd.col_offset(k);
    for (std::size_t i = 0; i < b.rows(); ++i) {
      double acc = 0.0;
      auto r = b.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) acc += r[j] * x[co + j];
      y[ro + i] = acc;
    }
  }
  return y;
}

inline Vector apply_transpose(const BlockDiagonal& bd, std::span<const double> y) {
  if (y.size() != bd.rows()) {
    throw dimension_error("block-diagonal apply_transpose: expected length " + std::to_string(bd.rows()) +
                          ", got " + std::to_string(y.size()));
  }
  Vector x(bd.cols(), 0.0);
  for (std::size_t k = 0; k < bd.block_count(); ++k) {
    const Matrix& b = bd.block(k);
    const std::size_t ro = bd.row_offset(k), co = bd.col_offset(k);
    for (std::size_t i = 0; i < b.rows(); ++i) {
      auto r = b.row(i);
      const double yi = y[ro + i];
      for (std::size_t j = 0; j < b.cols(); ++j) x[co + j] += r[j] * yi;
    }
  }
  return x;
}

/// Applies to every column of x at once.
inline Matrix apply(const BlockDiagonal& bd, const Matrix& x) {
  if (x.rows() != bd.cols()) throw dimension_error("block-diagonal batched apply: row count mismatch");
  Matrix y(bd.rows(), x.cols());
  for (std::size_t k = 0; k < bd.block_count(); ++k) {
    const Matrix& b = bd.block(k);
    const std::size_t ro = bd.row_offset(k), co = bd.col_offset(k);
    for (std::size_t i = 0; i < b.rows(); ++i) {
      auto out = y.row(ro + i);
      for (std::size_t j = 0; j < b.cols(); ++j) {
        const double bij = b(i, j);
        auto in = x.row(co + j);
        for (std::size_t c = 0; c < x.cols(); ++c) out[c] += bij * in[c];
      }
    }
  }
  return y;
}

inline Matrix as_dense(const BlockDiagonal& bd) {
  Matrix m(bd.rows(), bd.cols());
  for (std::size_t k = 0; k < bd.block_count(); ++k) set_submatrix(m, bd.row_offset(k), bd.col_offset(k), bd.block(k));
  return m;
}

/// Free parameters A_i of the skew blocks K_i = A_i - A_i^T.
struct SkewGenerators {
  std::vector<Matrix> gens;

  static SkewGenerators zeros(std::size_t k, std::size_t b) { return {std::vector<Matrix>(k, Matrix(b, b))}; }

  std::size_t size() const noexcept { return gens.size(); }

  Matrix skew(std::size_t i) const { return gens[i] - transpose(gens[i]); }
};

/// Q = (I + K)(I - K)^{-1}. The two factors commute, so Q is obtained from
/// the linear system (I - K) Q = (I + K).
inline Matrix cayley(const Matrix& k) {
  if (!k.is_square()) throw dimension_error("cayley: K must be square");
  const std::size_t b = k.rows();
  const Matrix eye = Matrix::identity(b);
  return lu_solve(eye - k, eye + k);
}

inline BlockDiagonal cayley_blockdiag(const SkewGenerators& g) {
  std::vector<Matrix> blocks;
  blocks.reserve(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!g.gens[i].is_square()) throw dimension_error("cayley_blockdiag: generator " + std::to_string(i) + " is not square");
    blocks.push_back(cayley(g.skew(i)));
  }
  return BlockDiagonal(std::move(blocks));
}

/// Gradient of a loss with respect to the generator A, given the gradient G
/// with respect to Q = cayley(A - A^T).
///
/// With M = (I - K)^{-1} we have Q = 2M - I, so dQ = 2 M dK M and the
/// gradient with respect to K is 2 M^T G M^T; K = A - A^T then gives
/// grad_A = G_K - G_K^T.
inline Matrix cayley_vjp(const Matrix& a, const Matrix& grad_q) {
  if (!a.is_square() || grad_q.rows() != a.rows() || grad_q.cols() != a.cols()) {
    throw dimension_error("cayley_vjp: generator and gradient shapes differ");
  }
  const std::size_t b = a.rows();
  const Matrix k = a - transpose(a);
  const Matrix m = lu_solve(Matrix::identity(b) - k, Matrix::identity(b));
  const Matrix mt = transpose(m);
  const Matrix gk = 2.0 * (mt * grad_q * mt);
  return gk - transpose(gk);
}

/// Strict upper triangle of K = A - A^T, row by row.
inline Vector pack_upper(const Matrix& a) {
  const std::size_t b = a.rows();
  Vector out;
  out.reserve(b * (b - 1) / 2);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = i + 1; j < b; ++j) out.push_back(a(i, j) - a(j, i));
  return out;
}

/// Generator whose skew part reproduces the packed K (upper triangle only).
inline Matrix unpack_upper(std::span<const double> packed, std::size_t b) {
  if (packed.size() != b * (b - 1) / 2) {
    throw dimension_error("unpack_upper: expected " + std::to_string(b * (b - 1) / 2) + " values for b=" +
                          std::to_string(b) + ", got " + std::to_string(packed.size()));
  }
  Matrix a(b, b);
  std::size_t t = 0;
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = i + 1; j < b; ++j) a(i, j) = packed[t++];
  return a;
}

}  // namespace gsmat
