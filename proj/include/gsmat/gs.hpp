#pragma once

// GS(P_L, P, P_R) matrices: A = P_L (L P R) P_R with block-diagonal L, R.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gsmat/blockdiag.hpp"
#include "gsmat/error.hpp"
#include "gsmat/linalg.hpp"
#include "gsmat/matrix.hpp"
#include "gsmat/perm.hpp"

namespace gsmat {

struct BlockShape {
  std::size_t rows = 0;
  std::size_t cols = 0;
  bool operator==(const BlockShape&) const = default;
};

/// Dimensions, block layout and the three permutations of a GS class.
/// L has k_l blocks of shape b_l, R has k_r blocks of shape b_r, and
///   b_l.cols * k_l = b_r.rows * k_r = s,  b_l.rows * k_l = m,  b_r.cols * k_r = n.
struct GSClassSpec {
  std::size_t m = 0, n = 0, s = 0;
  std::size_t k_l = 0, k_r = 0;
  BlockShape b_l, b_r;
  Permutation p_l, p, p_r;

  void validate() const {
    auto fail = [](const std::string& what) { throw dimension_error("GSClassSpec: " + what); };
    if (k_l == 0 || k_r == 0) fail("block counts must be positive");
    if (b_l.rows == 0 || b_l.cols == 0 || b_r.rows == 0 || b_r.cols == 0) fail("block sizes must be positive");
    if (b_l.cols * k_l != s) fail("b_L^2 * k_L = " + std::to_string(b_l.cols * k_l) + " != s = " + std::to_string(s));
    if (b_r.rows * k_r != s) fail("b_R^1 * k_R = " + std::to_string(b_r.rows * k_r) + " != s = " + std::to_string(s));
    if (b_l.rows * k_l != m) fail("b_L^1 * k_L = " + std::to_string(b_l.rows * k_l) + " != m = " + std::to_string(m));
    if (b_r.cols * k_r != n) fail("b_R^2 * k_R = " + std::to_string(b_r.cols * k_r) + " != n = " + std::to_string(n));
    if (p_l.size() != m) fail("P_L has dimension " + std::to_string(p_l.size()) + ", expected m = " + std::to_string(m));
    if (p.size() != s) fail("P has dimension " + std::to_string(p.size()) + ", expected s = " + std::to_string(s));
    if (p_r.size() != n) fail("P_R has dimension " + std::to_string(p_r.size()) + ", expected n = " + std::to_string(n));
  }

  /// Square matrix with square blocks, the setting of orthogonal GS matrices.
  bool is_square_blocked() const noexcept {
    return m == n && b_l.rows == b_l.cols && b_r.rows == b_r.cols;
  }

  bool operator==(const GSClassSpec&) const = default;
};

inline GSClassSpec make_gs_spec(std::size_t k_l, BlockShape b_l, std::size_t k_r, BlockShape b_r, Permutation p_l,
                                Permutation p, Permutation p_r) {
  GSClassSpec spec{b_l.rows * k_l, b_r.cols * k_r, b_l.cols * k_l, k_l, k_r, b_l, b_r,
                   std::move(p_l), std::move(p), std::move(p_r)};
  spec.validate();
  return spec;
}

/// GS(I, P, I) with the given block layout.
inline GSClassSpec make_gs_spec(std::size_t k_l, BlockShape b_l, std::size_t k_r, BlockShape b_r, Permutation p) {
  return make_gs_spec(k_l, b_l, k_r, b_r, Permutation::identity(b_l.rows * k_l), std::move(p),
                      Permutation::identity(b_r.cols * k_r));
}

/// The fine-tuning class GS(P^T, P, I) with P = P_(r, d), r = d / b blocks of size b.
inline GSClassSpec gsoft_spec(std::size_t d, std::size_t b) {
  if (b == 0 || d == 0 || d % b != 0) {
    throw dimension_error("gsoft_spec: block size " + std::to_string(b) + " does not divide d = " + std::to_string(d));
  }
  const std::size_t r = d / b;
  Permutation p = stride_perm(r, d);
  Permutation p_l = invert(p);
  return make_gs_spec(r, {b, b}, r, {b, b}, std::move(p_l), std::move(p), Permutation::identity(d));
}

class GSMatrix {
 public:
  GSMatrix(GSClassSpec spec, BlockDiagonal l, BlockDiagonal r)
      : spec_(std::move(spec)), l_(std::move(l)), r_(std::move(r)) {
    spec_.validate();
    check(l_, spec_.k_l, spec_.b_l, "L");
    check(r_, spec_.k_r, spec_.b_r, "R");
  }

  const GSClassSpec& spec() const noexcept { return spec_; }
  const BlockDiagonal& left() const noexcept { return l_; }
  const BlockDiagonal& right() const noexcept { return r_; }

 private:
  static void check(const BlockDiagonal& bd, std::size_t k, BlockShape shape, const char* name) {
    if (bd.block_count() != k) {
      throw dimension_error(std::string("GSMatrix: ") + name + " has " + std::to_string(bd.block_count()) +
                            " blocks, expected " + std::to_string(k));
    }
    for (std::size_t i = 0; i < k; ++i) {
      if (bd.block(i).rows() != shape.rows || bd.block(i).cols() != shape.cols) {
        throw dimension_error(std::string("GSMatrix: ") + name + " block " + std::to_string(i) +
                              " has the wrong shape");
      }
    }
  }

  GSClassSpec spec_;
  BlockDiagonal l_;
  BlockDiagonal r_;
};

inline GSMatrix zero_gs_matrix(const GSClassSpec& spec) {
  return GSMatrix(spec, BlockDiagonal::zeros(spec.k_l, spec.b_l.rows, spec.b_l.cols),
                  BlockDiagonal::zeros(spec.k_r, spec.b_r.rows, spec.b_r.cols));
}

/// y = P_L L P R P_R x in O(k_L b_L^1 b_L^2 + k_R b_R^1 b_R^2 + m + n + s).
inline Vector apply(const GSMatrix& a, std::span<const double> x) {
  const GSClassSpec& sp = a.spec();
  if (x.size() != sp.n) {
    throw dimension_error("GS apply: expected length " + std::to_string(sp.n) + ", got " + std::to_string(x.size()));
  }
  Vector t = gsmat::apply(sp.p_r, x);
  t = gsmat::apply(a.right(), t);
  t = gsmat::apply(sp.p, t);
  t = gsmat::apply(a.left(), t);
  return gsmat::apply(sp.p_l, t);
}

/// x = A^T y.
inline Vector apply_transpose(const GSMatrix& a, std::span<const double> y) {
  const GSClassSpec& sp = a.spec();
  if (y.size() != sp.m) {
    throw dimension_error("GS apply_transpose: expected length " + std::to_string(sp.m) + ", got " +
                          std::to_string(y.size()));
  }
  Vector t = gsmat::apply_transpose(sp.p_l, y);
  t = gsmat::apply_transpose(a.left(), t);
  t = gsmat::apply_transpose(sp.p, t);
  t = gsmat::apply_transpose(a.right(), t);
  return gsmat::apply_transpose(sp.p_r, t);
}

/// Applies to each column of x (n x batch).
inline Matrix apply(const GSMatrix& a, const Matrix& x) {
  const GSClassSpec& sp = a.spec();
  if (x.rows() != sp.n) throw dimension_error("GS batched apply: row count mismatch");
  Matrix t = permute_rows(sp.p_r, x);
  t = gsmat::apply(a.right(), t);
  t = permute_rows(sp.p, t);
  t = gsmat::apply(a.left(), t);
  return permute_rows(sp.p_l, t);
}

/// The inner product L P R (outer permutations dropped).
inline Matrix inner_dense(const GSMatrix& a) {
  return as_dense(a.left()) * permute_rows(a.spec().p, as_dense(a.right()));
}

inline Matrix as_dense(const GSMatrix& a) {
  const GSClassSpec& sp = a.spec();
  return permute_cols(permute_rows(sp.p_l, inner_dense(a)), sp.p_r);
}

/// k_L x k_R counts of rank-one terms routed into each block of L P R.
struct BlockRankMap {
  std::size_t k_l = 0, k_r = 0;
  std::vector<std::size_t> ranks;  // row-major k_l x k_r

  std::size_t operator()(std::size_t k1, std::size_t k2) const noexcept { return ranks[k1 * k_r + k2]; }
  std::size_t total() const noexcept {
    std::size_t t = 0;
    for (std::size_t r : ranks) t += r;
    return t;
  }
};

/// Index i of the inner dimension connects row i of R (block i / b_R^1) to
/// column sigma(i) of L (block sigma(i) / b_L^2).
inline BlockRankMap block_rank_map(const GSClassSpec& spec) {
  spec.validate();
  BlockRankMap map{spec.k_l, spec.k_r, std::vector<std::size_t>(spec.k_l * spec.k_r, 0)};
  for (std::size_t i = 0; i < spec.s; ++i) {
    const std::size_t k1 = spec.p[i] / spec.b_l.cols;
    const std::size_t k2 = i / spec.b_r.rows;
    ++map.ranks[k1 * spec.k_r + k2];
  }
  return map;
}

/// Inner indices i routed into block (k1, k2), ascending.
inline std::vector<std::size_t> routed_indices(const GSClassSpec& spec, std::size_t k1, std::size_t k2) {
  std::vector<std::size_t> out;
  for (std::size_t i = k2 * spec.b_r.rows; i < (k2 + 1) * spec.b_r.rows; ++i)
    if (spec.p[i] / spec.b_l.cols == k1) out.push_back(i);
  return out;
}

/// Block (k1, k2) of L P R written as U V^T; column t of U is the L column
/// u_{sigma(i_t)}, column t of V the R row v_{i_t}.
struct BlockFactor {
  std::size_t k1 = 0, k2 = 0;
  std::vector<std::size_t> routes;
  Matrix u;  // b_L^1 x rank
  Matrix v;  // b_R^2 x rank
};

inline std::vector<BlockFactor> to_block_lowrank(const GSMatrix& a) {
  const GSClassSpec& sp = a.spec();
  if (!sp.p_l.is_identity() || !sp.p_r.is_identity()) {
    throw std::invalid_argument(
        "to_block_lowrank: outer permutations must be identity; conjugate them away first "
        "(work with P_L^T A P_R^T)");
  }
  std::vector<BlockFactor> out;
  for (std::size_t k1 = 0; k1 < sp.k_l; ++k1) {
    const Matrix& lb = a.left().block(k1);
    for (std::size_t k2 = 0; k2 < sp.k_r; ++k2) {
      const Matrix& rb = a.right().block(k2);
      BlockFactor f{k1, k2, routed_indices(sp, k1, k2), {}, {}};
      f.u = Matrix(sp.b_l.rows, f.routes.size());
      f.v = Matrix(sp.b_r.cols, f.routes.size());
      for (std::size_t t = 0; t < f.routes.size(); ++t) {
        const std::size_t i = f.routes[t];
        const std::size_t lcol = sp.p[i] - k1 * sp.b_l.cols;
        const std::size_t rrow = i - k2 * sp.b_r.rows;
        for (std::size_t a_ = 0; a_ < sp.b_l.rows; ++a_) f.u(a_, t) = lb(a_, lcol);
        for (std::size_t b_ = 0; b_ < sp.b_r.cols; ++b_) f.v(b_, t) = rb(rrow, b_);
      }
      out.push_back(std::move(f));
    }
  }
  return out;
}

/// Reassembles an m x n matrix from block factors.
inline Matrix assemble_block_lowrank(const GSClassSpec& spec, const std::vector<BlockFactor>& factors) {
  Matrix out(spec.m, spec.n);
  for (const BlockFactor& f : factors)
    set_submatrix(out, f.k1 * spec.b_l.rows, f.k2 * spec.b_r.cols, f.u * transpose(f.v));
  return out;
}

struct Projection {
  GSMatrix matrix;
  /// Sum over blocks of the discarded squared singular values.
  double tail_squared = 0.0;
};

/// Frobenius-nearest member of the class: per block of P_L^T A P_R^T, a
/// truncated SVD to the rank fixed by P, split as U_r S_r^{1/2} into L and
/// S_r^{1/2} V_r^T into R.
inline Projection project_with_residual(const Matrix& a, const GSClassSpec& spec) {
  spec.validate();
  if (a.rows() != spec.m || a.cols() != spec.n) {
    throw dimension_error("project: input is " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                          ", class is " + std::to_string(spec.m) + "x" + std::to_string(spec.n));
  }
  // P_L^T A P_R^T
  const Matrix inner = permute_cols_transpose(permute_rows_transpose(spec.p_l, a), spec.p_r);

  BlockDiagonal l = BlockDiagonal::zeros(spec.k_l, spec.b_l.rows, spec.b_l.cols);
  BlockDiagonal r = BlockDiagonal::zeros(spec.k_r, spec.b_r.rows, spec.b_r.cols);
  double tail = 0.0;

  for (std::size_t k1 = 0; k1 < spec.k_l; ++k1) {
    for (std::size_t k2 = 0; k2 < spec.k_r; ++k2) {
      const Matrix blk = submatrix(inner, k1 * spec.b_l.rows, k2 * spec.b_r.cols, spec.b_l.rows, spec.b_r.cols);
      const std::vector<std::size_t> routes = routed_indices(spec, k1, k2);
      const Svd svd = svd_small(blk);
      const std::size_t keep = std::min(routes.size(), svd.s.size());
      for (std::size_t j = keep; j < svd.s.size(); ++j) tail += svd.s[j] * svd.s[j];

      Matrix& lb = l.block(k1);
      Matrix& rb = r.block(k2);
      for (std::size_t t = 0; t < keep; ++t) {
        const std::size_t i = routes[t];
        const std::size_t lcol = spec.p[i] - k1 * spec.b_l.cols;
        const std::size_t rrow = i - k2 * spec.b_r.rows;
        const double root = std::sqrt(svd.s[t]);
        for (std::size_t x = 0; x < spec.b_l.rows; ++x) lb(x, lcol) = svd.u(x, t) * root;
        for (std::size_t y = 0; y < spec.b_r.cols; ++y) rb(rrow, y) = root * svd.v(y, t);
      }
      // routes beyond the block's attainable rank stay zero
    }
  }
  return Projection{GSMatrix(spec, std::move(l), std::move(r)), tail};
}

inline GSMatrix project(const Matrix& a, const GSClassSpec& spec) { return project_with_residual(a, spec).matrix; }

}  // namespace gsmat
