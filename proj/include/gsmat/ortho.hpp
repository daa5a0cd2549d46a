#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "gsmat/blockdiag.hpp"
#include "gsmat/error.hpp"
#include "gsmat/gs.hpp"
#include "gsmat/linalg.hpp"
#include "gsmat/matrix.hpp"

namespace gsmat {

struct OrthogonalityCheck {
  bool ok = false;
  double residual = 0.0;  // ||M^T M - I||_F
};

inline OrthogonalityCheck is_orthogonal(const Matrix& m, double tol) {
  if (!m.is_square()) throw dimension_error("is_orthogonal: matrix must be square");
  const double res = frobenius_norm(transpose(m) * m - Matrix::identity(m.rows()));
  return {res <= tol, res};
}

/// Skew generators for the L and R blocks of a square, square-blocked GS class.
struct OrthoGSParams {
  GSClassSpec spec;
  SkewGenerators gen_l;
  SkewGenerators gen_r;

  void validate() const {
    spec.validate();
    if (!spec.is_square_blocked()) throw dimension_error("OrthoGSParams: class must be square with square blocks");
    auto check = [](const SkewGenerators& g, std::size_t k, std::size_t b, const char* name) {
      if (g.size() != k) throw dimension_error(std::string("OrthoGSParams: ") + name + " generator count mismatch");
      for (const Matrix& a : g.gens)
        if (a.rows() != b || a.cols() != b) throw dimension_error(std::string("OrthoGSParams: ") + name + " generator shape mismatch");
    };
    check(gen_l, spec.k_l, spec.b_l.rows, "L");
    check(gen_r, spec.k_r, spec.b_r.rows, "R");
  }

  std::size_t parameter_count() const noexcept {
    std::size_t n = 0;
    for (const Matrix& a : gen_l.gens) n += a.rows() * a.cols();
    for (const Matrix& a : gen_r.gens) n += a.rows() * a.cols();
    return n;
  }
};

/// All-zero generators; every block materializes to the identity.
inline OrthoGSParams zero_params(const GSClassSpec& spec) {
  OrthoGSParams p{spec, SkewGenerators::zeros(spec.k_l, spec.b_l.rows), SkewGenerators::zeros(spec.k_r, spec.b_r.rows)};
  p.validate();
  return p;
}

inline GSMatrix materialize(const OrthoGSParams& p) {
  p.validate();
  return GSMatrix(p.spec, cayley_blockdiag(p.gen_l), cayley_blockdiag(p.gen_r));
}

namespace detail {

// Replaces near-zero rows of a square block with an orthonormal completion
// of the remaining rows.
inline void complete_rows(Matrix& blk, double tol) {
  const std::size_t b = blk.rows();
  std::vector<bool> kept(b);
  for (std::size_t i = 0; i < b; ++i) kept[i] = norm2(blk.row(i)) > tol;
  for (std::size_t i = 0; i < b; ++i) {
    if (kept[i]) continue;
    bool done = false;
    for (std::size_t e = 0; e < b && !done; ++e) {
      Vector cand(b, 0.0);
      cand[e] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t j = 0; j < b; ++j) {
          if (!kept[j]) continue;
          const double pr = dot(blk.row(j), cand);
          for (std::size_t c = 0; c < b; ++c) cand[c] -= pr * blk(j, c);
        }
      }
      const double nrm = norm2(cand);
      if (nrm > 0.5) {
        for (std::size_t c = 0; c < b; ++c) blk(i, c) = cand[c] / nrm;
        kept[i] = true;
        done = true;
      }
    }
    if (!done) throw numerical_error("orthogonalize_representation: could not complete block rows");
  }
}

}  // namespace detail

/// Rebuilds an orthogonal GS matrix so that every block of L and R is
/// orthogonal while the dense product is unchanged.
///
/// Each block A_ij of L P R gets a skeleton A_ij = U_ij V_ij^T with U_ij
/// orthonormal, taken from a column-pivoted QR of the block truncated to the
/// structural rank. U's are repacked into L and V's into R along the routes
/// of P; orthogonality of A then forces the repacked blocks to be orthogonal.
inline GSMatrix orthogonalize_representation(const GSMatrix& a, double input_tol = 1e-8) {
  const GSClassSpec& sp = a.spec();
  if (!sp.is_square_blocked()) throw dimension_error("orthogonalize_representation: class must be square with square blocks");
  const OrthogonalityCheck chk = is_orthogonal(as_dense(a), input_tol);
  if (!chk.ok) {
    throw std::invalid_argument("orthogonalize_representation: input is not orthogonal, ||A^T A - I||_F = " +
                                std::to_string(chk.residual));
  }

  const Matrix inner = inner_dense(a);
  const std::size_t bl = sp.b_l.rows;
  const std::size_t br = sp.b_r.rows;
  BlockDiagonal l = BlockDiagonal::zeros(sp.k_l, bl, bl);
  BlockDiagonal r = BlockDiagonal::zeros(sp.k_r, br, br);
  const double block_tol = 1e-8 * std::max(1.0, frobenius_norm(inner));

  for (std::size_t k1 = 0; k1 < sp.k_l; ++k1) {
    for (std::size_t k2 = 0; k2 < sp.k_r; ++k2) {
      const std::vector<std::size_t> routes = routed_indices(sp, k1, k2);
      const std::size_t rank = routes.size();
      if (rank == 0) continue;
      const Matrix blk = submatrix(inner, k1 * bl, k2 * br, bl, br);
      const PivotedQr qr = qr_pivoted(blk);
      if (rank > bl) throw numerical_error("orthogonalize_representation: structural rank exceeds block size");
      Matrix u = submatrix(qr.q, 0, 0, bl, rank);
      Matrix v = transpose(blk) * u;  // br x rank
      const double err = frobenius_norm(blk - u * transpose(v));
      if (err > block_tol) {
        throw numerical_error("orthogonalize_representation: block (" + std::to_string(k1) + "," +
                              std::to_string(k2) + ") has rank above its routed rank " + std::to_string(rank) +
                              " (residual " + std::to_string(err) + ")");
      }
      for (std::size_t t = 0; t < rank; ++t) {
        const std::size_t i = routes[t];
        const std::size_t lcol = sp.p[i] - k1 * bl;
        const std::size_t rrow = i - k2 * br;
        for (std::size_t x = 0; x < bl; ++x) l.block(k1)(x, lcol) = u(x, t);
        for (std::size_t y = 0; y < br; ++y) r.block(k2)(rrow, y) = v(y, t);
      }
    }
  }
  for (std::size_t k = 0; k < sp.k_r; ++k) detail::complete_rows(r.block(k), 1e-6);
  return GSMatrix(sp, std::move(l), std::move(r));
}

}  // namespace gsmat
