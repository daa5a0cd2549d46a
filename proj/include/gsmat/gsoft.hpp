#pragma once

// Orthogonal fine-tuning adapters built on GS(P^T, P, I):
//   GSOFT:        y = scale * (Q W0)^T x
//   Double GSOFT: y = scale * (Q_U W0 Q_V)^T x

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gsmat/blockdiag.hpp"
#include "gsmat/error.hpp"
#include "gsmat/gs.hpp"
#include "gsmat/matrix.hpp"
#include "gsmat/ortho.hpp"

namespace gsmat {

struct GSOFTAdapter {
  Matrix w0;  // frozen, d x n
  OrthoGSParams q;
  double scale = 1.0;
};

struct DoubleGSOFTAdapter {
  Matrix w0;  // frozen, d x n
  OrthoGSParams q_u;  // over d
  OrthoGSParams q_v;  // over n
  double scale = 1.0;
};

/// Identity-initialized adapter with blocks of size `block` over d = w0.rows().
inline GSOFTAdapter make_gsoft_adapter(Matrix w0, std::size_t block) {
  const std::size_t d = w0.rows();
  if (block == 0 || d % block != 0) {
    throw dimension_error("GSOFT: block size " + std::to_string(block) + " does not divide d = " + std::to_string(d));
  }
  OrthoGSParams q = zero_params(gsoft_spec(d, block));
  return GSOFTAdapter{std::move(w0), std::move(q), 1.0};
}

inline DoubleGSOFTAdapter make_double_gsoft_adapter(Matrix w0, std::size_t block_u, std::size_t block_v) {
  const std::size_t d = w0.rows(), n = w0.cols();
  if (block_u == 0 || d % block_u != 0) {
    throw dimension_error("Double GSOFT: block size " + std::to_string(block_u) + " does not divide d = " + std::to_string(d));
  }
  if (block_v == 0 || n % block_v != 0) {
    throw dimension_error("Double GSOFT: block size " + std::to_string(block_v) + " does not divide n = " + std::to_string(n));
  }
  return DoubleGSOFTAdapter{std::move(w0), zero_params(gsoft_spec(d, block_u)), zero_params(gsoft_spec(n, block_v)), 1.0};
}

namespace detail {

inline void check_adapter(const Matrix& w0, const OrthoGSParams& q, std::size_t side, const char* what) {
  q.validate();
  if (q.spec.n != side) {
    throw dimension_error(std::string(what) + ": orthogonal factor has dimension " + std::to_string(q.spec.n) +
                          ", expected " + std::to_string(side));
  }
  (void)w0;
}

}  // namespace detail

inline Vector forward(const GSOFTAdapter& a, std::span<const double> x) {
  detail::check_adapter(a.w0, a.q, a.w0.rows(), "GSOFT forward");
  if (x.size() != a.w0.rows()) {
    throw dimension_error("GSOFT forward: expected input length " + std::to_string(a.w0.rows()) + ", got " +
                          std::to_string(x.size()));
  }
  const Vector qt_x = gsmat::apply_transpose(materialize(a.q), x);
  Vector y = transpose(a.w0) * qt_x;
  for (double& v : y) v *= a.scale;
  return y;
}

inline Vector forward(const DoubleGSOFTAdapter& a, std::span<const double> x) {
  detail::check_adapter(a.w0, a.q_u, a.w0.rows(), "Double GSOFT forward");
  detail::check_adapter(a.w0, a.q_v, a.w0.cols(), "Double GSOFT forward");
  if (x.size() != a.w0.rows()) {
    throw dimension_error("Double GSOFT forward: expected input length " + std::to_string(a.w0.rows()) + ", got " +
                          std::to_string(x.size()));
  }
  const Vector t = transpose(a.w0) * gsmat::apply_transpose(materialize(a.q_u), x);
  Vector y = gsmat::apply_transpose(materialize(a.q_v), t);
  for (double& v : y) v *= a.scale;
  return y;
}

inline Vector forward_double(const DoubleGSOFTAdapter& a, std::span<const double> x) { return forward(a, x); }

/// scale * Q W0; forward(a, x) == merge(a)^T x.
inline Matrix merge(const GSOFTAdapter& a) {
  detail::check_adapter(a.w0, a.q, a.w0.rows(), "GSOFT merge");
  return a.scale * gsmat::apply(materialize(a.q), a.w0);
}

/// scale * Q_U W0 Q_V.
inline Matrix merge(const DoubleGSOFTAdapter& a) {
  detail::check_adapter(a.w0, a.q_u, a.w0.rows(), "Double GSOFT merge");
  detail::check_adapter(a.w0, a.q_v, a.w0.cols(), "Double GSOFT merge");
  const Matrix left = gsmat::apply(materialize(a.q_u), a.w0);
  // (Q_U W0) Q_V = (Q_V^T (Q_U W0)^T)^T
  const GSMatrix qv = materialize(a.q_v);
  Matrix out(left.rows(), left.cols());
  for (std::size_t i = 0; i < left.rows(); ++i) {
    const Vector r = gsmat::apply_transpose(qv, left.row(i));
    for (std::size_t j = 0; j < r.size(); ++j) out(i, j) = a.scale * r[j];
  }
  return out;
}

struct OrthoGradient {
  SkewGenerators gen_l;
  SkewGenerators gen_r;
};

/// Generator gradients for a loss whose gradient with respect to the dense
/// Q = P_L L P R P_R is G.
inline OrthoGradient ortho_backward(const OrthoGSParams& p, const Matrix& grad_q) {
  const GSMatrix q = materialize(p);
  const GSClassSpec& sp = p.spec;
  // dQ = P_L dL (P R P_R) + (P_L L P) dR P_R
  const Matrix right_part = permute_cols(permute_rows(sp.p, as_dense(q.right())), sp.p_r);  // P R P_R
  const Matrix left_part = permute_rows(sp.p_l, permute_cols(as_dense(q.left()), sp.p));    // P_L L P
  const Matrix g_l = permute_rows_transpose(sp.p_l, grad_q) * transpose(right_part);
  const Matrix g_r = transpose(left_part) * permute_cols_transpose(grad_q, sp.p_r);

  OrthoGradient out{SkewGenerators::zeros(sp.k_l, sp.b_l.rows), SkewGenerators::zeros(sp.k_r, sp.b_r.rows)};
  for (std::size_t k = 0; k < sp.k_l; ++k) {
    const std::size_t o = k * sp.b_l.rows;
    out.gen_l.gens[k] = cayley_vjp(p.gen_l.gens[k], submatrix(g_l, o, o, sp.b_l.rows, sp.b_l.rows));
  }
  for (std::size_t k = 0; k < sp.k_r; ++k) {
    const std::size_t o = k * sp.b_r.rows;
    out.gen_r.gens[k] = cayley_vjp(p.gen_r.gens[k], submatrix(g_r, o, o, sp.b_r.rows, sp.b_r.rows));
  }
  return out;
}

namespace detail {

// Gradient for a rank-one G = a b^T without materializing Q.
inline OrthoGradient ortho_backward_rank_one(const OrthoGSParams& p, std::span<const double> a,
                                             std::span<const double> b) {
  const GSMatrix q = materialize(p);
  const GSClassSpec& sp = p.spec;
  // G_L = (P_L^T a)(P R P_R b)^T,  G_R = (P^T L^T P_L^T a)(P_R b)^T, restricted to blocks.
  const Vector la = gsmat::apply_transpose(sp.p_l, a);
  const Vector pr_b = gsmat::apply(sp.p_r, b);
  const Vector rb = gsmat::apply(sp.p, gsmat::apply(q.right(), pr_b));
  const Vector ra = gsmat::apply_transpose(sp.p, gsmat::apply_transpose(q.left(), la));

  auto block_outer = [](std::span<const double> u, std::span<const double> v, std::size_t off, std::size_t bs) {
    Matrix g(bs, bs);
    for (std::size_t i = 0; i < bs; ++i)
      for (std::size_t j = 0; j < bs; ++j) g(i, j) = u[off + i] * v[off + j];
    return g;
  };
  OrthoGradient out{SkewGenerators::zeros(sp.k_l, sp.b_l.rows), SkewGenerators::zeros(sp.k_r, sp.b_r.rows)};
  for (std::size_t k = 0; k < sp.k_l; ++k) {
    const std::size_t o = k * sp.b_l.rows;
    out.gen_l.gens[k] = cayley_vjp(p.gen_l.gens[k], block_outer(la, rb, o, sp.b_l.rows));
  }
  for (std::size_t k = 0; k < sp.k_r; ++k) {
    const std::size_t o = k * sp.b_r.rows;
    out.gen_r.gens[k] = cayley_vjp(p.gen_r.gens[k], block_outer(ra, pr_b, o, sp.b_r.rows));
  }
  return out;
}

}  // namespace detail

struct GSOFTGradient {
  OrthoGradient q;
  double scale = 0.0;
};

/// Gradients of a loss with dL/dy = grad_out, y = forward(a, x).
inline GSOFTGradient backward(const GSOFTAdapter& a, std::span<const double> x, std::span<const double> grad_out) {
  detail::check_adapter(a.w0, a.q, a.w0.rows(), "GSOFT backward");
  if (x.size() != a.w0.rows() || grad_out.size() != a.w0.cols()) throw dimension_error("GSOFT backward: shape mismatch");
  // y = s W0^T Q^T x  =>  dL/dQ = s x (W0 g)^T,  dL/ds = <g, W0^T Q^T x>
  const Vector h = a.w0 * grad_out;
  Vector sx(x.begin(), x.end());
  for (double& v : sx) v *= a.scale;
  GSOFTGradient out{detail::ortho_backward_rank_one(a.q, sx, h), 0.0};
  const Vector base = transpose(a.w0) * gsmat::apply_transpose(materialize(a.q), x);
  out.scale = dot(grad_out, base);
  return out;
}

struct DoubleGSOFTGradient {
  OrthoGradient q_u;
  OrthoGradient q_v;
  double scale = 0.0;
};

inline DoubleGSOFTGradient backward(const DoubleGSOFTAdapter& a, std::span<const double> x,
                                    std::span<const double> grad_out) {
  detail::check_adapter(a.w0, a.q_u, a.w0.rows(), "Double GSOFT backward");
  detail::check_adapter(a.w0, a.q_v, a.w0.cols(), "Double GSOFT backward");
  if (x.size() != a.w0.rows() || grad_out.size() != a.w0.cols()) {
    throw dimension_error("Double GSOFT backward: shape mismatch");
  }
  const GSMatrix qu = materialize(a.q_u);
  const GSMatrix qv = materialize(a.q_v);
  // y = s Q_V^T W0^T Q_U^T x
  //   dL/dQ_U = s x (W0 Q_V g)^T,  dL/dQ_V = s (W0^T Q_U^T x) g^T
  const Vector w_qv_g = a.w0 * gsmat::apply(qv, grad_out);
  const Vector mid = transpose(a.w0) * gsmat::apply_transpose(qu, x);
  Vector sx(x.begin(), x.end());
  for (double& v : sx) v *= a.scale;
  Vector smid = mid;
  for (double& v : smid) v *= a.scale;
  DoubleGSOFTGradient out{detail::ortho_backward_rank_one(a.q_u, sx, w_qv_g),
                          detail::ortho_backward_rank_one(a.q_v, smid, grad_out), 0.0};
  out.scale = dot(grad_out, gsmat::apply_transpose(qv, mid));
  return out;
}

struct FitOptions {
  std::size_t steps = 2000;
  double lr = 0.05;
};

struct FitResult {
  OrthoGSParams params;
  std::vector<double> losses;      // loss before each step, then the final loss
  double max_orthogonality_residual = 0.0;
};

namespace detail {

inline void check_target(const Matrix& target, std::size_t d) {
  if (target.rows() != d || target.cols() != d) throw dimension_error("fit: target must be " + std::to_string(d) + "x" + std::to_string(d));
  const OrthogonalityCheck chk = is_orthogonal(target, 1e-8);
  if (!chk.ok) {
    throw std::invalid_argument("fit: target is not orthogonal, ||T^T T - I||_F = " + std::to_string(chk.residual));
  }
}

inline void descend(SkewGenerators& g, const SkewGenerators& grad, double lr) {
  for (std::size_t k = 0; k < g.size(); ++k) g.gens[k] = g.gens[k] - lr * grad.gens[k];
}

}  // namespace detail

/// Plain gradient descent on ||Q(theta) - target||_F^2 from zero generators.
/// Q stays orthogonal at every step because every block is a Cayley image.
inline FitResult fit_orthogonal_target(const GSClassSpec& spec, const Matrix& target, FitOptions opts = {}) {
  detail::check_target(target, spec.n);
  FitResult res{zero_params(spec), {}, 0.0};
  res.losses.reserve(opts.steps + 1);
  for (std::size_t step = 0; step <= opts.steps; ++step) {
    const Matrix q = as_dense(materialize(res.params));
    res.max_orthogonality_residual = std::max(res.max_orthogonality_residual, is_orthogonal(q, 0.0).residual);
    const Matrix diff = q - target;
    const double loss = frobenius_norm(diff) * frobenius_norm(diff);
    if (!std::isfinite(loss)) {
      throw numerical_error("fit_orthogonal_target: loss diverged at step " + std::to_string(step) +
                            "; try a smaller learning rate");
    }
    res.losses.push_back(loss);
    if (step == opts.steps) break;
    const OrthoGradient g = ortho_backward(res.params, 2.0 * diff);
    detail::descend(res.params.gen_l, g.gen_l, opts.lr);
    detail::descend(res.params.gen_r, g.gen_r, opts.lr);
  }
  return res;
}

struct BlockDiagonalFitResult {
  SkewGenerators gens;
  std::vector<double> losses;
  double max_orthogonality_residual = 0.0;
};

/// Ablation arm: a single Cayley block-diagonal factor (no shuffling).
inline BlockDiagonalFitResult fit_blockdiag_target(std::size_t block, const Matrix& target, FitOptions opts = {}) {
  const std::size_t d = target.rows();
  if (block == 0 || d % block != 0) throw dimension_error("fit_blockdiag_target: block size must divide d");
  detail::check_target(target, d);
  const std::size_t k = d / block;
  BlockDiagonalFitResult res{SkewGenerators::zeros(k, block), {}, 0.0};
  res.losses.reserve(opts.steps + 1);
  for (std::size_t step = 0; step <= opts.steps; ++step) {
    const BlockDiagonal bd = cayley_blockdiag(res.gens);
    const Matrix q = as_dense(bd);
    res.max_orthogonality_residual = std::max(res.max_orthogonality_residual, is_orthogonal(q, 0.0).residual);
    const Matrix diff = q - target;
    const double loss = frobenius_norm(diff) * frobenius_norm(diff);
    if (!std::isfinite(loss)) {
      throw numerical_error("fit_blockdiag_target: loss diverged at step " + std::to_string(step) +
                            "; try a smaller learning rate");
    }
    res.losses.push_back(loss);
    if (step == opts.steps) break;
    SkewGenerators grad = SkewGenerators::zeros(k, block);
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t o = i * block;
      grad.gens[i] = cayley_vjp(res.gens.gens[i], 2.0 * submatrix(diff, o, o, block, block));
    }
    detail::descend(res.gens, grad, opts.lr);
  }
  return res;
}

}  // namespace gsmat
