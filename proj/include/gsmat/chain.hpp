#pragma once

// Higher-order products P_{m+1} B_m P_m ... B_1 P_1, their support
// structure, and parameter/FLOP accounting.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gsmat/blockdiag.hpp"
#include "gsmat/error.hpp"
#include "gsmat/gs.hpp"
#include "gsmat/matrix.hpp"
#include "gsmat/perm.hpp"

namespace gsmat {

struct ChainFactor {
  BlockDiagonal blocks;  // B_i
  Permutation perm;      // P_i, applied before B_i
};

class GSChain {
 public:
  GSChain(std::vector<ChainFactor> factors, Permutation out) : factors_(std::move(factors)), out_(std::move(out)) {
    if (factors_.empty()) throw dimension_error("GSChain: at least one factor is required");
    for (std::size_t i = 0; i < factors_.size(); ++i) {
      const ChainFactor& f = factors_[i];
      if (f.perm.size() != f.blocks.cols()) {
        throw dimension_error("GSChain: factor " + std::to_string(i + 1) + " permutation has dimension " +
                              std::to_string(f.perm.size()) + " but its blocks take " +
                              std::to_string(f.blocks.cols()) + " inputs");
      }
      if (i > 0 && factors_[i - 1].blocks.rows() != f.blocks.cols()) {
        throw dimension_error("GSChain: dimension mismatch at boundary " + std::to_string(i) + "|" +
                              std::to_string(i + 1) + ": " + std::to_string(factors_[i - 1].blocks.rows()) +
                              " outputs vs " + std::to_string(f.blocks.cols()) + " inputs");
      }
    }
    if (out_.size() != factors_.back().blocks.rows()) {
      throw dimension_error("GSChain: output permutation has dimension " + std::to_string(out_.size()) +
                            ", expected " + std::to_string(factors_.back().blocks.rows()));
    }
  }

  /// A GS matrix P_L L P R P_R as the two-factor chain (P_R, R), (P, L) with output P_L.
  static GSChain from_gs(const GSMatrix& a) {
    const GSClassSpec& sp = a.spec();
    return GSChain({{a.right(), sp.p_r}, {a.left(), sp.p}}, sp.p_l);
  }

  const std::vector<ChainFactor>& factors() const noexcept { return factors_; }
  const Permutation& out_perm() const noexcept { return out_; }
  std::size_t input_dim() const noexcept { return factors_.front().perm.size(); }
  std::size_t output_dim() const noexcept { return out_.size(); }

  std::size_t parameter_count() const noexcept {
    std::size_t n = 0;
    for (const ChainFactor& f : factors_) n += f.blocks.parameter_count();
    return n;
  }

 private:
  std::vector<ChainFactor> factors_;
  Permutation out_;
};

inline Vector apply(const GSChain& c, std::span<const double> x) {
  if (x.size() != c.input_dim()) {
    throw dimension_error("chain apply: expected length " + std::to_string(c.input_dim()) + ", got " +
                          std::to_string(x.size()));
  }
  Vector t(x.begin(), x.end());
  for (const ChainFactor& f : c.factors()) t = gsmat::apply(f.blocks, gsmat::apply(f.perm, t));
  return gsmat::apply(c.out_perm(), t);
}

inline Matrix as_dense(const GSChain& c) {
  Matrix acc = Matrix::identity(c.input_dim());
  for (const ChainFactor& f : c.factors()) acc = as_dense(f.blocks) * permute_rows(f.perm, acc);
  return permute_rows(c.out_perm(), acc);
}

/// Which entries of a product class can be nonzero: (i, j) is set iff a
/// path leads from input j to output i in the information transmission
/// graph of the factors.
class SupportMask {
 public:
  SupportMask(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), bits_(rows * cols, 0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool operator()(std::size_t i, std::size_t j) const noexcept { return bits_[i * cols_ + j] != 0; }
  void set(std::size_t i, std::size_t j, bool v = true) noexcept { bits_[i * cols_ + j] = v ? 1 : 0; }

  std::size_t zero_count() const noexcept {
    std::size_t z = 0;
    for (std::uint8_t b : bits_) z += (b == 0);
    return z;
  }
  std::size_t nonzero_count() const noexcept { return bits_.size() - zero_count(); }
  bool dense() const noexcept { return zero_count() == 0; }

  std::span<std::uint8_t> row(std::size_t i) noexcept { return {bits_.data() + i * cols_, cols_}; }
  std::span<const std::uint8_t> row(std::size_t i) const noexcept { return {bits_.data() + i * cols_, cols_}; }

  bool operator==(const SupportMask&) const = default;

 private:
  std::size_t rows_, cols_;
  std::vector<std::uint8_t> bits_;
};

namespace detail {

inline SupportMask permute_mask_rows(const Permutation& p, const SupportMask& m) {
  SupportMask out(m.rows(), m.cols());
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto src = m.row(i);
    auto dst = out.row(p[i]);
    std::copy(src.begin(), src.end(), dst.begin());
  }
  return out;
}

// Output row a of block t reaches whatever any input row of block t reaches.
inline SupportMask block_mask_product(std::span<const BlockShape> shapes, const SupportMask& m) {
  std::size_t rows = 0;
  for (const BlockShape& s : shapes) rows += s.rows;
  SupportMask out(rows, m.cols());
  std::size_t ro = 0, co = 0;
  std::vector<std::uint8_t> acc(m.cols());
  for (const BlockShape& s : shapes) {
    std::fill(acc.begin(), acc.end(), 0);
    for (std::size_t c = co; c < co + s.cols; ++c) {
      auto r = m.row(c);
      for (std::size_t j = 0; j < acc.size(); ++j) acc[j] |= r[j];
    }
    for (std::size_t a = ro; a < ro + s.rows; ++a) std::copy(acc.begin(), acc.end(), out.row(a).begin());
    ro += s.rows;
    co += s.cols;
  }
  return out;
}

inline SupportMask propagate(const std::vector<std::vector<BlockShape>>& layers, const std::vector<Permutation>& perms,
                             const Permutation& out) {
  const std::size_t d = perms.front().size();
  SupportMask m(d, d);
  for (std::size_t i = 0; i < d; ++i) m.set(i, i);
  for (std::size_t k = 0; k < layers.size(); ++k) m = block_mask_product(layers[k], permute_mask_rows(perms[k], m));
  return permute_mask_rows(out, m);
}

}  // namespace detail

/// Support of the class with m factors of r blocks of size b x b.
/// `perms` holds P_1, ..., P_{m+1} (the last one is the output permutation).
inline SupportMask support_mask(std::size_t b, std::size_t r, const std::vector<Permutation>& perms, std::size_t m) {
  const std::size_t d = b * r;
  if (b == 0 || r == 0) throw dimension_error("support_mask: b and r must be positive");
  if (perms.size() != m + 1) {
    throw dimension_error("support_mask: expected " + std::to_string(m + 1) + " permutations, got " +
                          std::to_string(perms.size()));
  }
  for (const Permutation& p : perms)
    if (p.size() != d) throw dimension_error("support_mask: permutation dimension must be b*r = " + std::to_string(d));
  const std::vector<std::vector<BlockShape>> layers(m, std::vector<BlockShape>(r, BlockShape{b, b}));
  const std::vector<Permutation> inner(perms.begin(), perms.begin() + static_cast<std::ptrdiff_t>(m));
  if (m == 0) {
    SupportMask mask(d, d);
    for (std::size_t j = 0; j < d; ++j) mask.set(perms[0][j], j);
    return mask;
  }
  return detail::propagate(layers, inner, perms.back());
}

/// Support implied by the block structure of an existing chain.
inline SupportMask support_mask(const GSChain& c) {
  std::vector<std::vector<BlockShape>> layers;
  std::vector<Permutation> perms;
  for (const ChainFactor& f : c.factors()) {
    std::vector<BlockShape> shapes;
    for (const Matrix& blk : f.blocks.blocks()) shapes.push_back({blk.rows(), blk.cols()});
    layers.push_back(std::move(shapes));
    perms.push_back(f.perm);
  }
  return detail::propagate(layers, perms, c.out_perm());
}

/// Permutations P_1..P_{m+1} of the dense-forming chain: identity outside,
/// P_(r, br) between consecutive block-diagonal factors.
inline std::vector<Permutation> stride_chain_perms(std::size_t b, std::size_t r, std::size_t m) {
  const std::size_t d = b * r;
  std::vector<Permutation> perms;
  perms.push_back(Permutation::identity(d));
  for (std::size_t i = 1; i < m; ++i) perms.push_back(stride_perm(r, d));
  perms.push_back(Permutation::identity(d));
  return perms;
}

/// 1 + ceil(log_b r): factors needed for r blocks of size b to reach a dense matrix.
inline std::size_t min_factors_dense(std::size_t b, std::size_t r) {
  if (b < 2) throw std::invalid_argument("min_factors_dense: block size must be at least 2, got " + std::to_string(b));
  if (r < 1) throw std::invalid_argument("min_factors_dense: block count must be positive");
  std::size_t e = 0;
  for (std::size_t reach = 1; reach < r; reach *= b) ++e;
  return 1 + e;
}

/// 1 + ceil(log_2 r) for block butterfly products.
inline std::size_t butterfly_factors(std::size_t r) { return min_factors_dense(2, r); }

/// Entries in m block-diagonal factors of r blocks of size b x b.
inline std::uint64_t param_count(std::uint64_t b, std::uint64_t r, std::uint64_t m) { return m * r * b * b; }

/// Multiply-adds for applying the m factors to `batch` vectors; permutations are free.
inline std::uint64_t flop_count(std::uint64_t b, std::uint64_t r, std::uint64_t m, std::uint64_t batch = 1) {
  return batch * m * r * b * b;
}

/// Monarch coupling: k_L = b_R^1 and k_R = b_L^2.
inline bool monarch_member(const GSClassSpec& spec) {
  spec.validate();
  return spec.k_l == spec.b_r.rows && spec.k_r == spec.b_l.cols;
}

}  // namespace gsmat
