#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <random>
#include <vector>

#include "gsmat/blockdiag.hpp"
#include "gsmat/matrix.hpp"
#include "gsmat/ortho.hpp"
#include "gsmat/perm.hpp"

namespace gsmat {

using Rng = std::mt19937_64;

inline Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = dist(rng);
  return m;
}

inline Vector random_vector(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Vector v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

inline Permutation random_permutation(Rng& rng, std::size_t n) {
  std::vector<std::size_t> s(n);
  std::iota(s.begin(), s.end(), 0);
  std::shuffle(s.begin(), s.end(), rng);
  return Permutation(std::move(s));
}

inline BlockDiagonal random_blockdiag(Rng& rng, std::size_t k, std::size_t rows, std::size_t cols, double lo = -1.0,
                                      double hi = 1.0) {
  std::vector<Matrix> blocks;
  for (std::size_t i = 0; i < k; ++i) blocks.push_back(random_matrix(rng, rows, cols, lo, hi));
  return BlockDiagonal(std::move(blocks));
}

inline SkewGenerators random_generators(Rng& rng, std::size_t k, std::size_t b, double scale = 1.0) {
  SkewGenerators g;
  for (std::size_t i = 0; i < k; ++i) g.gens.push_back(random_matrix(rng, b, b, -scale, scale));
  return g;
}

/// Generators with entries uniform in [-scale, scale] for every block.
inline OrthoGSParams random_ortho_params(Rng& rng, const GSClassSpec& spec, double scale = 1.0) {
  OrthoGSParams p{spec, random_generators(rng, spec.k_l, spec.b_l.rows, scale),
                  random_generators(rng, spec.k_r, spec.b_r.rows, scale)};
  p.validate();
  return p;
}

}  // namespace gsmat
