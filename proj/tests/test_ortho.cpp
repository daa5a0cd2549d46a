#include <gtest/gtest.h>

#include <cmath>

#include "gsmat/ortho.hpp"
#include "gsmat/random.hpp"
#include "test_util.hpp"

using namespace gsmat;
using gsmat::testing::determinant;
using gsmat::testing::max_abs_diff;
using gsmat::testing::random_square_spec;

namespace {

double max_block_residual(const GSMatrix& a) {
  double r = 0.0;
  for (const Matrix& b : a.left().blocks()) r = std::max(r, is_orthogonal(b, 0.0).residual);
  for (const Matrix& b : a.right().blocks()) r = std::max(r, is_orthogonal(b, 0.0).residual);
  return r;
}

}  // namespace

TEST(IsOrthogonal, IdentityAndScaled) {
  EXPECT_EQ(is_orthogonal(Matrix::identity(5), 0.0).residual, 0.0);
  const OrthogonalityCheck c = is_orthogonal(2.0 * Matrix::identity(4), 1.0);
  EXPECT_NEAR(c.residual, 3.0 * std::sqrt(4.0), 1e-14);
  EXPECT_FALSE(c.ok);
  EXPECT_THROW(is_orthogonal(Matrix(2, 3), 1.0), dimension_error);
}

TEST(Materialize, ZeroGeneratorsOnGsoftSpecIsIdentity) {
  for (auto [d, b] : {std::pair<std::size_t, std::size_t>{16, 4}, {12, 3}, {64, 8}, {8, 8}}) {
    const Matrix q = as_dense(materialize(zero_params(gsoft_spec(d, b))));
    EXPECT_LE(max_abs_diff(q, Matrix::identity(d)), 1e-15);
  }
}

TEST(Materialize, ZeroGeneratorsGivePermutationProduct) {
  Rng rng(1);
  const GSClassSpec spec = random_square_spec(rng, 12, 3, 4, true);
  const Matrix expected = as_dense(spec.p_l) * as_dense(spec.p) * as_dense(spec.p_r);
  EXPECT_EQ(as_dense(materialize(zero_params(spec))), expected);
}

TEST(Materialize, RandomGeneratorsAreOrthogonal) {
  Rng rng(2);
  const GSClassSpec spec = gsoft_spec(64, 8);
  for (int t = 0; t < 5; ++t) {
    const Matrix q = as_dense(materialize(random_ortho_params(rng, spec)));
    EXPECT_LE(is_orthogonal(q, 0.0).residual, 1e-11 * 64);
  }
}

TEST(Materialize, DeterminantSign) {
  Rng rng(3);
  // Cayley blocks lie in SO(b); the sign of det(Q) comes from the permutations only.
  for (int t = 0; t < 10; ++t) {
    const GSClassSpec spec = random_square_spec(rng, 8, 2, 4, true);
    const Matrix q = as_dense(materialize(random_ortho_params(rng, spec)));
    const double perm_sign = determinant(as_dense(spec.p_l)) * determinant(as_dense(spec.p)) * determinant(as_dense(spec.p_r));
    EXPECT_NEAR(std::abs(determinant(q)), 1.0, 1e-10);
    EXPECT_NEAR(determinant(q), perm_sign, 1e-10);
  }
  const Matrix q = as_dense(materialize(random_ortho_params(rng, gsoft_spec(16, 4))));
  EXPECT_NEAR(determinant(q), 1.0, 1e-10);
}

TEST(OrthoGSParams, RejectsBadShapes) {
  const GSClassSpec rect = make_gs_spec(2, {3, 2}, 2, {2, 3}, Permutation::identity(4));
  EXPECT_THROW(zero_params(rect), dimension_error);
  OrthoGSParams p = zero_params(gsoft_spec(8, 4));
  p.gen_l.gens.pop_back();
  EXPECT_THROW(p.validate(), dimension_error);
  EXPECT_EQ(zero_params(gsoft_spec(16, 4)).parameter_count(), 128u);
}

TEST(Orthogonalize, AlreadyOrthogonalBlocks) {
  Rng rng(4);
  const GSMatrix a = materialize(random_ortho_params(rng, gsoft_spec(16, 4)));
  const GSMatrix out = orthogonalize_representation(a);
  EXPECT_LE(max_abs_diff(as_dense(out), as_dense(a)), 1e-10);
  EXPECT_LE(max_block_residual(out), 1e-10);
}

TEST(Orthogonalize, ScaledRepresentation) {
  Rng rng(5);
  const GSClassSpec spec = gsoft_spec(16, 4);
  const GSMatrix a = materialize(random_ortho_params(rng, spec));
  BlockDiagonal l = a.left(), r = a.right();
  for (std::size_t k = 0; k < l.block_count(); ++k) l.block(k) = 3.0 * l.block(k);
  for (std::size_t k = 0; k < r.block_count(); ++k) r.block(k) = (1.0 / 3.0) * r.block(k);
  const GSMatrix scaled(spec, l, r);
  EXPECT_GT(max_block_residual(scaled), 1.0);
  const GSMatrix out = orthogonalize_representation(scaled);
  EXPECT_LE(max_abs_diff(as_dense(out), as_dense(a)), 1e-9);
  EXPECT_LE(max_block_residual(out), 1e-10);
}

TEST(Orthogonalize, GaugeTransformedRepresentation) {
  // Each route i carries u_{sigma(i)} v_i^T, so scaling column sigma(i) of L by c_i and
  // row i of R by 1/c_i leaves the product unchanged but breaks block orthogonality.
  Rng rng(6);
  std::uniform_real_distribution<double> dist(0.3, 3.0);
  for (int t = 0; t < 20; ++t) {
    const GSClassSpec spec = random_square_spec(rng, 16, 4, 4, t % 2 == 0);
    const GSMatrix a = materialize(random_ortho_params(rng, spec));
    BlockDiagonal l = a.left(), r = a.right();
    for (std::size_t i = 0; i < spec.s; ++i) {
      const double c = dist(rng);
      const std::size_t col = spec.p[i];
      Matrix& lb = l.block(col / 4);
      for (std::size_t x = 0; x < 4; ++x) lb(x, col % 4) *= c;
      Matrix& rb = r.block(i / 4);
      for (std::size_t y = 0; y < 4; ++y) rb(i % 4, y) /= c;
    }
    const GSMatrix gauged(spec, l, r);
    ASSERT_LE(max_abs_diff(as_dense(gauged), as_dense(a)), 1e-12);
    const GSMatrix out = orthogonalize_representation(gauged);
    EXPECT_LE(max_abs_diff(as_dense(out), as_dense(a)), 1e-9 * 16);
    EXPECT_LE(max_block_residual(out), 1e-10);
  }
}

TEST(Orthogonalize, RejectsNonOrthogonalInput) {
  Rng rng(7);
  const GSClassSpec spec = gsoft_spec(8, 4);
  const GSMatrix a(spec, random_blockdiag(rng, 2, 4, 4), random_blockdiag(rng, 2, 4, 4));
  try {
    orthogonalize_representation(a);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("||A^T A - I||_F"), std::string::npos);
  }
}
