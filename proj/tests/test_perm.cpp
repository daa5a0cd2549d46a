#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "gsmat/perm.hpp"
#include "gsmat/random.hpp"
#include "test_util.hpp"

using namespace gsmat;

namespace {

bool is_bijection(const Permutation& p) {
  std::vector<std::size_t> s = p.sigma();
  std::sort(s.begin(), s.end());
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s[i] != i) return false;
  return true;
}

}  // namespace

TEST(StridePerm, SmallCase) {
  EXPECT_EQ(stride_perm(2, 4).sigma(), (std::vector<std::size_t>{0, 2, 1, 3}));
}

TEST(StridePerm, KOneIsIdentity) {
  EXPECT_TRUE(stride_perm(1, 8).is_identity());
}

TEST(StridePerm, ThreeByTwelveEntries) {
  const Permutation p = stride_perm(3, 12);
  EXPECT_EQ(p[1], 4u);
  EXPECT_EQ(p[4], 5u);
  EXPECT_EQ(p[11], 11u);
}

TEST(StridePerm, RejectsNonDivisor) {
  try {
    stride_perm(3, 8);
    FAIL() << "expected invalid_argument";
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("k=3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("n=8"), std::string::npos) << msg;
  }
  EXPECT_THROW(stride_perm(0, 4), std::invalid_argument);
}

TEST(StridePerm, ReshapeTransposeFlatten) {
  // y[sigma(i)] = x[i] places x[i] at (i % k, i / k) of a k x (n/k) grid, which is
  // the transpose of the row-major (n/k) x k reshape of x.
  for (std::size_t n = 1; n <= 64; ++n) {
    for (std::size_t k = 1; k <= n; ++k) {
      if (n % k) continue;
      Vector x(n);
      std::iota(x.begin(), x.end(), 0.0);
      const std::size_t rows = n / k, cols = k;
      Vector expected;
      for (std::size_t c = 0; c < cols; ++c)
        for (std::size_t r = 0; r < rows; ++r) expected.push_back(x[r * cols + c]);
      EXPECT_EQ(gsmat::apply(stride_perm(k, n), x), expected) << "k=" << k << " n=" << n;

      // the k x (n/k) reshape-transpose is realized by the inverse
      Vector inv_expected;
      for (std::size_t c = 0; c < n / k; ++c)
        for (std::size_t r = 0; r < k; ++r) inv_expected.push_back(x[r * (n / k) + c]);
      EXPECT_EQ(gsmat::apply(invert(stride_perm(k, n)), x), inv_expected) << "k=" << k << " n=" << n;
    }
  }
}

TEST(PairedStridePerm, EightChannels) {
  EXPECT_EQ(paired_stride_perm(2, 8).sigma(), (std::vector<std::size_t>{0, 1, 4, 5, 2, 3, 6, 7}));
}

TEST(PairedStridePerm, SingleGroupIsIdentity) { EXPECT_TRUE(paired_stride_perm(1, 4).is_identity()); }

TEST(PairedStridePerm, KeepsPairsAdjacent) {
  for (std::size_t n = 2; n <= 64; n += 2) {
    for (std::size_t k = 1; 2 * k <= n; ++k) {
      if (n % (2 * k)) continue;
      const Permutation p = paired_stride_perm(k, n);
      ASSERT_TRUE(is_bijection(p));
      for (std::size_t t = 0; 2 * t < n; ++t) {
        EXPECT_EQ(p[2 * t] % 2, 0u);
        EXPECT_EQ(p[2 * t + 1], p[2 * t] + 1);
      }
    }
  }
}

TEST(PairedStridePerm, RejectsOddGroupSpan) {
  EXPECT_THROW(paired_stride_perm(2, 6), std::invalid_argument);
  EXPECT_THROW(paired_stride_perm(3, 9), std::invalid_argument);
}

TEST(Permutation, ConstructorValidates) {
  EXPECT_THROW(Permutation({0, 0, 1}), std::invalid_argument);
  EXPECT_THROW(Permutation({0, 3, 1}), std::invalid_argument);
  EXPECT_NO_THROW(Permutation({2, 0, 1}));
}

TEST(Permutation, ApplyScatters) {
  const Vector x{10, 20, 30, 40};
  EXPECT_EQ(gsmat::apply(stride_perm(2, 4), x), (Vector{10, 30, 20, 40}));
  EXPECT_EQ(gsmat::apply(Permutation::identity(4), x), x);
  EXPECT_THROW(gsmat::apply(stride_perm(2, 4), Vector{1, 2, 3}), std::invalid_argument);
}

TEST(Permutation, InverseOfStrideIsStride) {
  const std::size_t n = 16;
  for (std::size_t k = 2; k <= 8; ++k) {
    if (n % k) continue;
    EXPECT_EQ(invert(stride_perm(k, n)), stride_perm(n / k, n));
    EXPECT_TRUE(compose(stride_perm(k, n), stride_perm(n / k, n)).is_identity());
  }
}

TEST(Permutation, GroupOperations) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + trial % 17;
    const Permutation p = random_permutation(rng, n), q = random_permutation(rng, n);
    const Vector x = random_vector(rng, n);
    EXPECT_TRUE(is_bijection(p));
    EXPECT_EQ(gsmat::apply(invert(p), gsmat::apply(p, x)), x);
    EXPECT_TRUE(compose(p, invert(p)).is_identity());
    EXPECT_EQ(gsmat::apply(compose(p, q), x), gsmat::apply(p, gsmat::apply(q, x)));
    EXPECT_EQ(gsmat::apply_transpose(p, x), gsmat::apply(invert(p), x));
  }
  EXPECT_THROW(compose(Permutation::identity(3), Permutation::identity(4)), std::invalid_argument);
}

TEST(Permutation, DenseForm) {
  EXPECT_EQ(as_dense(Permutation::identity(5)), Matrix::identity(5));
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + trial;
    const Permutation p = random_permutation(rng, n);
    const Matrix d = as_dense(p);
    for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(d(p[i], i), 1.0);
    EXPECT_EQ(transpose(d) * d, Matrix::identity(n));
    const Vector x = random_vector(rng, n);
    EXPECT_EQ(d * x, gsmat::apply(p, x));
  }
}

TEST(Permutation, RowAndColumnHelpers) {
  Rng rng(5);
  const Permutation p = random_permutation(rng, 6);
  const Matrix m = random_matrix(rng, 6, 6);
  const Matrix pd = as_dense(p);
  EXPECT_EQ(permute_rows(p, m), pd * m);
  EXPECT_EQ(permute_rows_transpose(p, m), transpose(pd) * m);
  EXPECT_EQ(permute_cols(m, p), m * pd);
  EXPECT_EQ(permute_cols_transpose(m, p), m * transpose(pd));
}
