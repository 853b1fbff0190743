// Copyright 2026 The cimfault Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cimfault/matrix.hpp"

#include <gtest/gtest.h>

#include <random>

#include "cimfault/errors.hpp"
#include "support/oracles.hpp"

namespace cimfault {
namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& gen, double scale = 1.0) {
  std::normal_distribution<float> dist(0.0f, static_cast<float>(scale));
  std::vector<float> v(rows * cols);
  for (auto& x : v) x = dist(gen);
  return Matrix(rows, cols, v);
}

TEST(Matrix, ConstructorRoundsToBf16) {
  const std::vector<float> v{0.028f, 1.0f};
  const Matrix m(1, 2, v);
  EXPECT_EQ(m.word(0, 0).bits, 0x3CE5);
  EXPECT_EQ(m(0, 0), 0.0279541015625f);
  EXPECT_EQ(m(0, 1), 1.0f);
}

TEST(Matrix, RejectsBadShapes) {
  EXPECT_THROW(Matrix(0, 3), ShapeError);
  const std::vector<float> v(5);
  EXPECT_THROW(Matrix(2, 3, v), ShapeError);
}

TEST(SplitBlocks, SingleTile) {
  std::mt19937_64 gen(1);
  const auto g = split_blocks(random_matrix(64, 64, gen), {64, 64});
  EXPECT_EQ(g.block_rows(), 1u);
  EXPECT_EQ(g.block_cols(), 1u);
}

TEST(SplitBlocks, SquareGrid) {
  const auto g = split_blocks(Matrix(1024, 1024), {64, 64});
  EXPECT_EQ(g.block_rows(), 16u);
  EXPECT_EQ(g.block_cols(), 16u);
}

TEST(SplitBlocks, RaggedEdges) {
  std::mt19937_64 gen(2);
  const Matrix w = random_matrix(100, 70, gen);
  const auto g = split_blocks(w, {64, 64});
  ASSERT_EQ(g.block_rows(), 2u);
  ASSERT_EQ(g.block_cols(), 2u);
  EXPECT_EQ(g.block(0, 0).rows(), 64u);
  EXPECT_EQ(g.block(0, 0).cols(), 64u);
  EXPECT_EQ(g.block(1, 0).rows(), 36u);
  EXPECT_EQ(g.block(1, 0).cols(), 64u);
  EXPECT_EQ(g.block(0, 1).rows(), 64u);
  EXPECT_EQ(g.block(0, 1).cols(), 6u);
  EXPECT_EQ(g.block(1, 1).rows(), 36u);
  EXPECT_EQ(g.block(1, 1).cols(), 6u);
  EXPECT_EQ(g.block(1, 1)(35, 5), w(99, 69));
  EXPECT_EQ(g.block(1, 0)(0, 0), w(64, 0));
  EXPECT_TRUE(concat_blocks(g).bit_equal(w));
}

TEST(SplitBlocks, RejectsZeroTile) { EXPECT_THROW(split_blocks(Matrix(2, 2), {0, 1}), ShapeError); }

TEST(ConcatBlocks, SingleBlockIsThatBlock) {
  std::mt19937_64 gen(3);
  const Matrix w = random_matrix(5, 7, gen);
  EXPECT_TRUE(concat_blocks(BlockGrid(1, 1, {w})).bit_equal(w));
}

TEST(ConcatBlocks, RejectsInconsistentBlocks) {
  EXPECT_THROW(concat_blocks(BlockGrid(1, 2, {Matrix(2, 2), Matrix(3, 2)})), ShapeError);
  EXPECT_THROW(concat_blocks(BlockGrid(2, 1, {Matrix(2, 2), Matrix(2, 3)})), ShapeError);
}

// Property: for random shapes and tiles the ceil counts hold and Split/Cat
// is the identity, including -0 and subnormal payloads.
TEST(SplitConcatProperty, RandomShapesRoundTrip) {
  std::mt19937_64 gen(4);
  std::uniform_int_distribution<std::size_t> dim(1, 150);
  std::uniform_int_distribution<std::size_t> tile(1, 80);
  std::uniform_int_distribution<std::uint32_t> bits(0, 0xFFFF);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t d1 = dim(gen), d2 = dim(gen), m = tile(gen), n = tile(gen);
    std::vector<Bf16Word> words(d1 * d2);
    for (auto& w : words) {
      do {
        w.bits = static_cast<std::uint16_t>(bits(gen));
      } while (w.is_nan());
    }
    const Matrix w = Matrix::from_words(d1, d2, words);
    const auto g = split_blocks(w, {m, n});
    const std::size_t k = g.block_rows(), t = g.block_cols();
    ASSERT_TRUE(k * m >= d1 && d1 > (k - 1) * m);
    ASSERT_TRUE(t * n >= d2 && d2 > (t - 1) * n);
    ASSERT_TRUE(concat_blocks(g).bit_equal(w)) << d1 << "x" << d2 << " tile " << m << "x" << n;
  }
}

TEST(BlockAbsMax, HandExample) {
  const std::vector<float> v{-3, 1, 2, 0};
  EXPECT_EQ(block_abs_max(Matrix(2, 2, v)), 3.0f);
}

TEST(BlockAbsMax, ZeroBlock) { EXPECT_EQ(block_abs_max(Matrix(4, 4)), 0.0f); }

TEST(BlockAbsMax, EmptyBlockRejected) { EXPECT_THROW(block_abs_max(Matrix()), ShapeError); }

TEST(BlockAbsMax, MatchesScan) {
  std::mt19937_64 gen(5);
  const Matrix b = random_matrix(64, 64, gen);
  float expected = 0.0f;
  for (std::size_t r = 0; r < 64; ++r) {
    for (std::size_t c = 0; c < 64; ++c) expected = std::max(expected, b(r, c) < 0 ? -b(r, c) : b(r, c));
  }
  EXPECT_EQ(block_abs_max(b), expected);
}

TEST(Matmul, HandArithmetic) {
  const std::vector<float> a{1, 2, 3, 4};
  const std::vector<float> b{5, 6, 7, 8};
  const Tensor c = matmul(Matrix(2, 2, a), Matrix(2, 2, b));
  EXPECT_EQ(c, Tensor(2, 2, std::vector<float>{19, 22, 43, 50}));
}

TEST(Matmul, IdentityIsNeutral) {
  std::mt19937_64 gen(6);
  const Matrix a = random_matrix(5, 8, gen);
  Matrix eye(8, 8);
  for (std::size_t i = 0; i < 8; ++i) eye.set(i, i, 1.0);
  const Tensor c = matmul(a, eye);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(c.data()[i], a.data()[i]);
}

TEST(Matmul, DimensionMismatch) { EXPECT_THROW(matmul(Matrix(2, 3), Matrix(2, 3)), ShapeError); }

TEST(Matmul, BitExactAgainstNaiveLoopUpTo64) {
  std::mt19937_64 gen(7);
  std::uniform_int_distribution<std::size_t> dim(1, 64);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = dim(gen), k = dim(gen), m = dim(gen);
    const Matrix a = random_matrix(n, k, gen);
    const Matrix b = random_matrix(k, m, gen);
    const auto ref = oracle::naive_matmul({a.data().begin(), a.data().end()}, {b.data().begin(), b.data().end()}, n,
                                          k, m);
    const Tensor c = matmul(a, b);
    for (std::size_t i = 0; i < ref.size(); ++i) {
      ASSERT_EQ(std::bit_cast<std::uint32_t>(c.data()[i]), std::bit_cast<std::uint32_t>(ref[i]));
    }
  }
}

}  // namespace
}  // namespace cimfault
