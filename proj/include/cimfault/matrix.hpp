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

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cimfault/bf16.hpp"

namespace cimfault {

// Read-only row-major view used by the arithmetic kernels.
struct ConstView {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::span<const float> data;

  float operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

// Row-major float32 buffer for activations and accumulated results. No
// precision restriction on the values.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, float fill = 0.0f);
  Tensor(std::size_t rows, std::size_t cols, std::vector<float> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }
  std::span<const float> row(std::size_t r) const { return data().subspan(r * cols_, cols_); }
  std::span<float> row(std::size_t r) { return data().subspan(r * cols_, cols_); }

  float& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  float operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  ConstView view() const { return {rows_, cols_, data_}; }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

// A weight matrix resident on the simulated crossbar. Every stored element
// is exactly representable in bf16; constructors round to nearest even.
class Matrix {
 public:
  Matrix() = default;
  // Zero matrix. Both dimensions must be positive.
  Matrix(std::size_t rows, std::size_t cols);
  // Rounds each value to bf16. Throws ShapeError on a size mismatch and
  // CodecError on non-finite values.
  Matrix(std::size_t rows, std::size_t cols, std::span<const float> values);

  static Matrix from_words(std::size_t rows, std::size_t cols, std::span<const Bf16Word> words);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<const float> data() const { return data_; }
  std::span<const float> row(std::size_t r) const { return data().subspan(r * cols_, cols_); }

  // Rounds `value` to bf16 before storing.
  void set(std::size_t r, std::size_t c, double value);
  // Stores a pattern; NaN patterns are rejected.
  void set_word(std::size_t r, std::size_t c, Bf16Word w);
  Bf16Word word(std::size_t r, std::size_t c) const;
  std::vector<Bf16Word> words() const;

  ConstView view() const { return {rows_, cols_, data_}; }

  // Bitwise equality, so -0 and +0 differ.
  bool bit_equal(const Matrix& other) const;
  friend bool operator==(const Matrix& a, const Matrix& b) { return a.bit_equal(b); }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

struct TileShape {
  std::size_t m = 64;
  std::size_t n = 64;

  // Throws ShapeError unless both extents are positive.
  void validate() const;

  friend bool operator==(const TileShape&, const TileShape&) = default;
};

// Ceil partition of a matrix into tiles. Interior blocks are m x n; the last
// block row/column holds the remainder.
class BlockGrid {
 public:
  BlockGrid(std::size_t block_rows, std::size_t block_cols, std::vector<Matrix> blocks);

  std::size_t block_rows() const { return k_; }
  std::size_t block_cols() const { return t_; }
  const Matrix& block(std::size_t i, std::size_t j) const { return blocks_[i * t_ + j]; }
  Matrix& block(std::size_t i, std::size_t j) { return blocks_[i * t_ + j]; }

 private:
  std::size_t k_;
  std::size_t t_;
  std::vector<Matrix> blocks_;
};

BlockGrid split_blocks(const Matrix& w, TileShape tile);

// Inverse of split_blocks. Throws ShapeError when block heights differ
// along a block row or widths differ along a block column.
Matrix concat_blocks(const BlockGrid& grid);

// max |element|; 0 for an all-zero block. Throws ShapeError if empty.
float block_abs_max(const Matrix& block);

// a (r x k) times b (k x c). Products are formed and summed in double in
// ascending k order, then the sum is rounded once to float.
Tensor matmul(ConstView a, ConstView b);
inline Tensor matmul(const Matrix& a, const Matrix& b) { return matmul(a.view(), b.view()); }
inline Tensor matmul(const Tensor& a, const Matrix& b) { return matmul(a.view(), b.view()); }

}  // namespace cimfault
