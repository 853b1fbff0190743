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

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "cimfault/errors.hpp"

namespace cimfault {
namespace {

std::string dims(std::size_t r, std::size_t c) { return std::to_string(r) + "x" + std::to_string(c); }

void require_positive(std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) throw ShapeError("matrix dimensions must be positive, got " + dims(rows, cols));
}

}  // namespace

Tensor::Tensor(std::size_t rows, std::size_t cols, float fill) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match " + dims(rows, cols));
  }
}

Matrix::Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0f) {
  require_positive(rows, cols);
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::span<const float> values) : Matrix(rows, cols) {
  if (values.size() != data_.size()) {
    throw ShapeError("matrix data length " + std::to_string(values.size()) + " does not match " + dims(rows, cols));
  }
  std::transform(values.begin(), values.end(), data_.begin(), [](float v) { return round_to_bf16(v); });
}

Matrix Matrix::from_words(std::size_t rows, std::size_t cols, std::span<const Bf16Word> words) {
  Matrix m(rows, cols);
  if (words.size() != m.data_.size()) {
    throw ShapeError("word count " + std::to_string(words.size()) + " does not match " + dims(rows, cols));
  }
  std::transform(words.begin(), words.end(), m.data_.begin(), decode_bf16);
  return m;
}

void Matrix::set(std::size_t r, std::size_t c, double value) { data_[r * cols_ + c] = round_to_bf16(value); }

void Matrix::set_word(std::size_t r, std::size_t c, Bf16Word w) { data_[r * cols_ + c] = decode_bf16(w); }

Bf16Word Matrix::word(std::size_t r, std::size_t c) const {
  return Bf16Word{static_cast<std::uint16_t>(std::bit_cast<std::uint32_t>(data_[r * cols_ + c]) >> 16)};
}

std::vector<Bf16Word> Matrix::words() const {
  std::vector<Bf16Word> out(data_.size());
  std::transform(data_.begin(), data_.end(), out.begin(), [](float v) {
    return Bf16Word{static_cast<std::uint16_t>(std::bit_cast<std::uint32_t>(v) >> 16)};
  });
  return out;
}

bool Matrix::bit_equal(const Matrix& other) const {
  if (rows_ != other.rows_ || cols_ != other.cols_) return false;
  return std::equal(data_.begin(), data_.end(), other.data_.begin(), [](float a, float b) {
    return std::bit_cast<std::uint32_t>(a) == std::bit_cast<std::uint32_t>(b);
  });
}

void TileShape::validate() const {
  if (m == 0 || n == 0) throw ShapeError("tile shape must be positive, got " + dims(m, n));
}

BlockGrid::BlockGrid(std::size_t block_rows, std::size_t block_cols, std::vector<Matrix> blocks)
    : k_(block_rows), t_(block_cols), blocks_(std::move(blocks)) {
  if (k_ == 0 || t_ == 0 || blocks_.size() != k_ * t_) {
    throw ShapeError("block grid " + dims(k_, t_) + " holds " + std::to_string(blocks_.size()) + " blocks");
  }
}

BlockGrid split_blocks(const Matrix& w, TileShape tile) {
  tile.validate();
  if (w.empty()) throw ShapeError("split_blocks: empty matrix");
  const std::size_t k = (w.rows() + tile.m - 1) / tile.m;
  const std::size_t t = (w.cols() + tile.n - 1) / tile.n;

  std::vector<Matrix> blocks;
  blocks.reserve(k * t);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t r0 = i * tile.m;
    const std::size_t h = std::min(tile.m, w.rows() - r0);
    for (std::size_t j = 0; j < t; ++j) {
      const std::size_t c0 = j * tile.n;
      const std::size_t wd = std::min(tile.n, w.cols() - c0);
      // Copy bit patterns so infinities pass through untouched.
      std::vector<Bf16Word> vals;
      vals.reserve(h * wd);
      for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < wd; ++c) vals.push_back(w.word(r0 + r, c0 + c));
      }
      blocks.push_back(Matrix::from_words(h, wd, vals));
    }
  }
  return BlockGrid(k, t, std::move(blocks));
}

Matrix concat_blocks(const BlockGrid& grid) {
  const std::size_t k = grid.block_rows();
  const std::size_t t = grid.block_cols();

  std::size_t rows = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t h = grid.block(i, 0).rows();
    for (std::size_t j = 1; j < t; ++j) {
      if (grid.block(i, j).rows() != h) {
        throw ShapeError("concat_blocks: ragged height in block row " + std::to_string(i));
      }
    }
    rows += h;
  }
  std::size_t cols = 0;
  for (std::size_t j = 0; j < t; ++j) {
    const std::size_t wd = grid.block(0, j).cols();
    for (std::size_t i = 1; i < k; ++i) {
      if (grid.block(i, j).cols() != wd) {
        throw ShapeError("concat_blocks: ragged width in block column " + std::to_string(j));
      }
    }
    cols += wd;
  }

  std::vector<Bf16Word> out(rows * cols);
  std::size_t r0 = 0;
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t c0 = 0;
    for (std::size_t j = 0; j < t; ++j) {
      const Matrix& b = grid.block(i, j);
      for (std::size_t r = 0; r < b.rows(); ++r) {
        for (std::size_t c = 0; c < b.cols(); ++c) out[(r0 + r) * cols + c0 + c] = b.word(r, c);
      }
      c0 += b.cols();
    }
    r0 += grid.block(i, 0).rows();
  }
  return Matrix::from_words(rows, cols, out);
}

float block_abs_max(const Matrix& block) {
  if (block.empty()) throw ShapeError("block_abs_max: empty block");
  float m = 0.0f;
  for (float v : block.data()) m = std::max(m, std::fabs(v));
  return m;
}

Tensor matmul(ConstView a, ConstView b) {
  if (a.cols != b.rows) {
    throw ShapeError("matmul: inner dimensions differ (" + dims(a.rows, a.cols) + " * " + dims(b.rows, b.cols) + ")");
  }
  Tensor out(a.rows, b.cols);
  std::vector<double> acc(b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      const float* brow = b.data.data() + k * b.cols;
      for (std::size_t j = 0; j < b.cols; ++j) acc[j] += aik * static_cast<double>(brow[j]);
    }
    auto dst = out.row(i);
    for (std::size_t j = 0; j < b.cols; ++j) dst[j] = static_cast<float>(acc[j]);
  }
  return out;
}

}  // namespace cimfault
