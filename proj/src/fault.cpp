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

#include "cimfault/fault.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "cimfault/errors.hpp"

namespace cimfault {

void NoiseSpec::validate() const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma", "must be a finite value >= 0");
  tile.validate();
}

void SafSpec::validate() const {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("saf_p", "must lie in [0, 1]");
}

Tensor sample_noise_matrix(std::size_t rows, std::size_t cols, double sigma, const RngKey& key) {
  if (!(sigma >= 0.0)) throw ConfigError("sigma", "must be >= 0");
  Tensor out(rows, cols);
  if (sigma == 0.0) return out;
  std::vector<double> z(rows * cols);
  KeyedStream(key).fill_normal(z);
  auto dst = out.data();
  for (std::size_t i = 0; i < z.size(); ++i) dst[i] = static_cast<float>(sigma * z[i]);
  return out;
}

Matrix inject_block_gaussian(const Matrix& w, const NoiseSpec& spec, const RngKey& key) {
  spec.validate();
  if (spec.sigma == 0.0) return w;

  BlockGrid grid = split_blocks(w, spec.tile);
  std::vector<double> z;
  for (std::size_t i = 0; i < grid.block_rows(); ++i) {
    for (std::size_t j = 0; j < grid.block_cols(); ++j) {
      Matrix& block = grid.block(i, j);
      const double scale = spec.sigma * static_cast<double>(block_abs_max(block));
      z.resize(block.size());
      KeyedStream(key.child(i).child(j)).fill_normal(z);
      for (std::size_t r = 0; r < block.rows(); ++r) {
        for (std::size_t c = 0; c < block.cols(); ++c) {
          const double noisy = static_cast<double>(block(r, c)) + z[r * block.cols() + c] * scale;
          block.set_word(r, c, encode_bf16_saturating(noisy));
        }
      }
    }
  }
  return concat_blocks(grid);
}

std::uint8_t saf_flip_mask(const KeyedStream& stream, std::uint64_t index, double p) {
  if (p <= 0.0) return 0;
  // u < p * 2^32 has probability p for a uniform 32-bit u; p == 1 always flips.
  const auto threshold = static_cast<std::uint64_t>(p * 4294967296.0);
  const auto lo = stream.block(2 * index);
  const auto hi = stream.block(2 * index + 1);
  const std::uint32_t draws[Bf16Word::kMantissaBits] = {lo[0], lo[1], lo[2], lo[3], hi[0], hi[1], hi[2]};
  std::uint8_t mask = 0;
  for (int b = 0; b < Bf16Word::kMantissaBits; ++b) {
    if (draws[b] < threshold) mask |= static_cast<std::uint8_t>(1u << b);
  }
  return mask;
}

Bf16Word apply_saf(Bf16Word w, const SafSpec& spec, const RngKey& key, std::uint64_t index) {
  spec.validate();
  return flip_mantissa_bits(w, saf_flip_mask(KeyedStream(key), index, spec.p));
}

Matrix apply_saf(const Matrix& w, const SafSpec& spec, const RngKey& key) {
  spec.validate();
  if (spec.p == 0.0) return w;
  const KeyedStream stream(key);
  Matrix out = w;
  for (std::size_t r = 0; r < w.rows(); ++r) {
    for (std::size_t c = 0; c < w.cols(); ++c) {
      const std::uint8_t mask = saf_flip_mask(stream, r * w.cols() + c, spec.p);
      if (mask != 0) out.set_word(r, c, flip_mantissa_bits(w.word(r, c), mask));
    }
  }
  return out;
}

FaultedWeights program_weights(const Matrix& w, const NoiseSpec& noise, const SafSpec& saf, const RngKey& key,
                               std::uint64_t forward_index) {
  noise.validate();
  saf.validate();
  RngKey gaussian_key = key.child("gaussian");
  if (noise.redraw == Redraw::PerForward) gaussian_key = gaussian_key.child(forward_index);
  Matrix noisy = inject_block_gaussian(w, noise, gaussian_key);
  return FaultedWeights{apply_saf(noisy, saf, key.child("saf")), noise, saf, key, forward_index};
}

}  // namespace cimfault
