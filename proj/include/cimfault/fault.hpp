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

#include <cstdint>

#include "cimfault/bf16.hpp"
#include "cimfault/matrix.hpp"
#include "cimfault/rng.hpp"

namespace cimfault {

// When the Gaussian conductance error is redrawn. SAF defects are fixed for
// the lifetime of a run under either mode.
enum class Redraw {
  PerProgramming,  // one realization per deployment (device-to-device)
  PerForward,      // fresh realization on every forward pass (cycle-to-cycle)
};

struct NoiseSpec {
  double sigma = 0.0;
  TileShape tile{};
  Redraw redraw = Redraw::PerProgramming;

  void validate() const;
};

struct SafSpec {
  double p = 0.0;  // per-mantissa-bit flip probability

  void validate() const;
};

struct FaultedWeights {
  Matrix w_star;
  NoiseSpec noise;
  SafSpec saf;
  RngKey key;
  std::uint64_t forward_index = 0;
};

// i.i.d. N(0, sigma^2) entries, element i (row-major) taken from position i
// of the keyed stream.
Tensor sample_noise_matrix(std::size_t rows, std::size_t cols, double sigma, const RngKey& key);

// W* = Cat_{i,j}(W[i,j] + N[i,j] * max|W[i,j]|) with N[i,j] ~ N(0, sigma^2 I),
// computed in double and rounded back to bf16 (saturating). Block (i, j)
// draws from key.child(i).child(j). The max is taken over the clean block.
Matrix inject_block_gaussian(const Matrix& w, const NoiseSpec& spec, const RngKey& key);

// The 7-bit flip mask for element `index` of the stream: bit b is set with
// probability p, independently for each b.
std::uint8_t saf_flip_mask(const KeyedStream& stream, std::uint64_t index, double p);

// Flips each mantissa bit of `w` independently with probability p, using
// element `index` of the keyed stream. Sign and exponent are untouched.
Bf16Word apply_saf(Bf16Word w, const SafSpec& spec, const RngKey& key, std::uint64_t index = 0);

// apply_saf over every element; element e uses stream index e.
Matrix apply_saf(const Matrix& w, const SafSpec& spec, const RngKey& key);

// Gaussian injection followed by stuck-at faults on the resulting words.
// The Gaussian stream is key.child("gaussian"), extended by forward_index
// under Redraw::PerForward; the SAF stream is key.child("saf") and never
// depends on forward_index.
FaultedWeights program_weights(const Matrix& w, const NoiseSpec& noise, const SafSpec& saf, const RngKey& key,
                               std::uint64_t forward_index = 0);

}  // namespace cimfault
