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

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace cimfault {

// Philox4x32-10 (Salmon et al., SC'11). A pure function of (key, counter):
// there is no state to share, so any element of any stream can be produced
// independently and in any order.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter ctr, Key key);
};

std::uint64_t splitmix64(std::uint64_t x);

// FNV-1a; used to turn symbolic path labels into stream labels.
std::uint64_t hash_label(std::string_view label);

// Identifies one random stream: a seed plus an ordered path of labels
// (run, tensor, replica, block ...). Equal keys give equal streams;
// distinct keys give statistically independent ones.
class RngKey {
 public:
  RngKey() = default;
  explicit RngKey(std::uint64_t seed) : seed_(seed) {}
  RngKey(std::uint64_t seed, std::vector<std::uint64_t> path) : seed_(seed), path_(std::move(path)) {}

  RngKey child(std::uint64_t label) const;
  RngKey child(std::string_view label) const { return child(hash_label(label)); }

  std::uint64_t seed() const { return seed_; }
  const std::vector<std::uint64_t>& path() const { return path_; }

  friend bool operator==(const RngKey&, const RngKey&) = default;

 private:
  std::uint64_t seed_ = 0;
  std::vector<std::uint64_t> path_;
};

// Random-access view of the stream named by a key. Index i of the stream is
// one Philox block; streams are 2^64 blocks long.
class KeyedStream {
 public:
  explicit KeyedStream(const RngKey& key);

  std::array<std::uint32_t, 4> block(std::uint64_t index) const;

  // Uniform double in (0, 1] built from 53 bits of block `index`; `half`
  // selects the first or second 64-bit half.
  double uniform(std::uint64_t index, int half) const;

  // Standard normal number `index` of the stream (Box-Muller; element pairs
  // share one Philox block).
  double normal(std::uint64_t index) const;

  // out[i] = normal(i); one Philox block per output pair.
  void fill_normal(std::span<double> out) const;

 private:
  Philox4x32::Key key_{};
  std::uint32_t hi0_ = 0;
  std::uint32_t hi1_ = 0;
};

}  // namespace cimfault
