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

#include "cimfault/rng.hpp"

#include <cmath>
#include <numbers>

namespace cimfault {
namespace {

constexpr std::uint32_t kW32A = 0x9E3779B9;
constexpr std::uint32_t kW32B = 0xBB67AE85;
constexpr std::uint32_t kM4x32A = 0xD2511F53;
constexpr std::uint32_t kM4x32B = 0xCD9E8D57;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo, std::uint32_t& hi) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  lo = static_cast<std::uint32_t>(p);
  hi = static_cast<std::uint32_t>(p >> 32);
}

constexpr double kTwoPow53Inv = 1.0 / 9007199254740992.0;

}  // namespace

Philox4x32::Counter Philox4x32::generate(Counter c, Key k) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t lo0, hi0, lo1, hi1;
    mulhilo(kM4x32A, c[0], lo0, hi0);
    mulhilo(kM4x32B, c[2], lo1, hi1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += kW32A;
    k[1] += kW32B;
  }
  return c;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t hash_label(std::string_view label) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char ch : label) {
    h ^= ch;
    h *= 0x100000001B3ull;
  }
  return h;
}

RngKey RngKey::child(std::uint64_t label) const {
  RngKey k = *this;
  k.path_.push_back(label);
  return k;
}

KeyedStream::KeyedStream(const RngKey& key) {
  // Two independent chains give 128 bits of stream identity: 64 in the
  // Philox key, 64 in the upper counter words.
  std::uint64_t a = splitmix64(key.seed());
  std::uint64_t b = splitmix64(key.seed() ^ 0x6A09E667F3BCC909ull);
  std::uint64_t depth = 0;
  for (std::uint64_t label : key.path()) {
    ++depth;
    a = splitmix64(a ^ splitmix64(label + depth));
    b = splitmix64(b + splitmix64(label ^ (depth << 32)));
  }
  key_ = {static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32)};
  hi0_ = static_cast<std::uint32_t>(b);
  hi1_ = static_cast<std::uint32_t>(b >> 32);
}

std::array<std::uint32_t, 4> KeyedStream::block(std::uint64_t index) const {
  return Philox4x32::generate(
      {static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), hi0_, hi1_}, key_);
}

double KeyedStream::uniform(std::uint64_t index, int half) const {
  const auto r = block(index);
  const std::uint64_t bits = (static_cast<std::uint64_t>(r[2 * half]) << 32 | r[2 * half + 1]) >> 11;
  return static_cast<double>(bits + 1) * kTwoPow53Inv;
}

namespace {

struct NormalPair {
  double first;
  double second;
};

NormalPair box_muller(const std::array<std::uint32_t, 4>& r) {
  const std::uint64_t b0 = (static_cast<std::uint64_t>(r[0]) << 32 | r[1]) >> 11;
  const std::uint64_t b1 = (static_cast<std::uint64_t>(r[2]) << 32 | r[3]) >> 11;
  const double u1 = static_cast<double>(b0 + 1) * kTwoPow53Inv;
  const double u2 = static_cast<double>(b1) * kTwoPow53Inv;
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

}  // namespace

double KeyedStream::normal(std::uint64_t index) const {
  const auto pair = box_muller(block(index / 2));
  return index % 2 == 0 ? pair.first : pair.second;
}

void KeyedStream::fill_normal(std::span<double> out) const {
  const std::size_t n = out.size();
  for (std::size_t i = 0; i + 1 < n; i += 2) {
    const auto pair = box_muller(block(i / 2));
    out[i] = pair.first;
    out[i + 1] = pair.second;
  }
  if (n % 2 == 1) out[n - 1] = box_muller(block((n - 1) / 2)).first;
}

}  // namespace cimfault
