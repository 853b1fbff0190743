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

#include "cimfault/bf16.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <string>

#include "cimfault/errors.hpp"

namespace cimfault {
namespace {

std::uint16_t round_float_bits(float f) {
  const auto bits = std::bit_cast<std::uint32_t>(f);
  const std::uint32_t lsb = (bits >> 16) & 1u;
  return static_cast<std::uint16_t>((bits + 0x7FFFu + lsb) >> 16);
}

}  // namespace

Bf16Word encode_bf16(double x) {
  if (!std::isfinite(x)) {
    throw CodecError("encode_bf16: non-finite input " + std::to_string(x));
  }
  // Going through float is exact unless float rounding lands on a bf16
  // midpoint; in that case the double tells us which side x was on.
  const float f = static_cast<float>(x);
  auto bits = std::bit_cast<std::uint32_t>(f);
  if ((bits & 0xFFFFu) == 0x8000u && static_cast<double>(f) != x) {
    const bool rounded_away = std::fabs(static_cast<double>(f)) > std::fabs(x);
    const std::uint32_t truncated = bits & 0xFFFF0000u;
    return Bf16Word{static_cast<std::uint16_t>((rounded_away ? truncated : truncated + 0x10000u) >> 16)};
  }
  return Bf16Word{round_float_bits(f)};
}

Bf16Word encode_bf16_saturating(double x) {
  Bf16Word w = encode_bf16(x);
  if (w.is_inf()) {
    w.bits = static_cast<std::uint16_t>((w.bits & Bf16Word::kSignMask) | kBf16MaxFinite.bits);
  }
  return w;
}

float decode_bf16(Bf16Word w) {
  if (w.is_nan()) {
    throw NanPatternError("decode_bf16: NaN pattern 0x" + [&] {
      static constexpr char kHex[] = "0123456789ABCDEF";
      std::string s(4, '0');
      for (int i = 0; i < 4; ++i) s[3 - i] = kHex[(w.bits >> (4 * i)) & 0xF];
      return s;
    }());
  }
  return std::bit_cast<float>(static_cast<std::uint32_t>(w.bits) << 16);
}

float round_to_bf16(double x) { return decode_bf16(encode_bf16(x)); }

}  // namespace cimfault
