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

#include <compare>
#include <cstdint>

namespace cimfault {

// A brain-float-16 bit pattern: bit 15 sign, bits 14..7 exponent,
// bits 6..0 mantissa.
struct Bf16Word {
  std::uint16_t bits = 0;

  static constexpr std::uint16_t kSignMask = 0x8000;
  static constexpr std::uint16_t kExponentMask = 0x7F80;
  static constexpr std::uint16_t kMantissaMask = 0x007F;
  static constexpr int kMantissaBits = 7;

  constexpr std::uint16_t sign() const { return bits >> 15; }
  constexpr std::uint16_t exponent() const { return (bits & kExponentMask) >> 7; }
  constexpr std::uint16_t mantissa() const { return bits & kMantissaMask; }

  constexpr bool is_nan() const { return exponent() == 0xFF && mantissa() != 0; }
  constexpr bool is_inf() const { return exponent() == 0xFF && mantissa() == 0; }

  friend constexpr auto operator<=>(Bf16Word, Bf16Word) = default;
};

inline constexpr Bf16Word kBf16MaxFinite{0x7F7F};

// Round-to-nearest-even conversion. Throws CodecError on NaN or infinity.
// Finite values beyond the bf16 range round to infinity, as IEEE rounding
// prescribes; use `encode_bf16_saturating` where that is not wanted.
Bf16Word encode_bf16(double x);

// Same rounding, but results that would be infinite clamp to the largest
// finite bf16 magnitude with the input's sign.
Bf16Word encode_bf16_saturating(double x);

// Exact value of the pattern (subnormals included, infinities map to
// +-inf). Throws NanPatternError for NaN patterns.
float decode_bf16(Bf16Word w);

// decode(encode(x)).
float round_to_bf16(double x);

// XORs `mask` (low 7 bits) into the mantissa; sign and exponent are kept.
constexpr Bf16Word flip_mantissa_bits(Bf16Word w, std::uint8_t mask) {
  return Bf16Word{static_cast<std::uint16_t>(w.bits ^ (mask & Bf16Word::kMantissaMask))};
}

}  // namespace cimfault
