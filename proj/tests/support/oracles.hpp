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

// Reference implementations used only by tests. They deliberately avoid the
// library's code paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace cimfault::oracle {

// Value of a bf16 pattern straight from the field formula.
inline double bf16_value(std::uint16_t bits) {
  const int sign = bits >> 15;
  const int exponent = (bits >> 7) & 0xFF;
  const int mantissa = bits & 0x7F;
  double v;
  if (exponent == 0) {
    v = std::ldexp(static_cast<double>(mantissa), -126 - 7);
  } else {
    v = std::ldexp(static_cast<double>(128 + mantissa), exponent - 127 - 7);
  }
  return sign ? -v : v;
}

// Every finite non-negative bf16 pattern with its value, sorted by value.
struct Bf16Table {
  std::vector<std::uint16_t> bits;
  std::vector<double> values;

  Bf16Table() {
    for (std::uint32_t b = 0; b < 0x7F80; ++b) {
      bits.push_back(static_cast<std::uint16_t>(b));
      values.push_back(bf16_value(static_cast<std::uint16_t>(b)));
    }
  }

  // Nearest finite bf16 to x, ties to the even pattern. Magnitudes past the
  // largest finite value by half an ulp or more round to infinity.
  std::uint16_t nearest(double x) const {
    const std::uint16_t sign = std::signbit(x) ? 0x8000 : 0;
    const double a = std::fabs(x);
    const double max_finite = values.back();
    const double half_ulp = (max_finite - values[values.size() - 2]) / 2;
    if (a >= max_finite + half_ulp) return sign | 0x7F80;
    auto it = std::lower_bound(values.begin(), values.end(), a);
    std::size_t hi = static_cast<std::size_t>(it - values.begin());
    if (hi == values.size()) return sign | bits.back();
    if (values[hi] == a || hi == 0) return sign | bits[hi];
    const std::size_t lo = hi - 1;
    const double dlo = a - values[lo];
    const double dhi = values[hi] - a;
    std::size_t pick;
    if (dlo < dhi) {
      pick = lo;
    } else if (dhi < dlo) {
      pick = hi;
    } else {
      pick = (bits[lo] % 2 == 0) ? lo : hi;
    }
    return sign | bits[pick];
  }
};

// Plain triple loop in (i, j, k) order with double accumulation.
inline std::vector<float> naive_matmul(const std::vector<float>& a, const std::vector<float>& b, std::size_t n,
                                       std::size_t k, std::size_t m) {
  std::vector<float> c(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += static_cast<double>(a[i * k + p]) * static_cast<double>(b[p * m + j]);
      c[i * m + j] = static_cast<float>(s);
    }
  }
  return c;
}

struct Moments {
  double mean = 0.0;
  double std = 0.0;
  double skew = 0.0;
};

inline Moments moments(const std::vector<double>& xs) {
  Moments m;
  const double n = static_cast<double>(xs.size());
  for (double x : xs) m.mean += x;
  m.mean /= n;
  double m2 = 0.0;
  double m3 = 0.0;
  for (double x : xs) {
    const double d = x - m.mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m.std = std::sqrt(m2);
  m.skew = m3 / std::pow(m2, 1.5);
  return m;
}

}  // namespace cimfault::oracle
