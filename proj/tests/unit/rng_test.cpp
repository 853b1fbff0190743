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

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "support/oracles.hpp"

namespace cimfault {
namespace {

TEST(Philox, KnownAnswer) {
  // Random123 known-answer vectors for philox4x32-10.
  EXPECT_EQ(Philox4x32::generate({0, 0, 0, 0}, {0, 0}),
            (Philox4x32::Counter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(Philox4x32::generate({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}),
            (Philox4x32::Counter{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(Philox4x32::generate({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}),
            (Philox4x32::Counter{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(KeyedStream, SameKeySameStream) {
  const RngKey a = RngKey(42).child(3).child("layers.0.wq");
  const RngKey b = RngKey(42).child(3).child("layers.0.wq");
  EXPECT_EQ(KeyedStream(a).block(17), KeyedStream(b).block(17));
  EXPECT_EQ(KeyedStream(a).normal(5), KeyedStream(b).normal(5));
}

TEST(KeyedStream, PathOrderMatters) {
  EXPECT_NE(KeyedStream(RngKey(1).child(2).child(3)).block(0), KeyedStream(RngKey(1).child(3).child(2)).block(0));
  EXPECT_NE(KeyedStream(RngKey(1).child(0)).block(0), KeyedStream(RngKey(1)).block(0));
  EXPECT_NE(KeyedStream(RngKey(1)).block(0), KeyedStream(RngKey(2)).block(0));
}

TEST(KeyedStream, BulkFillMatchesRandomAccess) {
  const KeyedStream s(RngKey(9).child("x"));
  std::vector<double> bulk(11);
  s.fill_normal(bulk);
  for (std::size_t i = 0; i < bulk.size(); ++i) EXPECT_EQ(bulk[i], s.normal(i));
}

TEST(KeyedStream, UniformInUnitInterval) {
  const KeyedStream s(RngKey(3));
  for (std::uint64_t i = 0; i < 10000; ++i) {
    const double u = s.uniform(i, static_cast<int>(i % 2));
    ASSERT_GT(u, 0.0);
    ASSERT_LE(u, 1.0);
  }
}

TEST(KeyedStream, DistinctPathsAreUncorrelated) {
  constexpr std::size_t n = 100000;
  std::vector<double> a(n), b(n);
  KeyedStream(RngKey(5).child(0)).fill_normal(a);
  KeyedStream(RngKey(5).child(1)).fill_normal(b);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += a[i] * b[i];
    saa += a[i] * a[i];
    sbb += b[i] * b[i];
  }
  EXPECT_LT(std::fabs(sab / std::sqrt(saa * sbb)), 0.01);
}

}  // namespace
}  // namespace cimfault
