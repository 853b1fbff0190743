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
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cimfault/bf16.hpp"
#include "cimfault/matrix.hpp"

namespace cimfault {

// Binary weight container ("CIMW"). All integers are little-endian.
//
//   magic        4 bytes  "CIMW"
//   version      u16      kContainerVersion
//   count        u32      number of tensors
//   count x {
//     name_len   u16
//     name       name_len bytes, UTF-8
//     rank       u8
//     dims       rank x u32
//     offset     u64      absolute file offset of the tensor's payload
//   }
//   payload      raw bf16 words (u16), row-major, one run per tensor
inline constexpr std::uint16_t kContainerVersion = 1;

struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<Bf16Word> words;

  std::size_t element_count() const;
  // Rank-1 tensors become a 1 x n matrix.
  Matrix to_matrix() const;
  static NamedTensor from_matrix(std::string name, const Matrix& m);
  static NamedTensor vector(std::string name, std::span<const float> values);
};

std::vector<std::uint8_t> serialize_container(std::span<const NamedTensor> tensors);
// Throws IoError on truncation, bad magic, unknown version or payloads that
// fall outside the buffer.
std::vector<NamedTensor> parse_container(std::span<const std::uint8_t> bytes);

void write_container(const std::filesystem::path& path, std::span<const NamedTensor> tensors);
std::vector<NamedTensor> read_container(const std::filesystem::path& path);

}  // namespace cimfault
