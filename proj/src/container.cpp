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

#include "cimfault/container.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <limits>

#include "cimfault/errors.hpp"

namespace cimfault {
namespace {

constexpr char kMagic[4] = {'C', 'I', 'M', 'W'};

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(bytes_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return v;
  }

  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw IoError("weight container truncated at byte " + std::to_string(pos_));
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::size_t NamedTensor::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

Matrix NamedTensor::to_matrix() const {
  if (dims.size() == 1) return Matrix::from_words(1, dims[0], words);
  if (dims.size() == 2) return Matrix::from_words(dims[0], dims[1], words);
  throw ShapeError("tensor '" + name + "' has rank " + std::to_string(dims.size()) + ", expected 1 or 2");
}

NamedTensor NamedTensor::from_matrix(std::string name, const Matrix& m) {
  return {std::move(name), {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())}, m.words()};
}

NamedTensor NamedTensor::vector(std::string name, std::span<const float> values) {
  NamedTensor t{std::move(name), {static_cast<std::uint32_t>(values.size())}, {}};
  t.words.reserve(values.size());
  for (float v : values) t.words.push_back(encode_bf16(v));
  return t;
}

std::vector<std::uint8_t> serialize_container(std::span<const NamedTensor> tensors) {
  std::size_t header = sizeof(kMagic) + 2 + 4;
  for (const auto& t : tensors) {
    if (t.name.size() > std::numeric_limits<std::uint16_t>::max()) throw IoError("tensor name too long: " + t.name);
    if (t.dims.size() > std::numeric_limits<std::uint8_t>::max()) throw IoError("tensor rank too large: " + t.name);
    if (t.words.size() != t.element_count()) {
      throw ShapeError("tensor '" + t.name + "' holds " + std::to_string(t.words.size()) + " words for its dims");
    }
    header += 2 + t.name.size() + 1 + 4 * t.dims.size() + 8;
  }

  std::vector<std::uint8_t> out;
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put<std::uint16_t>(out, kContainerVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  std::uint64_t offset = header;
  for (const auto& t : tensors) {
    put<std::uint16_t>(out, static_cast<std::uint16_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) put<std::uint32_t>(out, d);
    put<std::uint64_t>(out, offset);
    offset += 2 * t.words.size();
  }
  for (const auto& t : tensors) {
    for (auto w : t.words) put<std::uint16_t>(out, w.bits);
  }
  return out;
}

std::vector<NamedTensor> parse_container(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  auto magic = in.take(sizeof(kMagic));
  if (!std::equal(magic.begin(), magic.end(), std::begin(kMagic))) throw IoError("not a weight container (bad magic)");
  const auto version = in.get<std::uint16_t>();
  if (version != kContainerVersion) throw IoError("unsupported weight container version " + std::to_string(version));
  const auto count = in.get<std::uint32_t>();

  std::vector<NamedTensor> tensors;
  std::vector<std::uint64_t> offsets;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    auto name = in.take(in.get<std::uint16_t>());
    t.name.assign(name.begin(), name.end());
    const auto rank = in.get<std::uint8_t>();
    for (std::uint8_t r = 0; r < rank; ++r) t.dims.push_back(in.get<std::uint32_t>());
    offsets.push_back(in.get<std::uint64_t>());
    tensors.push_back(std::move(t));
  }

  for (std::size_t i = 0; i < tensors.size(); ++i) {
    auto& t = tensors[i];
    const std::uint64_t n = t.element_count();
    if (offsets[i] > bytes.size() || (bytes.size() - offsets[i]) / 2 < n) {
      throw IoError("payload of tensor '" + t.name + "' lies outside the file");
    }
    t.words.resize(n);
    const std::uint8_t* p = bytes.data() + offsets[i];
    for (std::uint64_t e = 0; e < n; ++e) {
      t.words[e].bits = static_cast<std::uint16_t>(p[2 * e] | (p[2 * e + 1] << 8));
    }
  }
  return tensors;
}

void write_container(const std::filesystem::path& path, std::span<const NamedTensor> tensors) {
  const auto bytes = serialize_container(tensors);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::vector<NamedTensor> read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open weight file '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_container(bytes);
}

}  // namespace cimfault
