// Copyright 2026 The transclip Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
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

namespace transclip::npy {

enum class Dtype { kFloat32, kFloat64, kInt32, kInt64 };

std::size_t dtype_size(Dtype dtype);
// NPY descr string, e.g. "<f4".
std::string dtype_descr(Dtype dtype);

struct Header {
  Dtype dtype = Dtype::kFloat32;
  std::vector<std::size_t> shape;
  std::size_t element_count() const;
};

// Raw array as stored on disk: little-endian, C order.
struct Array {
  Header header;
  std::vector<std::byte> payload;

  template <class T>
  std::span<const T> as() const {
    return {reinterpret_cast<const T*>(payload.data()),
            payload.size() / sizeof(T)};
  }
};

// Parses the header dict text (between the length field and the payload).
Header parse_header_dict(const std::string& dict);
// Builds a version 1.0 preamble (magic, version, length, padded dict).
std::string make_preamble(const Header& header);

Array read(const std::filesystem::path& path);
void write(const std::filesystem::path& path, const Header& header,
           std::span<const std::byte> payload);

template <class T>
void write(const std::filesystem::path& path, Dtype dtype,
           std::vector<std::size_t> shape, std::span<const T> values) {
  write(path, Header{dtype, std::move(shape)}, std::as_bytes(values));
}

}  // namespace transclip::npy
