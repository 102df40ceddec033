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

#include "transclip/npy.hpp"

#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <limits>
#include <optional>

#include "transclip/errors.hpp"

namespace transclip::npy {

static_assert(std::endian::native == std::endian::little,
              "payloads are read and written in host byte order");

namespace {

constexpr char kMagic[] = "\x93NUMPY";
constexpr std::size_t kMagicLen = 6;
constexpr std::size_t kAlign = 64;

class DictParser {
 public:
  explicit DictParser(const std::string& text) : s_(text) {}

  Header parse() {
    std::optional<std::string> descr;
    std::optional<bool> fortran;
    std::optional<std::vector<std::size_t>> shape;

    expect('{');
    for (;;) {
      skip_ws();
      if (peek() == '}') {
        ++pos_;
        break;
      }
      const std::string key = parse_string();
      expect(':');
      if (key == "descr") {
        descr = parse_string();
      } else if (key == "fortran_order") {
        fortran = parse_bool();
      } else if (key == "shape") {
        shape = parse_shape();
      } else {
        fail("unexpected key '" + key + "'");
      }
      skip_ws();
      if (peek() == ',') {
        ++pos_;
      } else if (peek() != '}') {
        fail("expected ',' or '}'");
      }
    }
    if (!descr || !fortran || !shape) fail("missing descr, fortran_order or shape");
    if (*fortran) throw FormatError("npy: fortran_order=True is not supported");

    Header h;
    h.dtype = parse_descr(*descr);
    h.shape = std::move(*shape);
    return h;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError("npy header: " + what + " at offset " +
                      std::to_string(pos_) + " in \"" + s_ + "\"");
  }

  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  void expect(char c) {
    skip_ws();
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::string parse_string() {
    skip_ws();
    const char quote = peek();
    if (quote != '\'' && quote != '"') fail("expected string");
    const std::size_t end = s_.find(quote, pos_ + 1);
    if (end == std::string::npos) fail("unterminated string");
    std::string out = s_.substr(pos_ + 1, end - pos_ - 1);
    pos_ = end + 1;
    return out;
  }

  bool parse_bool() {
    skip_ws();
    if (s_.compare(pos_, 4, "True") == 0) {
      pos_ += 4;
      return true;
    }
    if (s_.compare(pos_, 5, "False") == 0) {
      pos_ += 5;
      return false;
    }
    fail("expected True or False");
  }

  std::vector<std::size_t> parse_shape() {
    expect('(');
    std::vector<std::size_t> dims;
    for (;;) {
      skip_ws();
      if (peek() == ')') {
        ++pos_;
        return dims;
      }
      if (!std::isdigit(static_cast<unsigned char>(peek()))) fail("expected dimension");
      std::size_t v = 0;
      while (std::isdigit(static_cast<unsigned char>(peek()))) {
        const std::size_t digit = static_cast<std::size_t>(s_[pos_] - '0');
        if (v > (std::numeric_limits<std::size_t>::max() - digit) / 10) fail("dimension overflow");
        v = v * 10 + digit;
        ++pos_;
      }
      // numpy writes a trailing 'L' on some python2 exports
      if (peek() == 'L') ++pos_;
      dims.push_back(v);
      skip_ws();
      if (peek() == ',') {
        ++pos_;
      } else if (peek() != ')') {
        fail("expected ',' or ')'");
      }
    }
  }

  static Dtype parse_descr(const std::string& d) {
    if (d == "<f4") return Dtype::kFloat32;
    if (d == "<f8") return Dtype::kFloat64;
    if (d == "<i4") return Dtype::kInt32;
    if (d == "<i8") return Dtype::kInt64;
    throw UnsupportedDtypeError("npy: unsupported dtype '" + d +
                                "' (expected <f4, <f8, <i4 or <i8)");
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

std::string shape_text(const std::vector<std::size_t>& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape[i]);
  }
  if (shape.size() == 1) out += ",";
  out += ")";
  return out;
}

std::uint32_t read_le(const unsigned char* p, std::size_t n) {
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < n; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace

std::size_t dtype_size(Dtype dtype) {
  switch (dtype) {
    case Dtype::kFloat32:
    case Dtype::kInt32:
      return 4;
    case Dtype::kFloat64:
    case Dtype::kInt64:
      return 8;
  }
  return 0;
}

std::string dtype_descr(Dtype dtype) {
  switch (dtype) {
    case Dtype::kFloat32: return "<f4";
    case Dtype::kFloat64: return "<f8";
    case Dtype::kInt32: return "<i4";
    case Dtype::kInt64: return "<i8";
  }
  return "";
}

std::size_t Header::element_count() const {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d != 0 && n > std::numeric_limits<std::size_t>::max() / d) {
      throw FormatError("npy: shape overflows addressable size");
    }
    n *= d;
  }
  return n;
}

Header parse_header_dict(const std::string& dict) { return DictParser(dict).parse(); }

std::string make_preamble(const Header& header) {
  std::string dict = "{'descr': '" + dtype_descr(header.dtype) +
                     "', 'fortran_order': False, 'shape': " + shape_text(header.shape) +
                     ", }";
  // magic(6) + version(2) + length(2) + dict + '\n' padded to kAlign
  const std::size_t unpadded = kMagicLen + 4 + dict.size() + 1;
  const std::size_t padded = (unpadded + kAlign - 1) / kAlign * kAlign;
  dict.append(padded - unpadded, ' ');
  dict.push_back('\n');
  if (dict.size() > 0xFFFF) throw FormatError("npy: header too long for version 1.0");

  std::string out(kMagic, kMagicLen);
  out.push_back('\x01');
  out.push_back('\x00');
  out.push_back(static_cast<char>(dict.size() & 0xFF));
  out.push_back(static_cast<char>((dict.size() >> 8) & 0xFF));
  out += dict;
  return out;
}

Array read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("npy: cannot open '" + path.string() + "'");

  unsigned char pre[12] = {};
  in.read(reinterpret_cast<char*>(pre), 10);
  if (in.gcount() != 10 || std::memcmp(pre, kMagic, kMagicLen) != 0) {
    throw FormatError("npy: '" + path.string() + "' lacks the NUMPY magic string");
  }
  const int major = pre[6];
  std::size_t header_len = 0;
  std::size_t offset = 10;
  if (major == 1) {
    header_len = read_le(pre + 8, 2);
  } else if (major == 2 || major == 3) {
    in.read(reinterpret_cast<char*>(pre + 10), 2);
    if (in.gcount() != 2) throw FormatError("npy: '" + path.string() + "' truncated header");
    header_len = read_le(pre + 8, 4);
    offset = 12;
  } else {
    throw FormatError("npy: '" + path.string() + "' has unknown version " +
                      std::to_string(major));
  }

  std::string dict(header_len, '\0');
  in.read(dict.data(), static_cast<std::streamsize>(header_len));
  if (static_cast<std::size_t>(in.gcount()) != header_len) {
    throw FormatError("npy: '" + path.string() + "' truncated header");
  }

  Array array;
  try {
    array.header = parse_header_dict(dict);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const UnsupportedDtypeError& e) {
    throw UnsupportedDtypeError(path.string() + ": " + e.what());
  }

  const std::size_t count = array.header.element_count();
  const std::size_t expected = count * dtype_size(array.header.dtype);
  const auto file_size = std::filesystem::file_size(path);
  const std::size_t available = file_size - (offset + header_len);
  if (available != expected) {
    throw CorruptionError("npy: '" + path.string() + "' payload holds " +
                          std::to_string(available) + " bytes, header declares " +
                          std::to_string(expected));
  }
  array.payload.resize(expected);
  in.read(reinterpret_cast<char*>(array.payload.data()), static_cast<std::streamsize>(expected));
  if (static_cast<std::size_t>(in.gcount()) != expected) {
    throw CorruptionError("npy: '" + path.string() + "' short read");
  }
  return array;
}

void write(const std::filesystem::path& path, const Header& header,
           std::span<const std::byte> payload) {
  if (payload.size() != header.element_count() * dtype_size(header.dtype)) {
    throw ShapeError("npy: payload size does not match declared shape for '" +
                     path.string() + "'");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("npy: cannot open '" + path.string() + "' for writing");
  const std::string preamble = make_preamble(header);
  out.write(preamble.data(), static_cast<std::streamsize>(preamble.size()));
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size()));
  if (!out) throw FormatError("npy: write failed for '" + path.string() + "'");
}

}  // namespace transclip::npy
