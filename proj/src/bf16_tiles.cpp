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

#include "bf16_tiles.hpp"

#include <cstring>
#include <stdexcept>

#include "transclip/parallel.hpp"

#if defined(__AMX_TILE__) && defined(__AMX_BF16__)
#include <cpuid.h>
#include <immintrin.h>
#include <sys/syscall.h>
#include <unistd.h>
#define TRANSCLIP_HAVE_AMX 1
#endif

namespace transclip::detail {

#ifdef TRANSCLIP_HAVE_AMX

namespace {

constexpr int kArchReqXcompPerm = 0x1023;
constexpr int kXfeatureTileData = 18;
constexpr std::size_t kTileElems = 16 * 32;

struct alignas(64) TileConfig {
  std::uint8_t palette = 1;
  std::uint8_t start_row = 0;
  std::uint8_t reserved[14] = {};
  std::uint16_t colsb[16] = {};
  std::uint8_t rows[16] = {};
};

bool detect() {
  unsigned a = 0, b = 0, c = 0, d = 0;
  if (!__get_cpuid(1, &a, &b, &c, &d) || !(c & (1u << 27))) return false;  // OSXSAVE
  if (!__get_cpuid_count(7, 0, &a, &b, &c, &d)) return false;
  const bool bf16 = d & (1u << 22);
  const bool tile = d & (1u << 24);
  if (!bf16 || !tile) return false;
  std::uint32_t lo = 0, hi = 0;
  __asm__ volatile("xgetbv" : "=a"(lo), "=d"(hi) : "c"(0));
  const std::uint32_t tile_state = (1u << 17) | (1u << 18);
  if ((lo & tile_state) != tile_state) return false;
  return syscall(SYS_arch_prctl, kArchReqXcompPerm, kXfeatureTileData) == 0;
}

// Round to nearest even. Inputs are finite.
std::uint16_t to_bf16(float x) {
  std::uint32_t u;
  std::memcpy(&u, &x, sizeof u);
  u += 0x7fffu + ((u >> 16) & 1u);
  return static_cast<std::uint16_t>(u >> 16);
}

}  // namespace

bool bf16_tiles_supported() {
  static const bool ok = detect();
  return ok;
}

Bf16Panels::Bf16Panels(const float* data, std::size_t n, std::size_t d)
    : n_pad_(round_up(n)), k_chunks_(round_up(d) / 32) {
  rows_.assign(n_pad_ * k_chunks_ * 32, 0);
  cols_.assign(n_pad_ * k_chunks_ * 32, 0);
  parallel_rows(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const float* src = data + i * d;
      const std::size_t g = i / 16, r = i % 16;
      for (std::size_t j = 0; j < d; ++j) {
        const std::uint16_t v = to_bf16(src[j]);
        const std::size_t tile = (g * k_chunks_ + j / 32) * kTileElems;
        const std::size_t kk = j % 32;
        rows_[tile + r * 32 + kk] = v;
        cols_[tile + (kk / 2) * 32 + r * 2 + kk % 2] = v;
      }
    }
  });
}

void Bf16Panels::multiply(std::size_t i0, std::size_t ni, std::size_t j0, std::size_t nj,
                          float* out, std::size_t ld) const {
  TileConfig cfg;
  for (int t = 0; t < 8; ++t) {
    cfg.colsb[t] = 64;
    cfg.rows[t] = 16;
  }
  _tile_loadconfig(&cfg);
  const std::size_t kc_n = k_chunks_;
  const std::size_t stride = ld * sizeof(float);
  for (std::size_t i = 0; i < round_up(ni); i += 32) {
    const std::uint16_t* a0 = rows_.data() + ((i0 + i) / 16) * kc_n * kTileElems;
    const std::uint16_t* a1 = a0 + kc_n * kTileElems;
    for (std::size_t j = 0; j < round_up(nj); j += 32) {
      const std::uint16_t* b0 = cols_.data() + ((j0 + j) / 16) * kc_n * kTileElems;
      const std::uint16_t* b1 = b0 + kc_n * kTileElems;
      _tile_zero(0);
      _tile_zero(1);
      _tile_zero(2);
      _tile_zero(3);
      for (std::size_t kc = 0; kc < kc_n; ++kc) {
        const std::size_t off = kc * kTileElems;
        _tile_loadd(4, a0 + off, 64);
        _tile_loadd(6, b0 + off, 64);
        _tile_dpbf16ps(0, 4, 6);
        _tile_loadd(7, b1 + off, 64);
        _tile_dpbf16ps(1, 4, 7);
        _tile_loadd(5, a1 + off, 64);
        _tile_dpbf16ps(2, 5, 6);
        _tile_dpbf16ps(3, 5, 7);
      }
      float* c = out + i * ld + j;
      _tile_stored(0, c, stride);
      _tile_stored(1, c + 16, stride);
      _tile_stored(2, c + 16 * ld, stride);
      _tile_stored(3, c + 16 * ld + 16, stride);
    }
  }
  _tile_release();
}

#else

bool bf16_tiles_supported() { return false; }

Bf16Panels::Bf16Panels(const float*, std::size_t, std::size_t) {
  throw std::logic_error("built without AMX support");
}

void Bf16Panels::multiply(std::size_t, std::size_t, std::size_t, std::size_t, float*,
                          std::size_t) const {}

#endif

}  // namespace transclip::detail
