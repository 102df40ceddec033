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
#include <vector>

namespace transclip::detail {

// True when the CPU has AMX-TILE and AMX-BF16 and the kernel grants this
// process the tile data state.
bool bf16_tiles_supported();

// bf16 copies of a row-major float matrix, packed for tile loads. Rows are
// padded to a multiple of 32 and columns to a multiple of 32 with zeros.
class Bf16Panels {
 public:
  Bf16Panels(const float* data, std::size_t n, std::size_t d);

  static constexpr std::size_t kAlign = 32;
  static std::size_t round_up(std::size_t v) { return (v + kAlign - 1) / kAlign * kAlign; }

  // out[r * ld + c] = <row i0 + r, row j0 + c> for r < round_up(ni), c < round_up(nj),
  // accumulated in fp32. i0 and j0 must be multiples of 32; ld >= round_up(nj).
  void multiply(std::size_t i0, std::size_t ni, std::size_t j0, std::size_t nj, float* out,
                std::size_t ld) const;

 private:
  std::size_t n_pad_ = 0;
  std::size_t k_chunks_ = 0;
  // Tile (g, kc) of 16 rows x 32 bf16 is stored contiguously at (g * k_chunks_ + kc) * 512.
  std::vector<std::uint16_t> rows_;
  // Same tiling in the pair-interleaved layout the right operand needs.
  std::vector<std::uint16_t> cols_;
};

}  // namespace transclip::detail
