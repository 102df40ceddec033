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

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "transclip/io.hpp"
#include "transclip/matrix.hpp"

namespace transclip {

// Directed k-NN graph. Row i stores degree() neighbors j != i with the largest
// cosine similarity f_i . f_j, sorted by (similarity desc, index asc).
class AffinityGraph {
 public:
  AffinityGraph() = default;
  AffinityGraph(std::size_t n, std::size_t k, std::vector<std::int32_t> neighbors,
                std::vector<double> weights);

  std::size_t n() const { return n_; }
  // Requested neighbor count.
  std::size_t k() const { return k_; }
  // Stored neighbors per row: min(k, n - 1).
  std::size_t degree() const { return degree_; }

  std::span<const std::int32_t> neighbors(std::size_t i) const {
    return {neighbors_.data() + i * degree_, degree_};
  }
  std::span<const double> weights(std::size_t i) const {
    return {weights_.data() + i * degree_, degree_};
  }

 private:
  std::size_t n_ = 0;
  std::size_t k_ = 0;
  std::size_t degree_ = 0;
  std::vector<std::int32_t> neighbors_;
  std::vector<double> weights_;
};

// Kernel used to screen candidate neighbors before the exact re-rank. Both
// produce the same graph; they differ only in speed.
enum class Screening { kAuto, kFloat32, kBf16Tiles };

std::string_view screening_name(Screening s);
// Accepts "auto", "fp32" and "bf16"; throws ConfigError otherwise.
Screening parse_screening(std::string_view name);
// Whether kBf16Tiles can run on this machine.
bool bf16_screening_available();

struct KnnStats {
  Screening screening = Screening::kFloat32;
  // Rows whose screened candidate window did not fit and were searched again.
  std::size_t fallback_rows = 0;
};

// Exact blocked search over all pairs. Ties on similarity go to the lowest index.
// Screened similarities carry a worst-case error bound; every candidate within
// twice that bound of the k-th screened value is re-scored in double precision.
AffinityGraph build_knn_graph(const FeatureMatrix& features, std::size_t k,
                              Screening screening = Screening::kAuto, KnnStats* stats = nullptr);

// Row i of the result is sum_j w_ij z_j over the stored neighbors of i.
DMatrix propagate(const AffinityGraph& graph, const DMatrix& z);

// Writes <prefix>_indices.npy (N x k int32) and <prefix>_weights.npy
// (N x k float32); slots beyond degree() hold index -1 and weight 0.
void save_graph(const std::filesystem::path& prefix, const AffinityGraph& graph);

}  // namespace transclip
