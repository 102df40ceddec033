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
#include <string>
#include <vector>

#include "transclip/matrix.hpp"

namespace transclip {

using LabelVector = std::vector<std::int32_t>;

// N x D patch embeddings. Rows are unit norm, entries finite, N >= 1, D >= 2.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;

  // Validates and normalizes the rows that are not already unit norm.
  static FeatureMatrix ingest(FMatrix raw);

  const FMatrix& matrix() const { return data_; }
  std::size_t n() const { return data_.rows(); }
  std::size_t d() const { return data_.cols(); }
  std::span<const float> row(std::size_t i) const { return data_.row(i); }

 private:
  explicit FeatureMatrix(FMatrix m) : data_(std::move(m)) {}
  FMatrix data_;
};

// K x D text anchors with the softmax temperature and display names.
struct ClassAnchors {
  FMatrix anchors;
  double temperature = 1.0;
  std::vector<std::string> class_names;

  std::size_t k() const { return anchors.rows(); }
  std::size_t d() const { return anchors.cols(); }

  // Validates K >= 2 and temperature > 0, normalizes rows, fills default names.
  static ClassAnchors ingest(FMatrix raw, double temperature,
                             std::vector<std::string> class_names = {});
};

// Reads a 2-D float32/float64 matrix. float64 is down-converted with a warning.
FMatrix load_matrix(const std::filesystem::path& path);
void save_matrix(const std::filesystem::path& path, const FMatrix& m);
// Writes float64.
void save_matrix(const std::filesystem::path& path, const DMatrix& m);

// Reads an int32/int64 vector of shape (N,).
LabelVector load_labels(const std::filesystem::path& path);
// Writes int64, the numpy default integer type.
void save_labels(const std::filesystem::path& path, const LabelVector& labels);
// Throws ShapeError when any label lies outside [0, k).
void validate_labels(const LabelVector& labels, std::size_t k);

// Divides each row by its Euclidean norm. Zero rows raise DegenerateInputError.
FMatrix normalize_rows(const FMatrix& m);

// Max over rows of | ||row||_2 - 1 |.
double max_norm_deviation(const FMatrix& m);

// Averages each class's prompt embeddings and re-normalizes the mean.
ClassAnchors average_class_prompts(std::span<const FMatrix> prompts_per_class,
                                   double temperature,
                                   std::vector<std::string> class_names = {});

// Splits a (K*P) x D matrix of class-contiguous prompt rows into K blocks.
std::vector<FMatrix> split_prompt_blocks(const FMatrix& stacked, std::size_t prompts_per_class);

}  // namespace transclip
