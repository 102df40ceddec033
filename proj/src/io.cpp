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

#include "transclip/io.hpp"

#include <cmath>

#include <spdlog/spdlog.h>

#include "transclip/errors.hpp"
#include "transclip/npy.hpp"

namespace transclip {

namespace {

constexpr double kUnitTolerance = 1e-6;
constexpr double kDegenerateAnchorNorm = 1e-8;

double row_norm(std::span<const float> row) {
  double s = 0.0;
  for (float v : row) s += static_cast<double>(v) * v;
  return std::sqrt(s);
}

void check_finite(const FMatrix& m, const std::string& what) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (float v : m.row(i)) {
      if (!std::isfinite(v)) {
        throw DegenerateInputError(what + ": non-finite entry in row " + std::to_string(i));
      }
    }
  }
}

// Normalizes rows whose norm is off by more than kUnitTolerance; returns the count.
std::size_t normalize_off_unit_rows(FMatrix& m, const std::string& what) {
  std::size_t touched = 0;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto row = m.row(i);
    const double norm = row_norm(row);
    if (norm == 0.0) {
      throw DegenerateInputError(what + ": row " + std::to_string(i) + " is the zero vector");
    }
    if (std::abs(norm - 1.0) > kUnitTolerance) {
      for (float& v : row) v = static_cast<float>(v / norm);
      ++touched;
    }
  }
  return touched;
}

}  // namespace

FeatureMatrix FeatureMatrix::ingest(FMatrix raw) {
  if (raw.rows() < 1 || raw.cols() < 2) {
    throw DegenerateInputError("features: need n >= 1 and d >= 2, got " +
                               std::to_string(raw.rows()) + "x" + std::to_string(raw.cols()));
  }
  check_finite(raw, "features");
  if (const std::size_t touched = normalize_off_unit_rows(raw, "features")) {
    spdlog::info("features: normalized {} of {} rows to unit norm", touched, raw.rows());
  }
  return FeatureMatrix(std::move(raw));
}

ClassAnchors ClassAnchors::ingest(FMatrix raw, double temperature,
                                  std::vector<std::string> class_names) {
  if (raw.rows() < 2) {
    throw DegenerateInputError("anchors: need K >= 2 classes, got " + std::to_string(raw.rows()));
  }
  if (raw.cols() < 2) throw DegenerateInputError("anchors: need d >= 2");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ConfigError("anchors: temperature must be positive, got " + std::to_string(temperature));
  }
  check_finite(raw, "anchors");
  if (const std::size_t touched = normalize_off_unit_rows(raw, "anchors")) {
    spdlog::info("anchors: normalized {} of {} rows to unit norm", touched, raw.rows());
  }
  if (class_names.empty()) {
    for (std::size_t k = 0; k < raw.rows(); ++k) class_names.push_back("class_" + std::to_string(k));
  }
  if (class_names.size() != raw.rows()) {
    throw ShapeError("anchors: " + std::to_string(class_names.size()) + " class names for " +
                     std::to_string(raw.rows()) + " anchors");
  }
  return ClassAnchors{std::move(raw), temperature, std::move(class_names)};
}

FMatrix load_matrix(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw FormatError("no such file: '" + path.string() + "'");
  }
  const npy::Array a = npy::read(path);
  if (a.header.shape.size() != 2) {
    throw FormatError("'" + path.string() + "': expected a 2-D matrix, got " +
                      std::to_string(a.header.shape.size()) + " dimensions");
  }
  const std::size_t rows = a.header.shape[0];
  const std::size_t cols = a.header.shape[1];
  switch (a.header.dtype) {
    case npy::Dtype::kFloat32: {
      auto v = a.as<float>();
      return FMatrix(rows, cols, std::vector<float>(v.begin(), v.end()));
    }
    case npy::Dtype::kFloat64: {
      spdlog::warn("'{}': float64 matrix down-converted to float32", path.string());
      auto v = a.as<double>();
      std::vector<float> out(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
      return FMatrix(rows, cols, std::move(out));
    }
    default:
      throw UnsupportedDtypeError("'" + path.string() + "': matrix dtype must be float32 or float64");
  }
}

void save_matrix(const std::filesystem::path& path, const FMatrix& m) {
  npy::write(path, npy::Dtype::kFloat32, {m.rows(), m.cols()}, std::span<const float>(m.values()));
}

void save_matrix(const std::filesystem::path& path, const DMatrix& m) {
  npy::write(path, npy::Dtype::kFloat64, {m.rows(), m.cols()}, std::span<const double>(m.values()));
}

LabelVector load_labels(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw FormatError("no such file: '" + path.string() + "'");
  }
  const npy::Array a = npy::read(path);
  if (a.header.shape.size() != 1) {
    throw FormatError("'" + path.string() + "': labels must have shape (N,)");
  }
  LabelVector out;
  out.reserve(a.header.shape[0]);
  switch (a.header.dtype) {
    case npy::Dtype::kInt32:
      for (std::int32_t v : a.as<std::int32_t>()) out.push_back(v);
      break;
    case npy::Dtype::kInt64:
      for (std::int64_t v : a.as<std::int64_t>()) {
        if (v < 0 || v > INT32_MAX) {
          throw ShapeError("'" + path.string() + "': label " + std::to_string(v) + " out of range");
        }
        out.push_back(static_cast<std::int32_t>(v));
      }
      break;
    default:
      throw UnsupportedDtypeError("'" + path.string() + "': labels must be int32 or int64");
  }
  return out;
}

void save_labels(const std::filesystem::path& path, const LabelVector& labels) {
  std::vector<std::int64_t> wide(labels.begin(), labels.end());
  npy::write(path, npy::Dtype::kInt64, {labels.size()}, std::span<const std::int64_t>(wide));
}

void validate_labels(const LabelVector& labels, std::size_t k) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) {
      throw ShapeError("label " + std::to_string(labels[i]) + " at index " + std::to_string(i) +
                       " outside [0, " + std::to_string(k) + ")");
    }
  }
}

FMatrix normalize_rows(const FMatrix& m) {
  FMatrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double norm = row_norm(m.row(i));
    if (norm == 0.0 || !std::isfinite(norm)) {
      throw DegenerateInputError("cannot normalize row " + std::to_string(i) +
                                 (norm == 0.0 ? ": zero vector" : ": non-finite norm"));
    }
    auto src = m.row(i);
    auto dst = out.row(i);
    for (std::size_t j = 0; j < src.size(); ++j) dst[j] = static_cast<float>(src[j] / norm);
  }
  return out;
}

double max_norm_deviation(const FMatrix& m) {
  double worst = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    worst = std::max(worst, std::abs(row_norm(m.row(i)) - 1.0));
  }
  return worst;
}

ClassAnchors average_class_prompts(std::span<const FMatrix> prompts_per_class,
                                   double temperature, std::vector<std::string> class_names) {
  if (prompts_per_class.empty()) throw DegenerateInputError("no classes given");
  const std::size_t d = prompts_per_class.front().cols();
  FMatrix anchors(prompts_per_class.size(), d);
  for (std::size_t k = 0; k < prompts_per_class.size(); ++k) {
    const FMatrix& p = prompts_per_class[k];
    if (p.rows() == 0) {
      throw DegenerateInputError("class " + std::to_string(k) + " has no prompt embeddings");
    }
    if (p.cols() != d) {
      throw ShapeError("class " + std::to_string(k) + " prompts have dimension " +
                       std::to_string(p.cols()) + ", expected " + std::to_string(d));
    }
    std::vector<double> mean(d, 0.0);
    for (std::size_t r = 0; r < p.rows(); ++r) {
      auto row = p.row(r);
      for (std::size_t j = 0; j < d; ++j) mean[j] += row[j];
    }
    double norm = 0.0;
    for (double& v : mean) {
      v /= static_cast<double>(p.rows());
      norm += v * v;
    }
    norm = std::sqrt(norm);
    if (norm < kDegenerateAnchorNorm) {
      throw DegenerateInputError("degenerate anchor: class " + std::to_string(k) +
                                 " prompt mean has norm " + std::to_string(norm));
    }
    for (std::size_t j = 0; j < d; ++j) anchors(k, j) = static_cast<float>(mean[j] / norm);
  }
  return ClassAnchors::ingest(std::move(anchors), temperature, std::move(class_names));
}

std::vector<FMatrix> split_prompt_blocks(const FMatrix& stacked, std::size_t prompts_per_class) {
  if (prompts_per_class == 0 || stacked.rows() % prompts_per_class != 0) {
    throw ShapeError("anchor file has " + std::to_string(stacked.rows()) +
                     " rows, not a multiple of prompts_per_class=" +
                     std::to_string(prompts_per_class));
  }
  std::vector<FMatrix> blocks;
  const std::size_t k = stacked.rows() / prompts_per_class;
  const std::size_t d = stacked.cols();
  for (std::size_t c = 0; c < k; ++c) {
    const float* begin = stacked.data() + c * prompts_per_class * d;
    blocks.emplace_back(prompts_per_class, d,
                        std::vector<float>(begin, begin + prompts_per_class * d));
  }
  return blocks;
}

}  // namespace transclip
