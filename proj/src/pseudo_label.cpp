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

#include "transclip/pseudo_label.hpp"

#include <algorithm>
#include <cmath>

#include "transclip/errors.hpp"
#include "transclip/parallel.hpp"

namespace transclip {

void softmax_inplace(std::span<double> logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double& v : logits) {
    v = std::exp(v - top);
    total += v;
  }
  for (double& v : logits) v = std::max(v / total, kProbabilityFloor);
}

std::int32_t argmax(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < row.size(); ++k) {
    if (row[k] > row[best]) best = k;
  }
  return static_cast<std::int32_t>(best);
}

LabelVector argmax_rows(const DMatrix& probs) {
  LabelVector out(probs.rows());
  for (std::size_t i = 0; i < probs.rows(); ++i) out[i] = argmax(probs.row(i));
  return out;
}

PseudoLabels compute_pseudo_labels(const FeatureMatrix& features, const ClassAnchors& anchors) {
  if (features.d() != anchors.d()) {
    throw ShapeError("feature dimension " + std::to_string(features.d()) +
                     " does not match anchor dimension " + std::to_string(anchors.d()));
  }
  const std::size_t n = features.n();
  const std::size_t k = anchors.k();
  const std::size_t d = features.d();
  const double tau = anchors.temperature;

  // Anchors in double once; rows are then independent.
  const DMatrix t = anchors.anchors.cast<double>();
  PseudoLabels out{DMatrix(n, k)};
  parallel_rows(n, [&](std::size_t begin, std::size_t end) {
    std::vector<double> f(d);
    for (std::size_t i = begin; i < end; ++i) {
      auto src = features.row(i);
      std::copy(src.begin(), src.end(), f.begin());
      auto logits = out.probs.row(i);
      for (std::size_t c = 0; c < k; ++c) {
        auto tc = t.row(c);
        double dot = 0.0;
        for (std::size_t j = 0; j < d; ++j) dot += f[j] * tc[j];
        logits[c] = tau * dot;
      }
      softmax_inplace(logits);
    }
  });
  return out;
}

}  // namespace transclip
