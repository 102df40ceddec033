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

#include <span>

#include "transclip/io.hpp"
#include "transclip/matrix.hpp"

namespace transclip {

// Lower bound applied to softmax outputs so that log(y_hat) stays finite.
inline constexpr double kProbabilityFloor = 1e-30;

// Zero-shot text predictions: row i is softmax(tau * f_i . t_k) over k.
struct PseudoLabels {
  DMatrix probs;
  std::size_t n() const { return probs.rows(); }
  std::size_t k() const { return probs.cols(); }
};

PseudoLabels compute_pseudo_labels(const FeatureMatrix& features, const ClassAnchors& anchors);

// Max-shifted softmax of one row of logits, in place, floored at kProbabilityFloor.
void softmax_inplace(std::span<double> logits);

// Index of the largest entry; ties go to the lowest index.
std::int32_t argmax(std::span<const double> row);

LabelVector argmax_rows(const DMatrix& probs);

inline LabelVector zero_shot_argmax(const PseudoLabels& y_hat) { return argmax_rows(y_hat.probs); }

}  // namespace transclip
