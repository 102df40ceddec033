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

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "transclip/io.hpp"
#include "transclip/pseudo_label.hpp"

namespace transclip {

// Zero-shot versus transductive accuracy, in percent.
struct EvalReport {
  bool has_truth = false;
  double zero_shot_acc = 0.0;
  double transductive_acc = 0.0;
  double delta = 0.0;
  // Share of patches where argmax(y_hat) == argmax(z), in percent.
  double agreement = 0.0;
  std::size_t n = 0;
  std::size_t k_classes = 0;
  // Transductive recall per class; empty optional for classes absent from the truth.
  std::vector<std::optional<double>> per_class_recall;
  std::vector<std::optional<double>> zero_shot_per_class_recall;
};

double top1_accuracy(const LabelVector& pred, const LabelVector& truth);

std::vector<std::optional<double>> per_class_recall(const LabelVector& pred,
                                                    const LabelVector& truth, std::size_t k);

EvalReport compare(const DMatrix& y_hat, const DMatrix& z_final, const LabelVector& truth);
// Without ground truth only the agreement rate is filled in.
EvalReport compare(const DMatrix& y_hat, const DMatrix& z_final);

// Mean of each accuracy column, as in an "Average" table row.
EvalReport average(std::span<const EvalReport> reports);

nlohmann::json to_json(const EvalReport& report);

// "<name>  zero-shot 63.17 -> transductive 77.53  (+14.36)"
std::string format_row(const std::string& name, const EvalReport& report);

}  // namespace transclip
