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

#include "transclip/eval.hpp"

#include <fmt/format.h>

#include "transclip/errors.hpp"

namespace transclip {

double top1_accuracy(const LabelVector& pred, const LabelVector& truth) {
  if (pred.size() != truth.size()) {
    throw ShapeError("accuracy: " + std::to_string(pred.size()) + " predictions for " +
                     std::to_string(truth.size()) + " labels");
  }
  if (pred.empty()) throw ShapeError("accuracy: empty label vectors");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i];
  return 100.0 * static_cast<double>(hits) / static_cast<double>(pred.size());
}

std::vector<std::optional<double>> per_class_recall(const LabelVector& pred,
                                                    const LabelVector& truth, std::size_t k) {
  if (pred.size() != truth.size()) throw ShapeError("recall: length mismatch");
  validate_labels(truth, k);
  std::vector<std::size_t> support(k, 0);
  std::vector<std::size_t> hits(k, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto c = static_cast<std::size_t>(truth[i]);
    ++support[c];
    hits[c] += pred[i] == truth[i];
  }
  std::vector<std::optional<double>> out(k);
  for (std::size_t c = 0; c < k; ++c) {
    if (support[c]) out[c] = 100.0 * static_cast<double>(hits[c]) / static_cast<double>(support[c]);
  }
  return out;
}

EvalReport compare(const DMatrix& y_hat, const DMatrix& z_final) {
  if (y_hat.rows() != z_final.rows() || y_hat.cols() != z_final.cols()) {
    throw ShapeError("compare: pseudo-labels and assignments differ in shape");
  }
  EvalReport r;
  r.n = y_hat.rows();
  r.k_classes = y_hat.cols();
  const LabelVector zs = argmax_rows(y_hat);
  const LabelVector tr = argmax_rows(z_final);
  r.agreement = top1_accuracy(tr, zs);
  return r;
}

EvalReport compare(const DMatrix& y_hat, const DMatrix& z_final, const LabelVector& truth) {
  EvalReport r = compare(y_hat, z_final);
  if (truth.size() != r.n) {
    throw ShapeError("compare: " + std::to_string(truth.size()) + " labels for " +
                     std::to_string(r.n) + " patches");
  }
  validate_labels(truth, r.k_classes);
  const LabelVector zs = argmax_rows(y_hat);
  const LabelVector tr = argmax_rows(z_final);
  r.has_truth = true;
  r.zero_shot_acc = top1_accuracy(zs, truth);
  r.transductive_acc = top1_accuracy(tr, truth);
  r.delta = r.transductive_acc - r.zero_shot_acc;
  r.per_class_recall = per_class_recall(tr, truth, r.k_classes);
  r.zero_shot_per_class_recall = per_class_recall(zs, truth, r.k_classes);
  return r;
}

EvalReport average(std::span<const EvalReport> reports) {
  if (reports.empty()) throw ShapeError("average: no reports");
  EvalReport out;
  out.has_truth = true;
  out.k_classes = reports.front().k_classes;
  for (const EvalReport& r : reports) {
    out.has_truth = out.has_truth && r.has_truth;
    out.zero_shot_acc += r.zero_shot_acc;
    out.transductive_acc += r.transductive_acc;
    out.agreement += r.agreement;
    out.n += r.n;
  }
  const double m = static_cast<double>(reports.size());
  out.zero_shot_acc /= m;
  out.transductive_acc /= m;
  out.agreement /= m;
  out.delta = out.transductive_acc - out.zero_shot_acc;
  return out;
}

nlohmann::json to_json(const EvalReport& report) {
  auto recall_json = [](const std::vector<std::optional<double>>& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& x : v) arr.push_back(x ? nlohmann::json(*x) : nlohmann::json(nullptr));
    return arr;
  };
  nlohmann::json j;
  j["n"] = report.n;
  j["k"] = report.k_classes;
  j["agreement"] = report.agreement;
  if (report.has_truth) {
    j["zero_shot_acc"] = report.zero_shot_acc;
    j["transductive_acc"] = report.transductive_acc;
    j["delta"] = report.delta;
    j["per_class_recall"] = recall_json(report.per_class_recall);
    j["zero_shot_per_class_recall"] = recall_json(report.zero_shot_per_class_recall);
  }
  return j;
}

std::string format_row(const std::string& name, const EvalReport& report) {
  if (!report.has_truth) {
    return fmt::format("{:<16} agreement {:6.2f}", name, report.agreement);
  }
  return fmt::format("{:<16} zero-shot {:6.2f} -> transductive {:6.2f}  ({:+.2f})", name,
                     report.zero_shot_acc, report.transductive_acc, report.delta);
}

}  // namespace transclip
