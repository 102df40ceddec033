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
#include <span>
#include <vector>

#include "transclip/eval.hpp"
#include "transclip/io.hpp"
#include "transclip/solver.hpp"

namespace transclip {

// Gaussian class clusters on the unit sphere with perturbed text anchors.
struct SynthSpec {
  std::size_t n = 1000;
  std::size_t d = 64;
  std::size_t k_classes = 4;
  // Per-coordinate standard deviation of the noise added to a class mean
  // before re-normalization.
  double intra_spread = 0.2;
  double anchor_noise = 0.35;
  // Empty means uniform.
  std::vector<double> class_proportions;
  std::uint64_t seed = 0;
  double temperature = 100.0;

  void validate() const;
};

// Upper bound on the cosine between two true class means.
inline constexpr double kMaxMeanCosine = 0.5;

struct SynthTask {
  FeatureMatrix features;
  ClassAnchors anchors;
  LabelVector labels;
  DMatrix true_means;
};

SynthTask generate(const SynthSpec& spec);

struct BenchmarkSummary {
  std::vector<EvalReport> reports;
  std::vector<StageTimings> timings;
  double mean_delta = 0.0;
  double min_delta = 0.0;
  double max_delta = 0.0;
  double mean_zero_shot = 0.0;
  double mean_transductive = 0.0;
};

// generate + solve + compare for each seed (spec.seed is ignored).
BenchmarkSummary benchmark_suite(std::span<const std::uint64_t> seeds, const SynthSpec& spec,
                                 const SolverConfig& config);

}  // namespace transclip
