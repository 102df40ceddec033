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

#include "transclip/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "transclip/errors.hpp"
#include "transclip/parallel.hpp"

namespace transclip {

namespace {

constexpr std::size_t kMaxMeanAttempts = 10000;

enum Stream : std::uint64_t { kMeans = 1, kLabels = 2, kPatches = 3, kAnchors = 4 };

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent engine per (seed, stream, chunk).
std::mt19937_64 engine(std::uint64_t seed, std::uint64_t stream, std::uint64_t chunk = 0) {
  return std::mt19937_64(splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ chunk));
}

void write_perturbed(std::span<const double> mean, double scale, std::mt19937_64& rng,
                     std::normal_distribution<double>& gauss, std::span<float> out) {
  std::vector<double> v(mean.begin(), mean.end());
  double norm = 0.0;
  for (double& x : v) {
    if (scale > 0.0) x += scale * gauss(rng);
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (std::size_t j = 0; j < v.size(); ++j) out[j] = static_cast<float>(v[j] / norm);
}

}  // namespace

void SynthSpec::validate() const {
  if (n < 2) throw ConfigError("synth: n must be >= 2");
  if (d < 2) throw ConfigError("synth: d must be >= 2");
  if (k_classes < 2) throw ConfigError("synth: k_classes must be >= 2");
  if (!(intra_spread >= 0.0) || !(anchor_noise >= 0.0)) {
    throw ConfigError("synth: noise scales must be >= 0");
  }
  if (!(temperature > 0.0)) throw ConfigError("synth: temperature must be > 0");
  if (!class_proportions.empty()) {
    if (class_proportions.size() != k_classes) {
      throw ConfigError("synth: class_proportions must have k_classes entries");
    }
    double total = 0.0;
    for (double p : class_proportions) {
      if (!(p >= 0.0)) throw ConfigError("synth: negative class proportion");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("synth: class_proportions must sum to 1");
  }
}

SynthTask generate(const SynthSpec& spec) {
  spec.validate();
  const std::size_t n = spec.n;
  const std::size_t d = spec.d;
  const std::size_t k = spec.k_classes;
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Uniform directions with pairwise cosine below kMaxMeanCosine.
  DMatrix means(k, d);
  {
    auto rng = engine(spec.seed, kMeans);
    for (std::size_t c = 0; c < k; ++c) {
      bool placed = false;
      for (std::size_t attempt = 0; attempt < kMaxMeanAttempts && !placed; ++attempt) {
        auto row = means.row(c);
        double norm = 0.0;
        for (double& x : row) {
          x = gauss(rng);
          norm += x * x;
        }
        norm = std::sqrt(norm);
        for (double& x : row) x /= norm;
        placed = true;
        for (std::size_t p = 0; p < c && placed; ++p) {
          double dot = 0.0;
          for (std::size_t j = 0; j < d; ++j) dot += row[j] * means(p, j);
          placed = dot < kMaxMeanCosine;
        }
      }
      if (!placed) {
        throw InfeasibleSpecError("synth: could not place " + std::to_string(k) +
                                  " class means with pairwise cosine < 0.5 in dimension " +
                                  std::to_string(d));
      }
    }
  }

  LabelVector labels(n);
  {
    std::vector<double> props = spec.class_proportions;
    if (props.empty()) props.assign(k, 1.0 / static_cast<double>(k));
    auto rng = engine(spec.seed, kLabels);
    std::discrete_distribution<std::int32_t> pick(props.begin(), props.end());
    for (auto& l : labels) l = pick(rng);
  }

  FMatrix patches(n, d);
  parallel_rows(n, [&](std::size_t begin, std::size_t end) {
    auto rng = engine(spec.seed, kPatches, begin / kRowChunk);
    std::normal_distribution<double> g(0.0, 1.0);
    for (std::size_t i = begin; i < end; ++i) {
      write_perturbed(means.row(static_cast<std::size_t>(labels[i])), spec.intra_spread, rng, g,
                      patches.row(i));
    }
  });

  FMatrix anchors(k, d);
  {
    auto rng = engine(spec.seed, kAnchors);
    for (std::size_t c = 0; c < k; ++c) {
      write_perturbed(means.row(c), spec.anchor_noise, rng, gauss, anchors.row(c));
    }
  }

  return SynthTask{FeatureMatrix::ingest(std::move(patches)),
                   ClassAnchors::ingest(std::move(anchors), spec.temperature), std::move(labels),
                   std::move(means)};
}

BenchmarkSummary benchmark_suite(std::span<const std::uint64_t> seeds, const SynthSpec& spec,
                                 const SolverConfig& config) {
  if (seeds.empty()) throw ConfigError("benchmark: need at least one seed");
  BenchmarkSummary out;
  for (std::uint64_t seed : seeds) {
    SynthSpec s = spec;
    s.seed = seed;
    const SynthTask task = generate(s);
    const SolveReport report = solve(task.features, task.anchors, config);
    out.reports.push_back(compare(report.y_hat.probs, report.z_final, task.labels));
    out.timings.push_back(report.timings);
  }
  out.min_delta = out.max_delta = out.reports.front().delta;
  for (const EvalReport& r : out.reports) {
    out.mean_delta += r.delta;
    out.mean_zero_shot += r.zero_shot_acc;
    out.mean_transductive += r.transductive_acc;
    out.min_delta = std::min(out.min_delta, r.delta);
    out.max_delta = std::max(out.max_delta, r.delta);
  }
  const double m = static_cast<double>(out.reports.size());
  out.mean_delta /= m;
  out.mean_zero_shot /= m;
  out.mean_transductive /= m;
  return out;
}

}  // namespace transclip
