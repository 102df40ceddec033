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
#include <optional>
#include <string>
#include <vector>

#include "transclip/affinity.hpp"
#include "transclip/gmm.hpp"
#include "transclip/io.hpp"
#include "transclip/pseudo_label.hpp"

namespace transclip {

struct SolverConfig {
  std::size_t inner_iters = 5;
  std::size_t outer_iters = 10;
  // Threshold on the mean absolute change of z across an outer iteration;
  // also the early-exit threshold on the max change inside the inner loop.
  double tolerance = 1e-6;
  double laplacian_weight = 1.0;
  std::size_t knn = 3;
  // 0 selects default_n_confident(N, K).
  std::size_t n_confident = 0;
  std::int64_t seed = 0;
  double variance_floor = kDefaultVarianceFloor;
  // Overrides the 1/D initial variance. Used to flatten the likelihood.
  std::optional<double> initial_variance;
  // When false the GMM parameters stay at their initial values.
  bool update_gmm = true;
  Screening screening = Screening::kAuto;

  // Throws ConfigError on out-of-range values.
  void validate() const;
};

struct StageTimings {
  double pseudo_labels_ms = 0.0;
  double graph_ms = 0.0;
  double solve_ms = 0.0;
  double total_ms() const { return pseudo_labels_ms + graph_ms + solve_ms; }
};

struct SolveReport {
  DMatrix z_final;
  PseudoLabels y_hat;
  GmmState gmm;
  AffinityGraph graph;
  KnnStats graph_stats;
  // Objective after every outer iteration, in the literal three-term form.
  std::vector<double> objective_trace;
  // The function the alternating updates descend; see descent_objective().
  std::vector<double> descent_trace;
  std::size_t outer_iterations_run = 0;
  bool converged = false;
  // Largest simplex_violation() seen after any outer iteration.
  double max_simplex_violation = 0.0;
  StageTimings timings;
  std::vector<std::string> warnings;
};

// One Jacobi pass: z_i proportional to y_hat_i * exp(log_p_i + lambda * sum_j w_ij z_prev_j).
// Every row reads the frozen z_prev.
DMatrix z_update_pass(const DMatrix& z_prev, const PseudoLabels& y_hat, const DMatrix& log_p,
                      const AffinityGraph& graph, double lambda);

// -(1/N) sum_i z_i.log_p_i - lambda sum_i sum_j w_ij z_i.z_j + sum_i KL(z_i || y_hat_i)
// with log_p row-normalized over classes and 0 log 0 = 0.
double objective(const DMatrix& z, const PseudoLabels& y_hat, const DMatrix& log_p_full,
                 const AffinityGraph& graph, double lambda);

// -sum_i z_i.(ll_i - log_det/2) - (lambda/2) sum_i sum_j w_ij z_i.z_j + sum_i KL(z_i || y_hat_i)
// where ll is the unnormalized log_likelihood(). z_update_pass is its exact
// stationarity condition when W is symmetric, and the mean/covariance updates
// are its exact minimizers, so this is the quantity the solver drives down.
double descent_objective(const DMatrix& z, const PseudoLabels& y_hat, const DMatrix& log_lik,
                         double log_det_sigma, const AffinityGraph& graph, double lambda);

SolveReport solve(const FeatureMatrix& features, const ClassAnchors& anchors,
                  const SolverConfig& config);

inline LabelVector predict(const SolveReport& report) { return argmax_rows(report.z_final); }

// Max over rows of |sum_k z_ik - 1|, or +inf when a negative or non-finite entry exists.
double simplex_violation(const DMatrix& z);

}  // namespace transclip
