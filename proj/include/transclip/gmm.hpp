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

#include <string>
#include <vector>

#include "transclip/io.hpp"
#include "transclip/matrix.hpp"
#include "transclip/pseudo_label.hpp"

namespace transclip {

inline constexpr double kDefaultVarianceFloor = 1e-8;
// Column mass below which a class is treated as empty.
inline constexpr double kEmptyClassMass = 1e-12;

// Balanced Gaussian mixture: one mean per class and a diagonal covariance
// shared by all classes.
struct GmmState {
  DMatrix mu;                       // K x D
  std::vector<double> sigma_diag;   // D
  double variance_floor = kDefaultVarianceFloor;

  std::size_t k() const { return mu.rows(); }
  std::size_t d() const { return mu.cols(); }
  // Throws StateCorruptionError if any variance is below the floor or non-finite.
  void validate() const;
  // sum_d log sigma_d
  double log_det() const;
};

// -1/2 sum_d (f_id - mu_kd)^2 / sigma_d. The det(Sigma) factor and mixing
// weight are identical across classes and omitted.
DMatrix log_likelihood(const FeatureMatrix& features, const GmmState& state);

// Subtracts the per-row log-sum-exp so that exp(row) sums to one.
DMatrix normalize_log_rows(const DMatrix& log_p);

// Default number of confident patches per class: max(1, floor(N / (8K))).
std::size_t default_n_confident(std::size_t n, std::size_t k);

// mu_k is the mean of the n_confident patches with the highest y_hat(., k),
// ties to the lowest patch index; every variance is 1/D.
GmmState init_state(const FeatureMatrix& features, const PseudoLabels& y_hat,
                    std::size_t n_confident, double variance_floor = kDefaultVarianceFloor);

// Weighted means sum_i z_ik f_i / sum_i z_ik. A class whose mass is below
// kEmptyClassMass keeps its row from previous_mu and a warning is appended.
DMatrix update_means(const FeatureMatrix& features, const DMatrix& z, const DMatrix& previous_mu,
                     std::vector<std::string>* warnings = nullptr);

// (1/N) sum_i sum_k z_ik (f_i - mu_k)^2 per dimension, floored.
std::vector<double> update_covariance(const FeatureMatrix& features, const DMatrix& z,
                                      const DMatrix& mu,
                                      double variance_floor = kDefaultVarianceFloor);

}  // namespace transclip
