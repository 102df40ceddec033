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

#include "transclip/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Core>
#include <spdlog/spdlog.h>

#include "transclip/errors.hpp"
#include "transclip/parallel.hpp"

namespace transclip {

namespace {

void check_shapes(const FeatureMatrix& features, const DMatrix& z) {
  if (z.rows() != features.n()) {
    throw ShapeError("assignments have " + std::to_string(z.rows()) + " rows, features have " +
                     std::to_string(features.n()));
  }
}

}  // namespace

void GmmState::validate() const {
  if (sigma_diag.size() != mu.cols()) {
    throw StateCorruptionError("gmm: sigma has " + std::to_string(sigma_diag.size()) +
                               " entries for dimension " + std::to_string(mu.cols()));
  }
  if (!(variance_floor > 0.0)) throw StateCorruptionError("gmm: variance floor must be positive");
  for (std::size_t j = 0; j < sigma_diag.size(); ++j) {
    if (!(sigma_diag[j] > 0.0) || !std::isfinite(sigma_diag[j])) {
      throw StateCorruptionError("gmm: non-positive variance " + std::to_string(sigma_diag[j]) +
                                 " at dimension " + std::to_string(j));
    }
  }
}

double GmmState::log_det() const {
  double s = 0.0;
  for (double v : sigma_diag) s += std::log(v);
  return s;
}

DMatrix log_likelihood(const FeatureMatrix& features, const GmmState& state) {
  state.validate();
  if (features.d() != state.d()) {
    throw ShapeError("gmm dimension " + std::to_string(state.d()) + " does not match features " +
                     std::to_string(features.d()));
  }
  const std::size_t n = features.n();
  const std::size_t k = state.k();
  const std::size_t d = state.d();
  std::vector<double> inv(d);
  for (std::size_t j = 0; j < d; ++j) inv[j] = 1.0 / state.sigma_diag[j];

  DMatrix out(n, k);
  const auto dd = static_cast<Eigen::Index>(d);
  const Eigen::Map<const Eigen::ArrayXd> iv(inv.data(), dd);
  parallel_rows(n, [&](std::size_t begin, std::size_t end) {
    Eigen::ArrayXd f(dd);
    for (std::size_t i = begin; i < end; ++i) {
      f = Eigen::Map<const Eigen::ArrayXf>(features.row(i).data(), dd).cast<double>();
      for (std::size_t c = 0; c < k; ++c) {
        const Eigen::Map<const Eigen::ArrayXd> m(state.mu.data() + c * d, dd);
        out(i, c) = -0.5 * ((f - m).square() * iv).sum();
      }
    }
  });
  return out;
}

DMatrix normalize_log_rows(const DMatrix& log_p) {
  DMatrix out = log_p;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto row = out.row(i);
    const double top = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (double v : row) total += std::exp(v - top);
    const double lse = top + std::log(total);
    for (double& v : row) v -= lse;
  }
  return out;
}

std::size_t default_n_confident(std::size_t n, std::size_t k) {
  return std::max<std::size_t>(1, n / (8 * std::max<std::size_t>(k, 1)));
}

GmmState init_state(const FeatureMatrix& features, const PseudoLabels& y_hat,
                    std::size_t n_confident, double variance_floor) {
  const std::size_t n = features.n();
  const std::size_t d = features.d();
  const std::size_t k = y_hat.k();
  if (y_hat.n() != n) throw ShapeError("pseudo-labels and features disagree on N");
  n_confident = std::clamp<std::size_t>(n_confident, 1, n);

  GmmState state;
  state.mu = DMatrix(k, d, 0.0);
  state.sigma_diag.assign(d, 1.0 / static_cast<double>(d));
  state.variance_floor = variance_floor;

  std::vector<std::size_t> order(n);
  for (std::size_t c = 0; c < k; ++c) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_confident),
                      order.end(), [&](std::size_t a, std::size_t b) {
                        const double ya = y_hat.probs(a, c);
                        const double yb = y_hat.probs(b, c);
                        return ya > yb || (ya == yb && a < b);
                      });
    auto m = state.mu.row(c);
    for (std::size_t r = 0; r < n_confident; ++r) {
      auto f = features.row(order[r]);
      for (std::size_t j = 0; j < d; ++j) m[j] += f[j];
    }
    for (double& v : m) v /= static_cast<double>(n_confident);
  }
  return state;
}

DMatrix update_means(const FeatureMatrix& features, const DMatrix& z, const DMatrix& previous_mu,
                     std::vector<std::string>* warnings) {
  check_shapes(features, z);
  const std::size_t n = features.n();
  const std::size_t d = features.d();
  const std::size_t k = z.cols();
  if (previous_mu.rows() != k || previous_mu.cols() != d) {
    throw ShapeError("update_means: previous means must be K x D");
  }

  const std::size_t chunks = chunk_count(n);
  std::vector<DMatrix> sums(chunks);
  std::vector<std::vector<double>> masses(chunks);
  parallel_for(chunks, [&](std::size_t ch) {
    const std::size_t begin = ch * kRowChunk;
    const std::size_t end = std::min(n, begin + kRowChunk);
    DMatrix s(k, d, 0.0);
    std::vector<double> m(k, 0.0);
    for (std::size_t i = begin; i < end; ++i) {
      auto f = features.row(i);
      for (std::size_t c = 0; c < k; ++c) {
        const double w = z(i, c);
        m[c] += w;
        double* dst = s.data() + c * d;
        for (std::size_t j = 0; j < d; ++j) dst[j] += w * f[j];
      }
    }
    sums[ch] = std::move(s);
    masses[ch] = std::move(m);
  });

  DMatrix total(k, d, 0.0);
  std::vector<double> mass(k, 0.0);
  for (std::size_t ch = 0; ch < chunks; ++ch) {
    for (std::size_t c = 0; c < k; ++c) mass[c] += masses[ch][c];
    for (std::size_t e = 0; e < total.size(); ++e) total.data()[e] += sums[ch].data()[e];
  }

  DMatrix mu(k, d);
  for (std::size_t c = 0; c < k; ++c) {
    if (mass[c] < kEmptyClassMass) {
      const std::string msg = "class " + std::to_string(c) + " has assignment mass " +
                              std::to_string(mass[c]) + "; keeping its previous mean";
      spdlog::warn("{}", msg);
      if (warnings) warnings->push_back(msg);
      std::copy(previous_mu.row(c).begin(), previous_mu.row(c).end(), mu.row(c).begin());
      continue;
    }
    for (std::size_t j = 0; j < d; ++j) mu(c, j) = total(c, j) / mass[c];
  }
  return mu;
}

std::vector<double> update_covariance(const FeatureMatrix& features, const DMatrix& z,
                                      const DMatrix& mu, double variance_floor) {
  check_shapes(features, z);
  const std::size_t n = features.n();
  const std::size_t d = features.d();
  const std::size_t k = z.cols();
  if (mu.rows() != k || mu.cols() != d) throw ShapeError("update_covariance: means must be K x D");

  const std::size_t chunks = chunk_count(n);
  std::vector<std::vector<double>> partial(chunks);
  parallel_for(chunks, [&](std::size_t ch) {
    const std::size_t begin = ch * kRowChunk;
    const std::size_t end = std::min(n, begin + kRowChunk);
    std::vector<double> acc(d, 0.0);
    std::vector<double> f(d);
    for (std::size_t i = begin; i < end; ++i) {
      auto src = features.row(i);
      std::copy(src.begin(), src.end(), f.begin());
      for (std::size_t c = 0; c < k; ++c) {
        const double w = z(i, c);
        const double* m = mu.data() + c * d;
        for (std::size_t j = 0; j < d; ++j) {
          const double r = f[j] - m[j];
          acc[j] += w * r * r;
        }
      }
    }
    partial[ch] = std::move(acc);
  });

  std::vector<double> sigma(d, 0.0);
  for (const auto& p : partial) {
    for (std::size_t j = 0; j < d; ++j) sigma[j] += p[j];
  }
  for (double& v : sigma) v = std::max(v / static_cast<double>(n), variance_floor);
  return sigma;
}

}  // namespace transclip
