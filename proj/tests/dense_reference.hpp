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

// Straightforward dense re-implementation of the solver used as a test oracle.
// Everything lives in nested std::vector<double>; the affinity is the full
// N x N cosine matrix with a zero diagonal.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

namespace reference {

using Mat = std::vector<std::vector<double>>;

struct Options {
  double temperature = 100.0;
  double lambda = 1.0;
  std::size_t inner_iters = 5;
  std::size_t outer_iters = 10;
  double tolerance = 1e-6;
  std::size_t n_confident = 1;
  double variance_floor = 1e-8;
};

struct Result {
  Mat y;
  Mat z;
  Mat mu;
  std::vector<double> sigma;
  std::vector<double> objective;
};

inline Mat to_mat(const float* data, std::size_t rows, std::size_t cols) {
  Mat m(rows, std::vector<double>(cols));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m[i][j] = data[i * cols + j];
  return m;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return s;
}

inline Mat pseudo_labels(const Mat& f, const Mat& t, double tau) {
  Mat y(f.size(), std::vector<double>(t.size()));
  for (std::size_t i = 0; i < f.size(); ++i) {
    double top = -INFINITY;
    for (std::size_t k = 0; k < t.size(); ++k) {
      y[i][k] = tau * dot(f[i], t[k]);
      top = std::max(top, y[i][k]);
    }
    double total = 0.0;
    for (double& v : y[i]) total += (v = std::exp(v - top));
    for (double& v : y[i]) v = std::max(v / total, 1e-30);
  }
  return y;
}

inline Mat affinity(const Mat& f) {
  Mat w(f.size(), std::vector<double>(f.size(), 0.0));
  for (std::size_t i = 0; i < f.size(); ++i)
    for (std::size_t j = 0; j < f.size(); ++j)
      if (i != j) w[i][j] = dot(f[i], f[j]);
  return w;
}

inline Mat log_likelihood(const Mat& f, const Mat& mu, const std::vector<double>& sigma) {
  Mat out(f.size(), std::vector<double>(mu.size()));
  for (std::size_t i = 0; i < f.size(); ++i)
    for (std::size_t k = 0; k < mu.size(); ++k) {
      double s = 0.0;
      for (std::size_t d = 0; d < sigma.size(); ++d) {
        s += (f[i][d] - mu[k][d]) * (f[i][d] - mu[k][d]) / sigma[d];
      }
      out[i][k] = -0.5 * s;
    }
  return out;
}

inline Mat normalize_rows_log(Mat l) {
  for (auto& row : l) {
    const double top = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (double v : row) total += std::exp(v - top);
    const double lse = top + std::log(total);
    for (double& v : row) v -= lse;
  }
  return l;
}

inline double objective(const Mat& z, const Mat& y, const Mat& log_p, const Mat& w, double lambda) {
  const std::size_t n = z.size();
  double fit = 0.0;
  double lap = 0.0;
  double kl = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < z[i].size(); ++k) {
      if (z[i][k] > 0.0) {
        fit += z[i][k] * log_p[i][k];
        kl += z[i][k] * std::log(z[i][k] / y[i][k]);
      }
    }
    for (std::size_t j = 0; j < n; ++j) lap += w[i][j] * dot(z[i], z[j]);
  }
  return -fit / static_cast<double>(n) - lambda * lap + kl;
}

inline Result solve(const Mat& f, const Mat& t, const Options& o) {
  const std::size_t n = f.size();
  const std::size_t d = f[0].size();
  const std::size_t kc = t.size();
  Result r;
  r.y = pseudo_labels(f, t, o.temperature);
  const Mat w = affinity(f);

  r.mu.assign(kc, std::vector<double>(d, 0.0));
  for (std::size_t k = 0; k < kc; ++k) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return r.y[a][k] > r.y[b][k]; });
    for (std::size_t s = 0; s < o.n_confident; ++s)
      for (std::size_t j = 0; j < d; ++j) r.mu[k][j] += f[idx[s]][j] / static_cast<double>(o.n_confident);
  }
  r.sigma.assign(d, 1.0 / static_cast<double>(d));
  Mat log_p = normalize_rows_log(log_likelihood(f, r.mu, r.sigma));

  r.z = r.y;
  for (std::size_t outer = 0; outer < o.outer_iters; ++outer) {
    const Mat start = r.z;
    for (std::size_t inner = 0; inner < o.inner_iters; ++inner) {
      Mat next(n, std::vector<double>(kc));
      double max_change = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> logit(kc);
        for (std::size_t k = 0; k < kc; ++k) {
          double prop = 0.0;
          for (std::size_t j = 0; j < n; ++j) prop += w[i][j] * r.z[j][k];
          logit[k] = std::log(r.y[i][k]) + log_p[i][k] + o.lambda * prop;
        }
        const double top = *std::max_element(logit.begin(), logit.end());
        double total = 0.0;
        for (std::size_t k = 0; k < kc; ++k) total += (next[i][k] = std::exp(logit[k] - top));
        for (std::size_t k = 0; k < kc; ++k) {
          next[i][k] /= total;
          max_change = std::max(max_change, std::abs(next[i][k] - r.z[i][k]));
        }
      }
      r.z = next;
      if (max_change <= o.tolerance) break;
    }

    for (std::size_t k = 0; k < kc; ++k) {
      double mass = 0.0;
      std::vector<double> acc(d, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        mass += r.z[i][k];
        for (std::size_t j = 0; j < d; ++j) acc[j] += r.z[i][k] * f[i][j];
      }
      if (mass < 1e-12) continue;
      for (std::size_t j = 0; j < d; ++j) r.mu[k][j] = acc[j] / mass;
    }
    for (std::size_t j = 0; j < d; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < kc; ++k) s += r.z[i][k] * (f[i][j] - r.mu[k][j]) * (f[i][j] - r.mu[k][j]);
      r.sigma[j] = std::max(s / static_cast<double>(n), o.variance_floor);
    }
    log_p = normalize_rows_log(log_likelihood(f, r.mu, r.sigma));
    r.objective.push_back(objective(r.z, r.y, log_p, w, o.lambda));

    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < kc; ++k) change += std::abs(r.z[i][k] - start[i][k]);
    if (change / static_cast<double>(n * kc) <= o.tolerance) break;
  }
  return r;
}

}  // namespace reference
