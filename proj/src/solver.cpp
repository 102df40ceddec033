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

#include "transclip/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include <spdlog/spdlog.h>

#include "transclip/errors.hpp"
#include "transclip/parallel.hpp"

namespace transclip {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

DMatrix log_of(const DMatrix& p) {
  DMatrix out(p.rows(), p.cols());
  for (std::size_t e = 0; e < p.size(); ++e) out.data()[e] = std::log(p.data()[e]);
  return out;
}

void check_pass_shapes(const DMatrix& z, const DMatrix& y, const DMatrix& log_p,
                       const AffinityGraph& graph) {
  if (z.rows() != y.rows() || z.cols() != y.cols() || log_p.rows() != z.rows() ||
      log_p.cols() != z.cols() || graph.n() != z.rows()) {
    throw ShapeError("z update: z, y_hat, log_p and graph must agree on N x K");
  }
}

DMatrix z_update_from_log(const DMatrix& z_prev, const DMatrix& log_y, const DMatrix& log_p,
                          const AffinityGraph& graph, double lambda) {
  const std::size_t n = z_prev.rows();
  const std::size_t k = z_prev.cols();
  DMatrix next(n, k);
  parallel_rows(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      auto out = next.row(i);
      auto ly = log_y.row(i);
      auto lp = log_p.row(i);
      for (std::size_t c = 0; c < k; ++c) out[c] = 0.0;
      auto nb = graph.neighbors(i);
      auto w = graph.weights(i);
      for (std::size_t s = 0; s < nb.size(); ++s) {
        auto zj = z_prev.row(static_cast<std::size_t>(nb[s]));
        for (std::size_t c = 0; c < k; ++c) out[c] += w[s] * zj[c];
      }
      double top = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        out[c] = ly[c] + lp[c] + lambda * out[c];
        if (!std::isfinite(out[c])) {
          throw NumericError("z update: non-finite logit at row " + std::to_string(i) +
                             ", class " + std::to_string(c));
        }
        top = std::max(top, out[c]);
      }
      double total = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        out[c] = std::exp(out[c] - top);
        total += out[c];
      }
      for (std::size_t c = 0; c < k; ++c) out[c] /= total;
    }
  });
  return next;
}

// Sum over fixed row chunks, merged in chunk order.
template <class RowTerm>
double chunked_sum(std::size_t n, RowTerm term) {
  std::vector<double> partial(chunk_count(n), 0.0);
  parallel_for(partial.size(), [&](std::size_t ch) {
    const std::size_t begin = ch * kRowChunk;
    const std::size_t end = std::min(n, begin + kRowChunk);
    double acc = 0.0;
    for (std::size_t i = begin; i < end; ++i) acc += term(i);
    partial[ch] = acc;
  });
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

double kl_row(std::span<const double> z, std::span<const double> y, std::size_t row) {
  double acc = 0.0;
  for (std::size_t c = 0; c < z.size(); ++c) {
    if (z[c] <= 0.0) continue;
    if (y[c] <= 0.0) {
      throw NumericError("objective: infinite KL at row " + std::to_string(row) + ", class " +
                         std::to_string(c));
    }
    acc += z[c] * (std::log(z[c]) - std::log(y[c]));
  }
  return acc;
}

double laplacian_row(const DMatrix& z, const AffinityGraph& graph, std::size_t i) {
  auto zi = z.row(i);
  auto nb = graph.neighbors(i);
  auto w = graph.weights(i);
  double acc = 0.0;
  for (std::size_t s = 0; s < nb.size(); ++s) {
    auto zj = z.row(static_cast<std::size_t>(nb[s]));
    double dot = 0.0;
    for (std::size_t c = 0; c < zi.size(); ++c) dot += zi[c] * zj[c];
    acc += w[s] * dot;
  }
  return acc;
}

void check_objective_shapes(const DMatrix& z, const PseudoLabels& y_hat, const DMatrix& log_p,
                            const AffinityGraph& graph) {
  if (y_hat.probs.rows() != z.rows() || y_hat.probs.cols() != z.cols() ||
      log_p.rows() != z.rows() || log_p.cols() != z.cols() || graph.n() != z.rows()) {
    throw ShapeError("objective: z, y_hat, log_p and graph must agree on N x K");
  }
}

}  // namespace

void SolverConfig::validate() const {
  if (inner_iters < 1) throw ConfigError("inner_iters must be >= 1");
  if (outer_iters < 1) throw ConfigError("outer_iters must be >= 1");
  if (knn < 1) throw ConfigError("knn must be >= 1");
  if (!(tolerance >= 0.0)) throw ConfigError("tolerance must be >= 0");
  if (!(laplacian_weight >= 0.0) || !std::isfinite(laplacian_weight)) {
    throw ConfigError("laplacian_weight must be a finite value >= 0");
  }
  if (!(variance_floor > 0.0)) throw ConfigError("variance_floor must be > 0");
  if (initial_variance && !(*initial_variance > 0.0)) {
    throw ConfigError("initial_variance must be > 0");
  }
}

double simplex_violation(const DMatrix& z) {
  double worst = 0.0;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    double s = 0.0;
    for (double v : z.row(i)) {
      if (!(v >= 0.0) || !std::isfinite(v)) return std::numeric_limits<double>::infinity();
      s += v;
    }
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

DMatrix z_update_pass(const DMatrix& z_prev, const PseudoLabels& y_hat, const DMatrix& log_p,
                      const AffinityGraph& graph, double lambda) {
  check_pass_shapes(z_prev, y_hat.probs, log_p, graph);
  return z_update_from_log(z_prev, log_of(y_hat.probs), log_p, graph, lambda);
}

double objective(const DMatrix& z, const PseudoLabels& y_hat, const DMatrix& log_p_full,
                 const AffinityGraph& graph, double lambda) {
  check_objective_shapes(z, y_hat, log_p_full, graph);
  const std::size_t n = z.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  return chunked_sum(n, [&](std::size_t i) {
    auto zi = z.row(i);
    auto lp = log_p_full.row(i);
    double fit = 0.0;
    for (std::size_t c = 0; c < zi.size(); ++c) {
      if (zi[c] > 0.0) fit += zi[c] * lp[c];
    }
    return -inv_n * fit - lambda * laplacian_row(z, graph, i) +
           kl_row(zi, y_hat.probs.row(i), i);
  });
}

double descent_objective(const DMatrix& z, const PseudoLabels& y_hat, const DMatrix& log_lik,
                         double log_det_sigma, const AffinityGraph& graph, double lambda) {
  check_objective_shapes(z, y_hat, log_lik, graph);
  const double half_log_det = 0.5 * log_det_sigma;
  return chunked_sum(z.rows(), [&](std::size_t i) {
    auto zi = z.row(i);
    auto ll = log_lik.row(i);
    double fit = 0.0;
    for (std::size_t c = 0; c < zi.size(); ++c) {
      if (zi[c] > 0.0) fit += zi[c] * (ll[c] - half_log_det);
    }
    return -fit - 0.5 * lambda * laplacian_row(z, graph, i) + kl_row(zi, y_hat.probs.row(i), i);
  });
}

SolveReport solve(const FeatureMatrix& features, const ClassAnchors& anchors,
                  const SolverConfig& config) {
  config.validate();
  if (features.d() != anchors.d()) {
    throw ShapeError("feature dimension " + std::to_string(features.d()) +
                     " does not match anchor dimension " + std::to_string(anchors.d()));
  }
  const std::size_t n = features.n();
  const std::size_t k = anchors.k();
  const double lambda = config.laplacian_weight;
  SolveReport report;

  auto t = Clock::now();
  report.y_hat = compute_pseudo_labels(features, anchors);
  report.timings.pseudo_labels_ms = elapsed_ms(t);

  t = Clock::now();
  report.graph = build_knn_graph(features, config.knn, config.screening, &report.graph_stats);
  report.timings.graph_ms = elapsed_ms(t);

  t = Clock::now();
  const DMatrix log_y = log_of(report.y_hat.probs);
  DMatrix z = report.y_hat.probs;
  const std::size_t n_confident =
      config.n_confident == 0 ? default_n_confident(n, k) : config.n_confident;
  GmmState state = init_state(features, report.y_hat, n_confident, config.variance_floor);
  if (config.initial_variance) state.sigma_diag.assign(state.d(), *config.initial_variance);

  DMatrix log_lik = log_likelihood(features, state);
  DMatrix log_p = normalize_log_rows(log_lik);

  for (std::size_t outer = 0; outer < config.outer_iters; ++outer) {
    const DMatrix z_start = z;
    for (std::size_t inner = 0; inner < config.inner_iters; ++inner) {
      DMatrix next = z_update_from_log(z, log_y, log_p, report.graph, lambda);
      double max_change = 0.0;
      for (std::size_t e = 0; e < next.size(); ++e) {
        max_change = std::max(max_change, std::abs(next.data()[e] - z.data()[e]));
      }
      z = std::move(next);
      if (max_change <= config.tolerance) break;
    }
    const double violation = simplex_violation(z);
    if (violation > 1e-6) {
      throw NumericError("assignments left the simplex (violation " + std::to_string(violation) + ")");
    }
    report.max_simplex_violation = std::max(report.max_simplex_violation, violation);

    if (config.update_gmm) {
      state.mu = update_means(features, z, state.mu, &report.warnings);
      state.sigma_diag = update_covariance(features, z, state.mu, config.variance_floor);
      log_lik = log_likelihood(features, state);
      log_p = normalize_log_rows(log_lik);
    }
    report.objective_trace.push_back(objective(z, report.y_hat, log_p, report.graph, lambda));
    report.descent_trace.push_back(
        descent_objective(z, report.y_hat, log_lik, state.log_det(), report.graph, lambda));
    ++report.outer_iterations_run;

    double change = 0.0;
    for (std::size_t e = 0; e < z.size(); ++e) change += std::abs(z.data()[e] - z_start.data()[e]);
    change /= static_cast<double>(z.size());
    spdlog::debug("outer {}: objective {:.9g}, mean |dz| {:.3g}", outer + 1,
                  report.objective_trace.back(), change);
    if (change <= config.tolerance) {
      report.converged = true;
      break;
    }
  }
  report.timings.solve_ms = elapsed_ms(t);
  report.z_final = std::move(z);
  report.gmm = std::move(state);
  return report;
}

}  // namespace transclip
