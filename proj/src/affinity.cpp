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

#include "transclip/affinity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>

#include <Eigen/Core>

#include "bf16_tiles.hpp"
#include "transclip/errors.hpp"
#include "transclip/npy.hpp"
#include "transclip/parallel.hpp"

namespace transclip {

namespace {

using RowMajorF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr std::size_t kBlock = 1024;
// Room per row beyond the k best for candidates inside the error window.
constexpr std::size_t kWindowSlack = 29;
constexpr std::size_t kStrip = 64;
constexpr std::size_t kLockStripes = 4096;
constexpr std::size_t kFallbackBatch = 256;

struct Candidate {
  float sim;
  std::int32_t idx;
};

bool better(const Candidate& a, const Candidate& b) {
  return a.sim > b.sim || (a.sim == b.sim && a.idx < b.idx);
}

// Screened candidates for one row, sorted by better(). Anything below the
// k-th value minus the window can never reach the exact top k and is dropped.
// Candidates pushed out by the capacity limit are remembered by value so that
// a row which lost something inside the final window can be flagged.
class TopList {
 public:
  TopList(std::size_t cap, std::size_t k, float window) : cap_(cap), k_(k), window_(window) {
    items_.reserve(std::min<std::size_t>(cap, 64));
  }

  float floor() const {
    return items_.size() >= k_ ? items_[k_ - 1].sim - window_
                               : -std::numeric_limits<float>::infinity();
  }

  bool overflowed() const { return dropped_any_ && dropped_ >= floor(); }

  void offer(Candidate c) {
    if (c.sim < floor()) return;
    auto pos = std::lower_bound(items_.begin(), items_.end(), c, better);
    if (pos != items_.end() && pos->idx == c.idx) return;
    if (items_.size() == cap_) {
      if (pos == items_.end()) {
        drop(c.sim);
        return;
      }
      drop(items_.back().sim);
      items_.pop_back();
    }
    const bool moves_kth = static_cast<std::size_t>(pos - items_.begin()) < k_;
    items_.insert(pos, c);
    if (moves_kth && items_.size() > k_) {
      const float f = floor();
      while (items_.back().sim < f) items_.pop_back();
    }
  }

  void merge_from(const TopList& other) {
    if (other.dropped_any_) drop(other.dropped_);
    for (const Candidate& c : other.items_) offer(c);
  }

  const std::vector<Candidate>& items() const { return items_; }

 private:
  void drop(float sim) {
    dropped_ = dropped_any_ ? std::max(dropped_, sim) : sim;
    dropped_any_ = true;
  }

  std::size_t cap_;
  std::size_t k_;
  float window_;
  std::vector<Candidate> items_;
  float dropped_ = 0.0f;
  bool dropped_any_ = false;
};

// Each pair (i, j) is scored exactly once in block (min, max); both rows get
// the candidate.
class CandidatePool {
 public:
  CandidatePool(std::size_t n, const TopList& empty)
      : lists_(n, empty), locks_(std::min(n, kLockStripes)) {}

  TopList snapshot(std::size_t row) {
    std::lock_guard lock(mutex_for(row));
    return lists_[row];
  }

  void merge(std::size_t row, const TopList& local) {
    std::lock_guard lock(mutex_for(row));
    lists_[row].merge_from(local);
  }

  const TopList& list(std::size_t row) const { return lists_[row]; }

 private:
  std::mutex& mutex_for(std::size_t row) { return locks_[row % locks_.size()]; }

  std::vector<TopList> lists_;
  std::vector<std::mutex> locks_;
};

double exact_dot(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
#pragma omp simd reduction(+ : s)
  for (std::size_t j = 0; j < a.size(); ++j) s += static_cast<double>(a[j]) * b[j];
  return s;
}

// Worst-case |screened - exact| for a pair of rows with squared norms <= max_sq.
double screening_error(Screening s, std::size_t d, double max_sq) {
  const double u32 = std::ldexp(1.0, -24);
  const double acc = static_cast<double>(d + 2) * u32;
  double rel = acc / (1.0 - acc);
  if (s == Screening::kBf16Tiles) {
    // Each operand is rounded to 8 significant bits; products are exact in fp32.
    const double ub = std::ldexp(1.0, -8);
    rel = 2.0 * ub + ub * ub + rel * (1.0 + ub) * (1.0 + ub);
  }
  return rel * max_sq;
}

// Width below the k-th screened value that still has to be re-scored. Covers
// the error on both sides plus the float rounding of the subtraction.
float window_for(Screening s, std::size_t d, double max_sq) {
  const double w = (2.0 * screening_error(s, d, max_sq) + std::ldexp(max_sq, -22)) * 1.01;
  return std::nextafter(static_cast<float>(w), std::numeric_limits<float>::infinity());
}

// Scans one block of screened similarities into the row lists and, for
// off-diagonal blocks, the column lists. Element-wise work only happens in
// 64-wide strips that contain a value at or above some list floor.
void scan_block(const float* sims, std::size_t ld, std::size_t i0, std::size_t ni, std::size_t j0,
                std::size_t nj, std::vector<TopList>& rows, std::vector<TopList>* cols,
                std::vector<float>& col_floor) {
  for (std::size_t r = 0; r < ni; ++r) {
    TopList& list = rows[r];
    const float* srow = sims + r * ld;
    const auto gi = static_cast<std::int32_t>(i0 + r);
    for (std::size_t c0 = 0; c0 < nj; c0 += kStrip) {
      const std::size_t c1 = std::min(nj, c0 + kStrip);
      const float floor = list.floor();
      int hit = 0;
#pragma omp simd reduction(| : hit)
      for (std::size_t c = c0; c < c1; ++c) hit |= srow[c] >= floor;
      if (!hit) continue;
      for (std::size_t c = c0; c < c1; ++c) {
        const auto gj = static_cast<std::int32_t>(j0 + c);
        if (srow[c] >= list.floor() && gj != gi) list.offer({srow[c], gj});
      }
    }
  }
  if (cols == nullptr) return;
  col_floor.resize(nj);
  for (std::size_t c = 0; c < nj; ++c) col_floor[c] = (*cols)[c].floor();
  for (std::size_t r = 0; r < ni; ++r) {
    const float* srow = sims + r * ld;
    const auto gi = static_cast<std::int32_t>(i0 + r);
    for (std::size_t c0 = 0; c0 < nj; c0 += kStrip) {
      const std::size_t c1 = std::min(nj, c0 + kStrip);
      int hit = 0;
#pragma omp simd reduction(| : hit)
      for (std::size_t c = c0; c < c1; ++c) hit |= srow[c] >= col_floor[c];
      if (!hit) continue;
      for (std::size_t c = c0; c < c1; ++c) {
        if (srow[c] >= col_floor[c]) {
          (*cols)[c].offer({srow[c], gi});
          col_floor[c] = (*cols)[c].floor();
        }
      }
    }
  }
}

}  // namespace

std::string_view screening_name(Screening s) {
  switch (s) {
    case Screening::kAuto:
      return "auto";
    case Screening::kFloat32:
      return "fp32";
    case Screening::kBf16Tiles:
      return "bf16";
  }
  return "?";
}

Screening parse_screening(std::string_view name) {
  for (Screening s : {Screening::kAuto, Screening::kFloat32, Screening::kBf16Tiles}) {
    if (name == screening_name(s)) return s;
  }
  throw ConfigError("unknown screening kernel '" + std::string(name) + "' (auto, fp32, bf16)");
}

bool bf16_screening_available() { return detail::bf16_tiles_supported(); }

AffinityGraph::AffinityGraph(std::size_t n, std::size_t k, std::vector<std::int32_t> neighbors,
                             std::vector<double> weights)
    : n_(n),
      k_(k),
      degree_(n == 0 ? 0 : std::min(k, n - 1)),
      neighbors_(std::move(neighbors)),
      weights_(std::move(weights)) {
  if (neighbors_.size() != n_ * degree_ || weights_.size() != n_ * degree_) {
    throw ShapeError("affinity graph storage does not match n x min(k, n-1)");
  }
}

AffinityGraph build_knn_graph(const FeatureMatrix& features, std::size_t k, Screening screening,
                              KnnStats* stats) {
  const std::size_t n = features.n();
  const std::size_t d = features.d();
  if (n < 2) throw DegenerateInputError("k-NN graph needs at least 2 patches, got " + std::to_string(n));
  if (k < 1) throw ConfigError("knn must be >= 1");
  if (n > static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max())) {
    throw ShapeError("too many patches for int32 neighbor indices");
  }
  if (screening == Screening::kAuto) {
    screening = bf16_screening_available() ? Screening::kBf16Tiles : Screening::kFloat32;
  } else if (screening == Screening::kBf16Tiles && !bf16_screening_available()) {
    throw ConfigError("bf16 screening needs AMX-BF16, which this machine does not offer");
  }

  const std::size_t degree = std::min(k, n - 1);
  const std::size_t cap = std::min(degree + kWindowSlack, n - 1);
  const std::size_t blocks = chunk_count(n, kBlock);
  const float* base = features.matrix().data();

  double max_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = features.row(i);
    max_sq = std::max(max_sq, exact_dot(row, row));
  }
  const float window = window_for(screening, d, max_sq);

  std::optional<detail::Bf16Panels> panels;
  if (screening == Screening::kBf16Tiles) panels.emplace(base, n, d);

  CandidatePool pool(n, TopList(cap, degree, window));
  parallel_for(blocks, [&](std::size_t bi) {
    const std::size_t i0 = bi * kBlock;
    const std::size_t ni = std::min(n, i0 + kBlock) - i0;
    Eigen::Map<const RowMajorF> fi(base + i0 * d, static_cast<Eigen::Index>(ni),
                                   static_cast<Eigen::Index>(d));
    RowMajorF sims;
    std::vector<float> tiles;
    std::vector<TopList> rows;
    std::vector<TopList> cols;
    std::vector<float> col_floor;

    for (std::size_t bj = bi; bj < blocks; ++bj) {
      const std::size_t j0 = bj * kBlock;
      const std::size_t nj = std::min(n, j0 + kBlock) - j0;
      const float* out = nullptr;
      std::size_t ld = nj;
      if (panels) {
        ld = detail::Bf16Panels::round_up(nj);
        tiles.resize(detail::Bf16Panels::round_up(ni) * ld);
        panels->multiply(i0, ni, j0, nj, tiles.data(), ld);
        out = tiles.data();
      } else {
        Eigen::Map<const RowMajorF> fj(base + j0 * d, static_cast<Eigen::Index>(nj),
                                       static_cast<Eigen::Index>(d));
        sims.noalias() = fi * fj.transpose();
        out = sims.data();
      }

      rows.clear();
      for (std::size_t r = 0; r < ni; ++r) rows.push_back(pool.snapshot(i0 + r));
      const bool diagonal = bi == bj;
      if (!diagonal) {
        cols.clear();
        for (std::size_t c = 0; c < nj; ++c) cols.push_back(pool.snapshot(j0 + c));
      }
      scan_block(out, ld, i0, ni, j0, nj, rows, diagonal ? nullptr : &cols, col_floor);

      for (std::size_t r = 0; r < ni; ++r) pool.merge(i0 + r, rows[r]);
      if (!diagonal) {
        for (std::size_t c = 0; c < nj; ++c) pool.merge(j0 + c, cols[c]);
      }
    }
  });
  panels.reset();

  std::vector<std::int32_t> neighbors(n * degree);
  std::vector<double> weights(n * degree);
  // Exact re-rank in double precision of every candidate inside the window.
  auto rerank = [&](std::size_t i, const TopList& list,
                    std::vector<std::pair<double, std::int32_t>>& scored) {
    scored.clear();
    const float floor = list.floor();
    for (const Candidate& c : list.items()) {
      if (c.sim < floor) break;
      scored.emplace_back(exact_dot(features.row(i), features.row(static_cast<std::size_t>(c.idx))), c.idx);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      return a.first > b.first || (a.first == b.first && a.second < b.second);
    });
    for (std::size_t s = 0; s < degree; ++s) {
      neighbors[i * degree + s] = scored[s].second;
      weights[i * degree + s] = scored[s].first;
    }
  };

  std::vector<std::vector<std::size_t>> overflow(chunk_count(n));
  parallel_rows(n, [&](std::size_t begin, std::size_t end) {
    std::vector<std::pair<double, std::int32_t>> scored;
    for (std::size_t i = begin; i < end; ++i) {
      if (pool.list(i).overflowed()) {
        overflow[begin / kRowChunk].push_back(i);
      } else {
        rerank(i, pool.list(i), scored);
      }
    }
  });
  std::vector<std::size_t> redo;
  for (const auto& part : overflow) redo.insert(redo.end(), part.begin(), part.end());

  // Rows that lost a candidate inside their window are searched again with an
  // unbounded list over fp32 products.
  const float window32 = window_for(Screening::kFloat32, d, max_sq);
  parallel_for(chunk_count(redo.size(), kFallbackBatch), [&](std::size_t b) {
    const std::size_t r0 = b * kFallbackBatch;
    const std::size_t nr = std::min(redo.size(), r0 + kFallbackBatch) - r0;
    RowMajorF batch(static_cast<Eigen::Index>(nr), static_cast<Eigen::Index>(d));
    for (std::size_t r = 0; r < nr; ++r) {
      const auto row = features.row(redo[r0 + r]);
      std::copy(row.begin(), row.end(), batch.data() + r * d);
    }
    std::vector<TopList> lists(nr, TopList(n - 1, degree, window32));
    RowMajorF sims;
    for (std::size_t j0 = 0; j0 < n; j0 += kBlock) {
      const std::size_t nj = std::min(n, j0 + kBlock) - j0;
      Eigen::Map<const RowMajorF> fj(base + j0 * d, static_cast<Eigen::Index>(nj),
                                     static_cast<Eigen::Index>(d));
      sims.noalias() = batch * fj.transpose();
      for (std::size_t r = 0; r < nr; ++r) {
        const auto gi = static_cast<std::int32_t>(redo[r0 + r]);
        const float* srow = sims.data() + r * nj;
        for (std::size_t c = 0; c < nj; ++c) {
          const auto gj = static_cast<std::int32_t>(j0 + c);
          if (srow[c] >= lists[r].floor() && gj != gi) lists[r].offer({srow[c], gj});
        }
      }
    }
    std::vector<std::pair<double, std::int32_t>> scored;
    for (std::size_t r = 0; r < nr; ++r) rerank(redo[r0 + r], lists[r], scored);
  });

  if (stats != nullptr) {
    stats->screening = screening;
    stats->fallback_rows = redo.size();
  }
  return AffinityGraph(n, k, std::move(neighbors), std::move(weights));
}

DMatrix propagate(const AffinityGraph& graph, const DMatrix& z) {
  if (graph.n() != z.rows()) {
    throw ShapeError("propagate: graph has " + std::to_string(graph.n()) + " rows, z has " +
                     std::to_string(z.rows()));
  }
  const std::size_t kc = z.cols();
  DMatrix out(z.rows(), kc, 0.0);
  parallel_rows(z.rows(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      auto dst = out.row(i);
      auto nb = graph.neighbors(i);
      auto w = graph.weights(i);
      for (std::size_t s = 0; s < nb.size(); ++s) {
        auto src = z.row(static_cast<std::size_t>(nb[s]));
        for (std::size_t c = 0; c < kc; ++c) dst[c] += w[s] * src[c];
      }
    }
  });
  return out;
}

void save_graph(const std::filesystem::path& prefix, const AffinityGraph& graph) {
  const std::size_t n = graph.n();
  const std::size_t k = graph.k();
  std::vector<std::int32_t> idx(n * k, -1);
  std::vector<float> w(n * k, 0.0f);
  for (std::size_t i = 0; i < n; ++i) {
    auto nb = graph.neighbors(i);
    auto wt = graph.weights(i);
    for (std::size_t s = 0; s < nb.size(); ++s) {
      idx[i * k + s] = nb[s];
      w[i * k + s] = static_cast<float>(wt[s]);
    }
  }
  const std::string p = prefix.string();
  npy::write(p + "_indices.npy", npy::Dtype::kInt32, {n, k}, std::span<const std::int32_t>(idx));
  npy::write(p + "_weights.npy", npy::Dtype::kFloat32, {n, k}, std::span<const float>(w));
}

}  // namespace transclip
