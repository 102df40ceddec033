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

#include <algorithm>
#include <numeric>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "transclip/affinity.hpp"
#include "transclip/errors.hpp"
#include "transclip/npy.hpp"
#include "transclip/parallel.hpp"

namespace tc = transclip;

namespace {

// Brute-force neighbor lists in double, sorted by (similarity desc, index asc).
std::vector<std::vector<std::pair<double, int>>> brute_force(const tc::FeatureMatrix& f,
                                                             std::size_t k) {
  std::vector<std::vector<std::pair<double, int>>> out(f.n());
  for (std::size_t i = 0; i < f.n(); ++i) {
    for (std::size_t j = 0; j < f.n(); ++j) {
      if (i == j) continue;
      double s = 0.0;
      for (std::size_t d = 0; d < f.d(); ++d) s += double(f.row(i)[d]) * f.row(j)[d];
      out[i].emplace_back(s, static_cast<int>(j));
    }
    std::sort(out[i].begin(), out[i].end(), [](const auto& a, const auto& b) {
      return a.first > b.first || (a.first == b.first && a.second < b.second);
    });
    out[i].resize(std::min(k, out[i].size()));
  }
  return out;
}

void expect_matches_brute_force(const tc::FeatureMatrix& f, std::size_t k,
                                tc::Screening screening = tc::Screening::kAuto,
                                tc::KnnStats* stats = nullptr) {
  const auto g = tc::build_knn_graph(f, k, screening, stats);
  const auto ref = brute_force(f, k);
  ASSERT_EQ(g.degree(), std::min(k, f.n() - 1));
  for (std::size_t i = 0; i < f.n(); ++i) {
    for (std::size_t s = 0; s < g.degree(); ++s) {
      EXPECT_EQ(g.neighbors(i)[s], ref[i][s].second) << "row " << i << " slot " << s;
      EXPECT_NEAR(g.weights(i)[s], ref[i][s].first, 1e-12);
    }
  }
}

// A tight clump of near-copies inside uniform noise. Far more than a row's
// candidate capacity sit within the screening error of each other.
tc::FeatureMatrix clumped(std::size_t n, std::size_t clump, std::size_t d, std::uint64_t seed) {
  auto raw = testutil::random_matrix(n, d, seed);
  const auto jitter = testutil::random_matrix(clump, d, seed + 1);
  for (std::size_t i = 0; i < clump; ++i) {
    for (std::size_t j = 0; j < d; ++j) raw(i * 3, j) = raw(0, j) + 1e-3f * jitter(i, j);
  }
  return tc::FeatureMatrix::ingest(raw);
}

class Screened : public ::testing::TestWithParam<tc::Screening> {
 protected:
  void SetUp() override {
    if (GetParam() == tc::Screening::kBf16Tiles && !tc::bf16_screening_available()) {
      GTEST_SKIP() << "no AMX-BF16 on this machine";
    }
  }
};

}  // namespace

TEST_P(Screened, MatchesBruteForceOnSmallInput) {
  expect_matches_brute_force(testutil::random_features(6, 5, 11), 3, GetParam());
}

TEST_P(Screened, MatchesBruteForceAcrossBlocks) {
  expect_matches_brute_force(testutil::random_features(2600, 12, 12), 3, GetParam());
}

TEST_P(Screened, MatchesBruteForceWithLargerK) {
  expect_matches_brute_force(testutil::random_features(300, 4, 13), 10, GetParam());
}

TEST_P(Screened, MatchesBruteForceWithUnalignedDimension) {
  expect_matches_brute_force(testutil::random_features(1100, 45, 14), 5, GetParam());
}

TEST_P(Screened, DenseClumpTakesTheFallbackAndStaysExact) {
  tc::KnnStats stats;
  expect_matches_brute_force(clumped(1500, 120, 64, 15), 3, GetParam(), &stats);
  EXPECT_EQ(stats.screening, GetParam());
  EXPECT_GT(stats.fallback_rows, 0u);
}

TEST_P(Screened, ExactCopiesTieToLowestIndex) {
  auto raw = testutil::random_matrix(400, 16, 16);
  for (std::size_t i = 1; i < 60; ++i) std::copy(raw.row(0).begin(), raw.row(0).end(), raw.row(i * 5).begin());
  const auto f = tc::FeatureMatrix::ingest(raw);
  expect_matches_brute_force(f, 4, GetParam());
  const auto g = tc::build_knn_graph(f, 4, GetParam());
  EXPECT_EQ(g.neighbors(0)[0], 5);
  EXPECT_EQ(g.neighbors(5)[0], 0);
  EXPECT_EQ(g.neighbors(5)[1], 10);
}

TEST_P(Screened, ResultIndependentOfThreadCount) {
  const auto f = clumped(3000, 80, 32, 22);
  tc::set_thread_count(1);
  const auto a = tc::build_knn_graph(f, 3, GetParam());
  tc::set_thread_count(4);
  const auto b = tc::build_knn_graph(f, 3, GetParam());
  tc::set_thread_count(0);
  for (std::size_t i = 0; i < f.n(); ++i) {
    ASSERT_TRUE(std::ranges::equal(a.neighbors(i), b.neighbors(i)));
    ASSERT_TRUE(std::ranges::equal(a.weights(i), b.weights(i)));
  }
}

INSTANTIATE_TEST_SUITE_P(Kernels, Screened,
                         ::testing::Values(tc::Screening::kFloat32, tc::Screening::kBf16Tiles),
                         [](const auto& info) { return std::string(tc::screening_name(info.param)); });

TEST(Affinity, KernelsProduceIdenticalGraphs) {
  if (!tc::bf16_screening_available()) GTEST_SKIP() << "no AMX-BF16 on this machine";
  const auto f = clumped(5000, 200, 96, 23);
  const auto a = tc::build_knn_graph(f, 3, tc::Screening::kFloat32);
  const auto b = tc::build_knn_graph(f, 3, tc::Screening::kBf16Tiles);
  for (std::size_t i = 0; i < f.n(); ++i) {
    ASSERT_TRUE(std::ranges::equal(a.neighbors(i), b.neighbors(i))) << i;
    ASSERT_TRUE(std::ranges::equal(a.weights(i), b.weights(i))) << i;
  }
}

TEST(Affinity, ScreeningNamesRoundTrip) {
  for (auto s : {tc::Screening::kAuto, tc::Screening::kFloat32, tc::Screening::kBf16Tiles}) {
    EXPECT_EQ(tc::parse_screening(tc::screening_name(s)), s);
  }
  EXPECT_THROW(tc::parse_screening("fp16"), tc::ConfigError);
}

TEST(Affinity, AutoPicksTilesWhenAvailable) {
  tc::KnnStats stats;
  tc::build_knn_graph(testutil::random_features(50, 8, 1), 3, tc::Screening::kAuto, &stats);
  EXPECT_EQ(stats.screening, tc::bf16_screening_available() ? tc::Screening::kBf16Tiles
                                                             : tc::Screening::kFloat32);
}

TEST(Affinity, DegreeIsClampedToNMinusOne) {
  const auto g = tc::build_knn_graph(testutil::random_features(3, 4, 1), 5);
  EXPECT_EQ(g.degree(), 2u);
  EXPECT_EQ(g.k(), 5u);
}

TEST(Affinity, NoSelfLoopsAndNegativeWeightsKept) {
  // Two antipodal points: each one's only neighbor has weight -1.
  const auto f = tc::FeatureMatrix::ingest(tc::FMatrix(2, 2, std::vector<float>{1, 0, -1, 0}));
  const auto g = tc::build_knn_graph(f, 3);
  EXPECT_EQ(g.neighbors(0)[0], 1);
  EXPECT_EQ(g.neighbors(1)[0], 0);
  EXPECT_DOUBLE_EQ(g.weights(0)[0], -1.0);
}

TEST(Affinity, OrthogonalBasisTiesResolveToLowestIndex) {
  tc::FMatrix m(4, 4, 0.0f);
  for (std::size_t i = 0; i < 4; ++i) m(i, i) = 1.0f;
  const auto g = tc::build_knn_graph(tc::FeatureMatrix::ingest(m), 2);
  EXPECT_EQ(g.neighbors(0)[0], 1);
  EXPECT_EQ(g.neighbors(0)[1], 2);
  EXPECT_EQ(g.neighbors(3)[0], 0);
  EXPECT_EQ(g.neighbors(3)[1], 1);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(g.weights(i)[0], 0.0);
}

TEST(Affinity, DuplicatesAreMutualNearestNeighbors) {
  auto raw = testutil::random_matrix(10, 8, 4);
  std::copy(raw.row(2).begin(), raw.row(2).end(), raw.row(7).begin());
  const auto g = tc::build_knn_graph(tc::FeatureMatrix::ingest(raw), 1);
  EXPECT_EQ(g.neighbors(2)[0], 7);
  EXPECT_EQ(g.neighbors(7)[0], 2);
  EXPECT_NEAR(g.weights(2)[0], 1.0, 1e-6);
}

TEST(Affinity, RejectsSinglePatchAndZeroK) {
  EXPECT_THROW(tc::build_knn_graph(testutil::random_features(1, 4, 1), 3), tc::DegenerateInputError);
  EXPECT_THROW(tc::build_knn_graph(testutil::random_features(5, 4, 1), 0), tc::ConfigError);
}

TEST(Propagate, ZeroAssignmentsGiveZero) {
  const auto g = tc::build_knn_graph(testutil::random_features(8, 4, 2), 3);
  const auto out = tc::propagate(g, tc::DMatrix(8, 3, 0.0));
  for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(Propagate, SingleUnitEdgeCopiesNeighborRow) {
  tc::AffinityGraph g(2, 1, {1, 0}, {1.0, 1.0});
  tc::DMatrix z(2, 2, std::vector<double>{0.2, 0.8, 0.6, 0.4});
  const auto out = tc::propagate(g, z);
  EXPECT_DOUBLE_EQ(out(0, 0), 0.6);
  EXPECT_DOUBLE_EQ(out(1, 1), 0.8);
}

TEST(Propagate, DenseGraphMatchesMatrixProduct) {
  const auto f = testutil::random_features(5, 6, 3);
  const auto g = tc::build_knn_graph(f, 4);
  tc::DMatrix z(5, 3);
  for (std::size_t e = 0; e < z.size(); ++e) z.data()[e] = 0.1 * double(e % 7) + 0.05;
  const auto out = tc::propagate(g, z);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      double expect = 0.0;
      for (std::size_t j = 0; j < 5; ++j) {
        if (j == i) continue;
        double w = 0.0;
        for (std::size_t d = 0; d < 6; ++d) w += double(f.row(i)[d]) * f.row(j)[d];
        expect += w * z(j, c);
      }
      EXPECT_NEAR(out(i, c), expect, 1e-12);
    }
  }
}

TEST(Propagate, ShapeMismatchThrows) {
  const auto g = tc::build_knn_graph(testutil::random_features(5, 4, 2), 2);
  EXPECT_THROW(tc::propagate(g, tc::DMatrix(4, 2)), tc::ShapeError);
}

TEST(Affinity, SavedGraphIsPaddedToK) {
  testutil::TempDir dir("graph");
  const auto g = tc::build_knn_graph(testutil::random_features(3, 4, 2), 4);
  tc::save_graph(dir / "g", g);
  const auto idx = tc::npy::read(dir / "g_indices.npy");
  const auto w = tc::npy::read(dir / "g_weights.npy");
  EXPECT_EQ(idx.header.shape, (std::vector<std::size_t>{3, 4}));
  EXPECT_EQ(idx.header.dtype, tc::npy::Dtype::kInt32);
  EXPECT_EQ(w.header.dtype, tc::npy::Dtype::kFloat32);
  EXPECT_EQ(idx.as<std::int32_t>()[2], -1);
  EXPECT_EQ(w.as<float>()[3], 0.0f);
}
