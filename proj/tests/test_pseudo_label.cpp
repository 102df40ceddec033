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

#include <cmath>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "transclip/errors.hpp"
#include "transclip/pseudo_label.hpp"

namespace tc = transclip;

TEST(PseudoLabel, TwoClassClosedForm) {
  const auto f = tc::FeatureMatrix::ingest(tc::FMatrix(1, 2, std::vector<float>{1, 0}));
  const auto a = tc::ClassAnchors::ingest(tc::FMatrix(2, 2, std::vector<float>{1, 0, 0, 1}), 2.0);
  const auto y = tc::compute_pseudo_labels(f, a);
  const double e2 = std::exp(2.0);
  EXPECT_NEAR(y.probs(0, 0), e2 / (e2 + 1.0), 1e-12);
  EXPECT_NEAR(y.probs(0, 1), 1.0 / (e2 + 1.0), 1e-12);
}

TEST(PseudoLabel, TinyTemperatureIsNearlyUniform) {
  const auto f = testutil::random_features(20, 16, 1);
  const auto a = tc::ClassAnchors::ingest(testutil::random_matrix(5, 16, 2), 1e-6);
  const auto y = tc::compute_pseudo_labels(f, a);
  for (double v : y.probs.values()) EXPECT_NEAR(v, 0.2, 1e-6);
}

TEST(PseudoLabel, RowsLieOnTheSimplex) {
  const auto f = testutil::random_features(200, 32, 4);
  const auto a = tc::ClassAnchors::ingest(testutil::random_matrix(7, 32, 5), 100.0);
  const auto y = tc::compute_pseudo_labels(f, a);
  for (std::size_t i = 0; i < y.n(); ++i) {
    double s = 0.0;
    for (double v : y.probs.row(i)) {
      EXPECT_GT(v, 0.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(PseudoLabel, HugeTemperatureStaysFiniteAndFloored) {
  const auto f = tc::FeatureMatrix::ingest(tc::FMatrix(1, 2, std::vector<float>{1, 0}));
  const auto a = tc::ClassAnchors::ingest(tc::FMatrix(2, 2, std::vector<float>{1, 0, -1, 0}), 1e6);
  const auto y = tc::compute_pseudo_labels(f, a);
  EXPECT_DOUBLE_EQ(y.probs(0, 0), 1.0);
  EXPECT_EQ(y.probs(0, 1), tc::kProbabilityFloor);
}

TEST(PseudoLabel, SoftmaxIsShiftInvariant) {
  std::vector<double> a{0.3, -1.2, 2.0, 0.0};
  std::vector<double> b{1000.3, 998.8, 1002.0, 1000.0};
  tc::softmax_inplace(a);
  tc::softmax_inplace(b);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-12);
}

TEST(PseudoLabel, ArgmaxTiesGoToLowestIndex) {
  std::vector<double> row{0.25, 0.375, 0.375, 0.0};
  EXPECT_EQ(tc::argmax(row), 1);
  std::vector<double> flat(5, 0.2);
  EXPECT_EQ(tc::argmax(flat), 0);
}

TEST(PseudoLabel, DimensionMismatchIsShapeError) {
  const auto f = testutil::random_features(4, 8, 1);
  const auto a = tc::ClassAnchors::ingest(testutil::random_matrix(3, 6, 2), 10.0);
  EXPECT_THROW(tc::compute_pseudo_labels(f, a), tc::ShapeError);
}
