// Copyright 2026 The tokalign Authors.
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
#include <numeric>

#include <doctest.h>

#include "test_support.hpp"
#include "tokalign/error.hpp"
#include "tokalign/pooling.hpp"

using namespace tokalign;
using tokalign::testing::matrix;

TEST_CASE("pooling strategies on hand instances") {
  auto three = matrix(3, 2, {1, 2, 3, 4, 5, 6});
  CHECK(pool(three, PoolingStrategy::last) == std::vector<float>{5, 6});

  CHECK(pool(matrix(2, 2, {1, 0, 3, 0}), PoolingStrategy::mean) ==
        std::vector<float>{2, 0});

  // (1/3)(1,0) + (2/3)(4,3) = (3,2)
  auto w = pool(matrix(2, 2, {1, 0, 4, 3}), PoolingStrategy::weighted_mean);
  CHECK(w[0] == doctest::Approx(3.0).epsilon(1e-7));
  CHECK(w[1] == doctest::Approx(2.0).epsilon(1e-7));
}

TEST_CASE("pooling weights sum to one") {
  for (std::size_t l : {1, 2, 3, 7, 100, 4096}) {
    auto last = pooling_weights(l, PoolingStrategy::last);
    CHECK(std::accumulate(last.begin(), last.end(), 0.0) == 1.0);
    for (auto s : {PoolingStrategy::mean, PoolingStrategy::weighted_mean}) {
      auto a = pooling_weights(l, s);
      CHECK(std::abs(std::accumulate(a.begin(), a.end(), 0.0) - 1.0) <= 1e-12);
    }
  }
  auto w = pooling_weights(4, PoolingStrategy::weighted_mean);
  CHECK(w[0] == doctest::Approx(0.1));
  CHECK(w[3] == doctest::Approx(0.4));
}

TEST_CASE("pooling rejects empty input") {
  CHECK_THROWS_AS(pooling_weights(0, PoolingStrategy::mean), Error);
}

TEST_CASE("pooling is linear") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::uint32_t rows = 1 + rng() % 9;
    const std::uint32_t dim = 1 + rng() % 6;
    auto h1 = tokalign::testing::random_matrix(rng, rows, dim);
    auto h2 = tokalign::testing::random_matrix(rng, rows, dim);
    const float a = 0.75f;
    const float b = -1.5f;
    std::vector<float> mix(h1.data().size());
    for (std::size_t i = 0; i < mix.size(); ++i) {
      mix[i] = a * h1.data()[i] + b * h2.data()[i];
    }
    const EmbeddingMatrix combined(rows, dim, mix);
    for (auto s : {PoolingStrategy::last, PoolingStrategy::mean,
                   PoolingStrategy::weighted_mean}) {
      auto lhs = pool(combined, s);
      auto p1 = pool(h1, s);
      auto p2 = pool(h2, s);
      for (std::size_t c = 0; c < dim; ++c) {
        const double rhs = a * p1[c] + b * p2[c];
        const double scale = std::max({1.0, std::abs(rhs),
                                       std::abs(static_cast<double>(lhs[c]))});
        CHECK(std::abs(lhs[c] - rhs) <= 1e-6 * scale);
      }
    }
  }
}

TEST_CASE("permutation sensitivity") {
  auto h = matrix(2, 2, {1, 0, 4, 3});
  auto swapped = matrix(2, 2, {4, 3, 1, 0});
  CHECK(pool(h, PoolingStrategy::mean) == pool(swapped, PoolingStrategy::mean));
  CHECK(pool(h, PoolingStrategy::last) != pool(swapped, PoolingStrategy::last));
  CHECK(pool(h, PoolingStrategy::weighted_mean) !=
        pool(swapped, PoolingStrategy::weighted_mean));
}

TEST_CASE("pool_corpus slices hidden states per document") {
  TokenizedCorpus corpus{{{"a", {1, 2}}, {"b", {3}}}};
  auto hidden = matrix(3, 1, {2, 4, 10});
  auto pooled = pool_corpus(hidden, corpus, PoolingStrategy::mean);
  CHECK(pooled.rows() == 2);
  CHECK(pooled.row(0)[0] == 3.0f);
  CHECK(pooled.row(1)[0] == 10.0f);
  CHECK_THROWS_AS(pool_corpus(matrix(2, 1, {1, 2}), corpus, PoolingStrategy::mean),
                  Error);
}

TEST_CASE("pooling names") {
  CHECK(parse_pooling("weighted-mean") == PoolingStrategy::weighted_mean);
  CHECK(parse_pooling("last") == PoolingStrategy::last);
  CHECK_FALSE(parse_pooling("max"));
  CHECK(to_string(PoolingStrategy::mean) == "mean");
}
