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

#include <doctest.h>

#include "test_support.hpp"
#include "tokalign/error.hpp"
#include "tokalign/spectral.hpp"

using namespace tokalign;
using tokalign::testing::matrix;

namespace {

double orthonormality_error(const SpectralBasis& b) {
  const Eigen::MatrixXd g = b.u.transpose() * b.u;
  return (g - Eigen::MatrixXd::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
}

Eigen::MatrixXd as_eigen(const EmbeddingMatrix& m) {
  Eigen::MatrixXd out(m.rows(), m.dim());
  for (std::uint32_t i = 0; i < m.rows(); ++i) {
    for (std::uint32_t c = 0; c < m.dim(); ++c) out(i, c) = m.row(i)[c];
  }
  return out;
}

std::vector<float> to_floats(const Eigen::VectorXd& v) {
  std::vector<float> out(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = static_cast<float>(v(i));
  return out;
}

}  // namespace

TEST_CASE("svd basis of a rank-one 2x2 matrix") {
  auto b = svd_basis(matrix(2, 2, {1, 0, 3, 0}));
  CHECK(b.u(0, 0) == doctest::Approx(1.0));
  CHECK(b.u(1, 0) == doctest::Approx(0.0));
  CHECK(b.u(0, 1) == doctest::Approx(0.0));
  CHECK(b.u(1, 1) == doctest::Approx(1.0));
  CHECK(b.singular_values(0) == doctest::Approx(std::sqrt(10.0)));
  CHECK(b.singular_values(1) == doctest::Approx(0.0));
}

TEST_CASE("svd basis of an isotropic collection") {
  auto b = svd_basis(matrix(2, 2, {1, 0, 0, 1}));
  CHECK(b.singular_values(0) == doctest::Approx(1.0));
  CHECK(b.singular_values(1) == doctest::Approx(1.0));
  CHECK(orthonormality_error(b) < 1e-12);
  const Eigen::RowVectorXd sums = as_eigen(matrix(2, 2, {1, 0, 0, 1})).colwise().sum();
  for (Eigen::Index j = 0; j < 2; ++j) CHECK(sums.dot(b.u.col(j)) >= -1e-12);
}

TEST_CASE("svd basis invariants on random matrices") {
  std::mt19937 rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    auto m = tokalign::testing::random_matrix(rng, 50, 8);
    auto b = svd_basis(m);
    CHECK(orthonormality_error(b) < 1e-5);
    for (Eigen::Index j = 1; j < 8; ++j) {
      CHECK(b.singular_values(j) <= b.singular_values(j - 1));
      CHECK(b.singular_values(j) >= 0.0);
    }
    const Eigen::MatrixXd h = as_eigen(m);
    const double rel = (h - h * b.u * b.u.transpose()).norm() / h.norm();
    CHECK(rel < 1e-5);

    const Eigen::RowVectorXd sums = h.colwise().sum();
    for (Eigen::Index j = 0; j < 8; ++j) CHECK(sums.dot(b.u.col(j)) >= 0.0);

    // Per-vector reconstruction from the projections.
    for (std::uint32_t i = 0; i < m.rows(); i += 7) {
      const Eigen::VectorXd p = project(m.row(i), b);
      const Eigen::VectorXd back = b.u * p;
      const Eigen::VectorXd orig = h.row(i).transpose();
      CHECK((back - orig).norm() <= 1e-5 * orig.norm());
    }
  }
}

TEST_CASE("svd basis with fewer rows than dimensions is completed") {
  std::mt19937 rng(3);
  auto m = tokalign::testing::random_matrix(rng, 3, 6);
  auto b = svd_basis(m);
  CHECK(b.u.rows() == 6);
  CHECK(b.u.cols() == 6);
  CHECK(b.singular_values.size() == 6);
  for (Eigen::Index j = 3; j < 6; ++j) CHECK(b.singular_values(j) == 0.0);
  CHECK(orthonormality_error(b) < 1e-10);
  // Deterministic across fits.
  auto again = svd_basis(m);
  CHECK(again.u == b.u);
}

TEST_CASE("svd basis errors") {
  CHECK_THROWS_AS(svd_basis(matrix(1, 2, {1, 2})), Error);
  try {
    svd_basis(matrix(2, 2, {0, 0, 0, 0}));
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::numerical);
  }
}

TEST_CASE("component variation") {
  auto base = matrix(2, 2, {1, 0, 3, 0});
  auto basis = svd_basis(base);
  auto zero = component_variation(base, base, basis);
  CHECK(zero == std::vector<double>{0.0, 0.0});

  auto shifted = component_variation(base, matrix(2, 2, {-1, 0, 1, 0}), basis);
  CHECK(shifted[0] == doctest::Approx(-2.0));
  CHECK(shifted[1] == doctest::Approx(0.0));

  auto along_u2 = component_variation(base, matrix(2, 2, {1, 0.5f, 3, 0.5f}), basis);
  CHECK(along_u2[0] == doctest::Approx(0.0));
  CHECK(along_u2[1] == doctest::Approx(0.5));

  CHECK_THROWS_AS(component_variation(base, matrix(1, 2, {1, 0}), basis), Error);
}

TEST_CASE("component variation is linear in the difference") {
  std::mt19937 rng(17);
  auto base = tokalign::testing::random_matrix(rng, 30, 5);
  auto delta = tokalign::testing::random_matrix(rng, 30, 5);
  auto basis = svd_basis(base);
  auto tuned_with = [&](float c) {
    std::vector<float> t(base.data().size());
    for (std::size_t i = 0; i < t.size(); ++i) {
      t[i] = static_cast<float>(static_cast<double>(base.data()[i]) +
                                c * static_cast<double>(delta.data()[i]));
    }
    return EmbeddingMatrix(30, 5, t);
  };
  auto v1 = component_variation(base, tuned_with(1.0f), basis);
  auto v4 = component_variation(base, tuned_with(4.0f), basis);
  for (std::size_t j = 0; j < v1.size(); ++j) {
    CHECK(std::abs(v4[j] - 4.0 * v1[j]) <= 1e-6 * std::max(1.0, std::abs(4.0 * v1[j])));
  }
}

TEST_CASE("planted shift is recovered on the first component") {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> scale(5.0, 10.0);
  std::uniform_real_distribution<double> noise(-1e-6, 1e-6);
  const Eigen::Vector4d w = Eigen::Vector4d(1, 2, 2, 4).normalized();
  for (double c : {-2.0, 0.5, 3.0}) {
    std::vector<float> base;
    std::vector<float> tuned;
    for (int i = 0; i < 40; ++i) {
      const double s = scale(rng);
      for (int k = 0; k < 4; ++k) {
        const double b = s * w(k) + noise(rng);
        base.push_back(static_cast<float>(b));
        tuned.push_back(static_cast<float>(b + c * w(k)));
      }
    }
    const EmbeddingMatrix bm(40, 4, base);
    const auto basis = svd_basis(bm);
    const auto v = component_variation(bm, EmbeddingMatrix(40, 4, tuned), basis);
    CHECK(std::abs(v[0] - c) / std::abs(c) < 1e-4);
    for (std::size_t j = 1; j < v.size(); ++j) CHECK(std::abs(v[j]) < 1e-4 * std::abs(c));
  }
}

TEST_CASE("contribution decomposition") {
  auto basis = svd_basis(matrix(2, 2, {1, 0, 3, 0}));
  auto eg = matrix(2, 2, {1, 0, 0, 1});
  std::vector<float> h{2, 1};
  auto split = decompose_contribution(h, basis, eg, 2);
  REQUIRE(split.size() == 2);
  CHECK(split[0].token_id == 0);
  CHECK(split[0].total == doctest::Approx(2.0));
  CHECK(split[0].first_component == doctest::Approx(2.0));
  CHECK(split[0].rest == doctest::Approx(0.0));
  CHECK(split[1].token_id == 1);
  CHECK(split[1].total == doctest::Approx(1.0));
  CHECK(split[1].first_component == doctest::Approx(0.0));
  CHECK(split[1].rest == doctest::Approx(1.0));

  std::vector<float> orthogonal{0, 3};
  for (const auto& t : decompose_contribution(orthogonal, basis, eg, 2)) {
    CHECK(t.first_component == 0.0);
    CHECK(t.rest == doctest::Approx(t.total));
  }
  std::vector<float> parallel{1, 0};
  for (const auto& t : decompose_contribution(parallel, basis, eg, 2)) {
    CHECK(t.rest == doctest::Approx(0.0));
  }
  CHECK_THROWS_AS(decompose_contribution(h, basis, eg, 3), Error);
}

TEST_CASE("contribution parts sum to the logit") {
  std::mt19937 rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    auto base = tokalign::testing::random_matrix(rng, 20, 6);
    auto eg = tokalign::testing::random_matrix(rng, 50, 6);
    auto basis = svd_basis(base);
    for (const auto& t : decompose_contribution(base.row(trial % 20), basis, eg, 50)) {
      CHECK(std::abs(t.total - (t.first_component + t.rest)) <=
            1e-4 * std::max(1e-6, std::abs(t.total)));
    }
  }
}

TEST_CASE("first-component adjustment") {
  auto basis = svd_basis(matrix(2, 2, {1, 0, 3, 0}));
  std::vector<float> h{2, 1};
  CHECK(adjust_first_component(h, basis, 0.0) == std::vector<double>{2.0, 1.0});
  auto adjusted = adjust_first_component(h, basis, -2.0);
  CHECK(adjusted[0] == doctest::Approx(0.0));
  CHECK(adjusted[1] == doctest::Approx(1.0));

  std::mt19937 rng(5);
  auto base = tokalign::testing::random_matrix(rng, 30, 7);
  auto b = svd_basis(base);
  for (double lambda : {-10.0, -0.3, 0.0, 2.5, 100.0}) {
    for (std::uint32_t i = 0; i < 30; i += 5) {
      const auto before = project(base.row(i), b);
      const auto out = adjust_first_component(base.row(i), b, lambda);
      const auto after = project(out, b);
      for (Eigen::Index j = 1; j < 7; ++j) CHECK(std::abs(after(j) - before(j)) <= 1e-6);
      CHECK(after(0) == doctest::Approx(before(0) + lambda));
    }
  }
}

TEST_CASE("removing the first component demotes a token parallel to it") {
  std::mt19937 rng(31);
  std::uniform_real_distribution<float> small(-0.5f, 0.5f);
  std::uniform_real_distribution<float> big(8.0f, 12.0f);
  std::vector<float> rows;
  for (int i = 0; i < 30; ++i) {
    rows.push_back(big(rng));
    rows.push_back(small(rng));
    rows.push_back(small(rng));
  }
  const EmbeddingMatrix base(30, 3, rows);
  const auto basis = svd_basis(base);

  // Token 0 is the meaningless direction u_1; the rest are orthogonal to it.
  std::vector<float> tokens = to_floats(basis.u.col(0));
  for (Eigen::Index j = 1; j < 3; ++j) {
    auto pos = to_floats(basis.u.col(j));
    auto neg = to_floats(-basis.u.col(j));
    tokens.insert(tokens.end(), pos.begin(), pos.end());
    tokens.insert(tokens.end(), neg.begin(), neg.end());
  }
  const EmbeddingMatrix eg(5, 3, tokens);

  for (std::uint32_t i = 0; i < base.rows(); ++i) {
    auto h = base.row(i);
    std::vector<double> raw(h.begin(), h.end());
    CHECK(rank_aligned(score_tokens(raw, eg), 1).token_ids[0] == 0);
    const double lambda = -project(h, basis)(0);
    auto adjusted = adjust_first_component(h, basis, lambda);
    CHECK(rank_aligned(score_tokens(adjusted, eg), 1).token_ids[0] != 0);
  }
}
