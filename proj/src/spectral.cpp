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

#include "tokalign/spectral.hpp"

#include <cmath>

#include <Eigen/SVD>

#include "tokalign/error.hpp"

namespace tokalign {

namespace {

Eigen::MatrixXd to_matrix(const EmbeddingMatrix& m) {
  Eigen::MatrixXd out(m.rows(), m.dim());
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    auto row = m.row(static_cast<std::size_t>(i));
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      out(i, c) = static_cast<double>(row[static_cast<std::size_t>(c)]);
    }
  }
  return out;
}

template <typename T>
Eigen::VectorXd to_vector(std::span<const T> h) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(h.size()));
  for (std::size_t c = 0; c < h.size(); ++c) {
    v(static_cast<Eigen::Index>(c)) = static_cast<double>(h[c]);
  }
  return v;
}

void check_dim(std::size_t got, const SpectralBasis& basis) {
  if (got != basis.dim()) {
    throw Error(ErrorCode::dimension_mismatch,
                "vector has dimension " + std::to_string(got) +
                    " but the basis has " + std::to_string(basis.dim()));
  }
}

double dot(std::span<const float> e, const Eigen::VectorXd& h) {
  double acc = 0.0;
  for (std::size_t c = 0; c < e.size(); ++c) {
    acc += static_cast<double>(e[c]) * h(static_cast<Eigen::Index>(c));
  }
  return acc;
}

// Relative size below which a projection sum counts as zero when fixing
// singular-vector signs.
constexpr double kSignTolerance = 1e-9;

}  // namespace

SpectralBasis svd_basis(const EmbeddingMatrix& embeddings) {
  if (embeddings.rows() < 2) {
    throw Error(ErrorCode::validation,
                "spectral basis needs at least two embeddings");
  }
  const Eigen::MatrixXd h = to_matrix(embeddings);
  if (h.cwiseAbs().maxCoeff() == 0.0) {
    throw Error(ErrorCode::numerical,
                "cannot fit a spectral basis to an all-zero collection");
  }

  Eigen::BDCSVD<Eigen::MatrixXd> svd(h, Eigen::ComputeFullV);
  if (svd.info() != Eigen::Success) {
    throw Error(ErrorCode::numerical, "SVD did not converge");
  }

  SpectralBasis basis;
  basis.u = svd.matrixV();
  const Eigen::Index d = h.cols();
  basis.singular_values = Eigen::VectorXd::Zero(d);
  basis.singular_values.head(svd.singularValues().size()) =
      svd.singularValues();

  const Eigen::RowVectorXd column_sums = h.colwise().sum();
  const double scale = column_sums.norm();
  for (Eigen::Index j = 0; j < d; ++j) {
    auto u = basis.u.col(j);
    const double projection_sum = column_sums.dot(u);
    bool flip = false;
    if (std::abs(projection_sum) > kSignTolerance * scale) {
      flip = projection_sum < 0.0;
    } else {
      Eigen::Index largest = 0;
      for (Eigen::Index c = 1; c < d; ++c) {
        if (std::abs(u(c)) > std::abs(u(largest))) largest = c;
      }
      flip = u(largest) < 0.0;
    }
    if (flip) u = -u;
  }
  return basis;
}

std::vector<double> component_variation(const EmbeddingMatrix& base,
                                        const EmbeddingMatrix& tuned,
                                        const SpectralBasis& basis) {
  if (base.rows() != tuned.rows() || base.dim() != tuned.dim()) {
    throw Error(ErrorCode::dimension_mismatch,
                "base and tuned embeddings differ in shape");
  }
  check_dim(base.dim(), basis);
  const Eigen::MatrixXd diff = to_matrix(tuned) - to_matrix(base);
  const Eigen::VectorXd mean_diff =
      diff.colwise().sum().transpose() / static_cast<double>(diff.rows());
  const Eigen::VectorXd v = basis.u.transpose() * mean_diff;
  return {v.data(), v.data() + v.size()};
}

std::vector<TokenContribution> decompose_contribution(
    std::span<const float> h, const SpectralBasis& basis,
    const EmbeddingMatrix& token_embeddings, std::size_t k) {
  check_dim(h.size(), basis);
  if (k > token_embeddings.rows()) {
    throw Error(ErrorCode::out_of_range,
                "K=" + std::to_string(k) + " exceeds vocabulary size " +
                    std::to_string(token_embeddings.rows()));
  }
  const auto scores = score_tokens(h, token_embeddings);
  const auto ranking = rank_aligned(scores, k);

  const Eigen::VectorXd hv = to_vector(h);
  const Eigen::VectorXd u1 = basis.first();
  const Eigen::VectorXd first = u1.dot(hv) * u1;
  const Eigen::VectorXd rest = hv - first;

  std::vector<TokenContribution> out;
  out.reserve(ranking.size());
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    const auto t = ranking.token_ids[i];
    const auto e = token_embeddings.row(t);
    out.push_back({t, ranking.scores[i], dot(e, first), dot(e, rest)});
  }
  return out;
}

std::vector<double> adjust_first_component(std::span<const float> h,
                                           const SpectralBasis& basis,
                                           double lambda) {
  check_dim(h.size(), basis);
  std::vector<double> out(h.size());
  for (std::size_t c = 0; c < h.size(); ++c) {
    out[c] = static_cast<double>(h[c]) +
             lambda * basis.u(static_cast<Eigen::Index>(c), 0);
  }
  return out;
}

Eigen::VectorXd project(std::span<const float> h, const SpectralBasis& basis) {
  check_dim(h.size(), basis);
  return basis.u.transpose() * to_vector(h);
}

Eigen::VectorXd project(std::span<const double> h,
                        const SpectralBasis& basis) {
  check_dim(h.size(), basis);
  return basis.u.transpose() * to_vector(h);
}

}  // namespace tokalign
