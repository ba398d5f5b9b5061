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

#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "tokalign/alignment.hpp"
#include "tokalign/io.hpp"

namespace tokalign {

/// Orthonormal basis of the embedding space from the SVD of a raw
/// (uncentered) embedding collection. Column j of `u` is the right singular
/// vector of the j-th largest singular value.
///
/// Signs are fixed so that the projections of the fitting collection onto
/// each column sum to a non-negative value. Directions whose projection sum
/// vanishes (the null space when rows < dim) instead get their
/// largest-magnitude coordinate made positive.
struct SpectralBasis {
  Eigen::MatrixXd u;                ///< dim x dim, columns u_1..u_d
  Eigen::VectorXd singular_values;  ///< length dim, non-increasing, zero-padded

  std::size_t dim() const noexcept { return static_cast<std::size_t>(u.rows()); }
  Eigen::VectorXd first() const { return u.col(0); }
};

SpectralBasis svd_basis(const EmbeddingMatrix& embeddings);

/// v_j = mean over rows i of (tuned_i - base_i)^T u_j. Row i of both
/// collections must describe the same text.
std::vector<double> component_variation(const EmbeddingMatrix& base,
                                        const EmbeddingMatrix& tuned,
                                        const SpectralBasis& basis);

/// Logit of one token split into the part explained by the first principal
/// component and the remainder.
struct TokenContribution {
  TokenId token_id = 0;
  double total = 0.0;
  double first_component = 0.0;
  double rest = 0.0;
};

/// Splits h into (u_1^T h) u_1 and the rest and reports the logits both
/// parts give the top-k tokens of E_g h (ranked by total logit).
std::vector<TokenContribution> decompose_contribution(
    std::span<const float> h, const SpectralBasis& basis,
    const EmbeddingMatrix& token_embeddings, std::size_t k);

/// h + lambda * u_1.
std::vector<double> adjust_first_component(std::span<const float> h,
                                           const SpectralBasis& basis,
                                           double lambda);

/// u_j^T h for every basis vector.
Eigen::VectorXd project(std::span<const float> h, const SpectralBasis& basis);
Eigen::VectorXd project(std::span<const double> h, const SpectralBasis& basis);

}  // namespace tokalign
