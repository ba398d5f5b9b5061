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

#include <optional>
#include <string_view>
#include <vector>

#include "tokalign/io.hpp"

namespace tokalign {

/// How per-token hidden states are reduced to one text embedding:
///   last          - the final position only
///   mean          - uniform weights 1/l
///   weighted_mean - weight j / (1 + 2 + ... + l) for 1-based position j
enum class PoolingStrategy { last, mean, weighted_mean };

std::string_view to_string(PoolingStrategy s);
/// Accepts "last", "mean", "weighted-mean" (and "weighted_mean").
std::optional<PoolingStrategy> parse_pooling(std::string_view name);

/// Per-position weights for a sequence of length `length`; they sum to one.
std::vector<double> pooling_weights(std::size_t length, PoolingStrategy s);

/// Weighted sum of the rows of `hidden_states` (one row per token).
/// Accumulates in double and rounds once to float.
std::vector<float> pool(const EmbeddingMatrix& hidden_states,
                        PoolingStrategy s);

/// Pools consecutive row blocks of `hidden_states`, one block per document
/// of `corpus` with as many rows as the document has tokens.
EmbeddingMatrix pool_corpus(const EmbeddingMatrix& hidden_states,
                            const TokenizedCorpus& corpus, PoolingStrategy s);

}  // namespace tokalign
