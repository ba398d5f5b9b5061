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

#include "tokalign/pooling.hpp"

#include "tokalign/error.hpp"

namespace tokalign {

std::string_view to_string(PoolingStrategy s) {
  switch (s) {
    case PoolingStrategy::last:
      return "last";
    case PoolingStrategy::mean:
      return "mean";
    case PoolingStrategy::weighted_mean:
      return "weighted-mean";
  }
  return "unknown";
}

std::optional<PoolingStrategy> parse_pooling(std::string_view name) {
  if (name == "last") return PoolingStrategy::last;
  if (name == "mean") return PoolingStrategy::mean;
  if (name == "weighted-mean" || name == "weighted_mean") {
    return PoolingStrategy::weighted_mean;
  }
  return std::nullopt;
}

std::vector<double> pooling_weights(std::size_t length, PoolingStrategy s) {
  if (length == 0) {
    throw Error(ErrorCode::validation, "cannot pool an empty sequence");
  }
  std::vector<double> w(length, 0.0);
  switch (s) {
    case PoolingStrategy::last:
      w.back() = 1.0;
      break;
    case PoolingStrategy::mean:
      for (auto& a : w) a = 1.0 / static_cast<double>(length);
      break;
    case PoolingStrategy::weighted_mean: {
      const double n = static_cast<double>(length);
      const double total = n * (n + 1.0) / 2.0;
      for (std::size_t j = 0; j < length; ++j) {
        w[j] = static_cast<double>(j + 1) / total;
      }
      break;
    }
  }
  return w;
}

std::vector<float> pool(const EmbeddingMatrix& hidden_states,
                        PoolingStrategy s) {
  const auto weights = pooling_weights(hidden_states.rows(), s);
  std::vector<double> acc(hidden_states.dim(), 0.0);
  for (std::size_t j = 0; j < weights.size(); ++j) {
    if (weights[j] == 0.0) continue;
    auto row = hidden_states.row(j);
    for (std::size_t c = 0; c < acc.size(); ++c) {
      acc[c] += weights[j] * static_cast<double>(row[c]);
    }
  }
  return {acc.begin(), acc.end()};
}

EmbeddingMatrix pool_corpus(const EmbeddingMatrix& hidden_states,
                            const TokenizedCorpus& corpus, PoolingStrategy s) {
  if (hidden_states.rows() != corpus.token_count()) {
    throw Error(ErrorCode::dimension_mismatch,
                "hidden states have " + std::to_string(hidden_states.rows()) +
                    " rows but the corpus has " +
                    std::to_string(corpus.token_count()) + " tokens");
  }
  std::vector<float> out;
  out.reserve(corpus.size() * hidden_states.dim());
  std::size_t first = 0;
  for (const auto& doc : corpus.docs) {
    auto pooled = pool(hidden_states.slice(first, doc.token_ids.size()), s);
    out.insert(out.end(), pooled.begin(), pooled.end());
    first += doc.token_ids.size();
  }
  return EmbeddingMatrix(static_cast<std::uint32_t>(corpus.size()),
                         hidden_states.dim(), std::move(out));
}

}  // namespace tokalign
