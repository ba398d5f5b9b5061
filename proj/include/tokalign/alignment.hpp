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

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tokalign/io.hpp"

namespace tokalign {

using TokenId = std::uint32_t;

/// Raw logits of every vocabulary token for one embedding:
/// score[t] = dot(token_embeddings.row(t), h). No softmax, no normalization.
/// Dot products accumulate in double in ascending dimension order.
std::vector<double> score_tokens(std::span<const float> h,
                                 const EmbeddingMatrix& token_embeddings);
std::vector<double> score_tokens(std::span<const double> h,
                                 const EmbeddingMatrix& token_embeddings);

/// Strict total order used for every token and document ranking in the
/// toolkit: higher score first, lower id on ties.
inline bool ranks_before(double score_a, std::uint32_t id_a, double score_b,
                         std::uint32_t id_b) {
  if (score_a != score_b) return score_a > score_b;
  return id_a < id_b;
}

/// Tokens in descending score order (ties by ascending id). May hold only a
/// prefix of the full vocabulary ranking.
struct AlignedTokenRanking {
  std::vector<TokenId> token_ids;
  std::vector<double> scores;

  std::size_t size() const noexcept { return token_ids.size(); }
  std::span<const TokenId> top(std::size_t k) const {
    return std::span<const TokenId>(token_ids).first(std::min(k, size()));
  }
};

/// Full ranking of all scores.
AlignedTokenRanking rank_aligned(std::span<const double> scores);
/// First `count` entries of the full ranking (count is clamped to L).
AlignedTokenRanking rank_aligned(std::span<const double> scores,
                                 std::size_t count);

/// Deduplicated token ids of one text, kept sorted.
class LiteralTokenSet {
 public:
  LiteralTokenSet() = default;
  explicit LiteralTokenSet(std::span<const TokenId> token_ids);

  bool contains(TokenId id) const;
  std::size_t size() const noexcept { return ids_.size(); }
  const std::vector<TokenId>& ids() const noexcept { return ids_; }

 private:
  std::vector<TokenId> ids_;
};

LiteralTokenSet literal_token_set(std::span<const TokenId> doc);

enum class TokenLabel { literal, non_literal };

std::string_view to_string(TokenLabel label);
TokenLabel classify_token(TokenId id, const LiteralTokenSet& literal);

/// Algorithm output for one document: its literal set and the head of its
/// aligned ranking, long enough for both K and K_i = |literal|.
struct DocumentAlignment {
  LiteralTokenSet literal;
  AlignedTokenRanking ranking;
  bool hit = false;
  /// Top-K_i aligned tokens that are also literal, sorted.
  std::vector<TokenId> aligned_literal;
};

/// Scores and ranks every document independently on `threads` workers
/// (0 = all cores). Output order follows the corpus.
std::vector<DocumentAlignment> align_documents(
    const TokenizedCorpus& corpus, const EmbeddingMatrix& embeddings,
    const EmbeddingMatrix& token_embeddings, std::size_t k,
    unsigned threads = 0);

struct AlignmentMetrics {
  double hit_at_k = 0.0;
  double lar = 0.0;
  double gar = 0.0;
};

/// Reduces per-document results in corpus order.
AlignmentMetrics aggregate_metrics(std::span<const DocumentAlignment> docs);

/// Fraction of documents whose top-k aligned tokens hit a literal token.
double hit_at_k(const TokenizedCorpus& corpus,
                const EmbeddingMatrix& embeddings,
                const EmbeddingMatrix& token_embeddings, std::size_t k,
                unsigned threads = 0);
/// Local alignment rate: mean of |top-K_i ∩ literal| / K_i.
double lar(const TokenizedCorpus& corpus, const EmbeddingMatrix& embeddings,
           const EmbeddingMatrix& token_embeddings, unsigned threads = 0);
/// Global alignment rate: corpus-wide union of aligned literal tokens over
/// the union of literal tokens.
double gar(const TokenizedCorpus& corpus, const EmbeddingMatrix& embeddings,
           const EmbeddingMatrix& token_embeddings, unsigned threads = 0);

struct AlignedToken {
  TokenId id = 0;
  double score = 0.0;
  TokenLabel label = TokenLabel::non_literal;
  std::string text;  // empty when no token table was supplied

  friend bool operator==(const AlignedToken&, const AlignedToken&) = default;
};

struct DocumentReport {
  std::string doc_id;
  std::size_t literal_count = 0;
  std::size_t aligned_literal_count = 0;
  bool hit = false;
  std::vector<AlignedToken> top;

  friend bool operator==(const DocumentReport&,
                         const DocumentReport&) = default;
};

struct AlignmentReport {
  std::size_t k = 0;
  std::map<std::string, std::string> parameters;
  std::vector<DocumentReport> docs;
  AlignmentMetrics metrics;

  friend bool operator==(const AlignmentReport& a, const AlignmentReport& b) {
    return a.k == b.k && a.parameters == b.parameters && a.docs == b.docs &&
           a.metrics.hit_at_k == b.metrics.hit_at_k &&
           a.metrics.lar == b.metrics.lar && a.metrics.gar == b.metrics.gar;
  }
};

AlignmentReport alignment_report(const TokenizedCorpus& corpus,
                                 const EmbeddingMatrix& embeddings,
                                 const EmbeddingMatrix& token_embeddings,
                                 std::size_t k, const TokenTable* tokens = nullptr,
                                 unsigned threads = 0);

/// One JSON object per line: a "document" record per document, then one
/// "summary" record.
std::string to_jsonl(const AlignmentReport& report);
AlignmentReport parse_alignment_report(std::string_view jsonl);

}  // namespace tokalign
