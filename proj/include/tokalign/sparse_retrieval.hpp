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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tokalign/alignment.hpp"
#include "tokalign/io.hpp"
#include "tokalign/run.hpp"

namespace tokalign {

struct SparseEntry {
  TokenId token = 0;
  float weight = 0.0f;

  friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

/// Vocabulary-length document vector that is nonzero only on the document's
/// top-K aligned tokens. Weight = the token's logit e_t^T h (negative
/// logits are kept). Entries sorted by token id.
struct SparseDocVector {
  std::string doc_id;
  std::vector<SparseEntry> entries;

  friend bool operator==(const SparseDocVector&,
                         const SparseDocVector&) = default;
};

SparseDocVector build_sparse_doc(std::string doc_id, std::span<const float> h,
                                 const EmbeddingMatrix& token_embeddings,
                                 std::size_t k);

/// CRC-32 of the EMB1 encoding of the token-embedding matrix. Ties an index
/// and its queries to the same vocabulary projection.
std::uint32_t token_embedding_checksum(const EmbeddingMatrix& token_embeddings);

struct Posting {
  std::uint32_t doc = 0;  // ordinal into SparseIndex::doc_ids()
  float weight = 0.0f;

  friend bool operator==(const Posting&, const Posting&) = default;
};

/// Inverted index over sparse document vectors. Documents are numbered in
/// ascending doc-id order and every posting list is sorted by that ordinal.
class SparseIndex {
 public:
  struct Header {
    std::uint32_t k = 0;
    std::uint32_t vocab_size = 0;
    std::uint32_t dim = 0;
    std::uint32_t token_checksum = 0;
    friend bool operator==(const Header&, const Header&) = default;
  };

  SparseIndex() = default;
  /// Every document must carry exactly header.k entries with token ids
  /// below header.vocab_size; doc ids must be unique.
  SparseIndex(Header header, std::vector<SparseDocVector> docs);

  const Header& header() const noexcept { return header_; }
  std::size_t k() const noexcept { return header_.k; }
  std::size_t vocab_size() const noexcept { return header_.vocab_size; }
  std::size_t dim() const noexcept { return header_.dim; }
  std::size_t doc_count() const noexcept { return doc_ids_.size(); }
  std::size_t posting_count() const noexcept;

  const std::vector<std::string>& doc_ids() const noexcept { return doc_ids_; }
  std::span<const Posting> postings(TokenId token) const {
    return postings_.at(token);
  }

  /// Reassembles one document's sparse vector from the postings.
  SparseDocVector document(std::uint32_t ordinal) const;

  /// SPX1 encoding; see README for the layout.
  std::string serialize() const;
  static SparseIndex deserialize(std::string_view bytes);

  friend bool operator==(const SparseIndex&, const SparseIndex&) = default;

 private:
  Header header_;
  std::vector<std::string> doc_ids_;
  std::vector<std::vector<Posting>> postings_;
};

/// Builds one sparse vector per corpus document (in parallel) and merges
/// them into an index.
SparseIndex build_index(const TokenizedCorpus& corpus,
                        const EmbeddingMatrix& doc_embeddings,
                        const EmbeddingMatrix& token_embeddings, std::size_t k,
                        unsigned threads = 0);

SparseIndex read_index(const std::filesystem::path& path);
void write_index(const SparseIndex& index, const std::filesystem::path& path);

/// Literal query tokens united with the query's top-M aligned tokens.
struct ExpandedQuery {
  std::string query_id;
  std::vector<TokenId> literal_tokens;    // sorted, unique
  std::vector<TokenId> expansion_tokens;  // aligned order, length M
  std::vector<TokenId> tokens;            // sorted union

  friend bool operator==(const ExpandedQuery&, const ExpandedQuery&) = default;
};

ExpandedQuery expand_query(std::string query_id,
                           std::span<const TokenId> query_tokens,
                           std::span<const float> h,
                           const EmbeddingMatrix& token_embeddings,
                           std::size_t m);

struct SearchStats {
  std::size_t scored_postings = 0;  // one addition each
  std::size_t scored_docs = 0;
};

/// Scores every document sharing at least one token with the expanded
/// query by summing the document's weights over the shared tokens, and
/// returns the best `top_n` (0 keeps all). Documents sharing no token are
/// not scored at all.
RankedList search(const SparseIndex& index, const ExpandedQuery& query,
                  std::size_t top_n, SearchStats* stats = nullptr);

struct QueryCost {
  std::string query_id;
  std::size_t sparse_ops = 0;  // additions over intersected postings
  std::size_t scored_docs = 0;
  double mean_additions_per_pair = 0.0;
  std::size_t dense_ops = 0;  // dim multiply-adds per indexed document
};

struct CostReport {
  std::vector<QueryCost> queries;
  std::size_t total_sparse_ops = 0;
  std::size_t total_dense_ops = 0;
  double ratio = 0.0;  // sparse / dense
};

CostReport cost_report(const SparseIndex& index,
                       std::span<const ExpandedQuery> queries);

std::string to_jsonl(const CostReport& report);

}  // namespace tokalign
