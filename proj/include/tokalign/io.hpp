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
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tokalign {

/// Dense row-major collection of d-dimensional binary32 vectors. Holds text
/// embeddings, per-token hidden states, or the unembedding matrix (one row
/// per vocabulary token).
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;

  /// Validates shape and finiteness; throws Error on violation.
  EmbeddingMatrix(std::uint32_t rows, std::uint32_t dim,
                  std::vector<float> data);

  std::uint32_t rows() const noexcept { return rows_; }
  std::uint32_t dim() const noexcept { return dim_; }
  std::span<const float> data() const noexcept { return data_; }

  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(data_).subspan(i * dim_, dim_);
  }

  /// Rows [first, first + count) as a new matrix.
  EmbeddingMatrix slice(std::size_t first, std::size_t count) const;

  friend bool operator==(const EmbeddingMatrix&,
                         const EmbeddingMatrix&) = default;

 private:
  std::uint32_t rows_ = 0;
  std::uint32_t dim_ = 0;
  std::vector<float> data_;
};

/// Token id -> token text. Ids are the dense range 0..size()-1.
class TokenTable {
 public:
  TokenTable() = default;
  explicit TokenTable(std::vector<std::string> texts)
      : texts_(std::move(texts)) {}

  std::size_t size() const noexcept { return texts_.size(); }
  const std::string& text(std::uint32_t id) const { return texts_.at(id); }
  const std::vector<std::string>& texts() const noexcept { return texts_; }

  friend bool operator==(const TokenTable&, const TokenTable&) = default;

 private:
  std::vector<std::string> texts_;
};

struct Document {
  std::string id;
  std::vector<std::uint32_t> token_ids;

  friend bool operator==(const Document&, const Document&) = default;
};

struct TokenizedCorpus {
  std::vector<Document> docs;

  std::size_t size() const noexcept { return docs.size(); }
  /// Total number of tokens over all documents.
  std::size_t token_count() const noexcept;

  friend bool operator==(const TokenizedCorpus&,
                         const TokenizedCorpus&) = default;
};

/// Graded relevance judgments keyed by query id, then doc id.
struct RelevanceJudgments {
  std::map<std::string, std::map<std::string, int>> by_query;

  std::size_t size() const noexcept;
  /// Grade of (query, doc); 0 when unjudged.
  int grade(const std::string& query_id, const std::string& doc_id) const;
};

// Embedding matrix file ("EMB1"): magic, u32 rows, u32 dim, rows*dim f32,
// all little-endian, row-major.
std::string encode_embedding_matrix(const EmbeddingMatrix& m);
EmbeddingMatrix decode_embedding_matrix(std::string_view bytes);
EmbeddingMatrix read_embedding_matrix(const std::filesystem::path& path);
void write_embedding_matrix(const EmbeddingMatrix& m,
                            const std::filesystem::path& path);

/// Reads only the EMB1 header. Lets callers validate hyper-parameters
/// against L or d before loading a large payload.
std::pair<std::uint32_t, std::uint32_t> peek_embedding_shape(
    const std::filesystem::path& path);

TokenTable parse_token_table(std::string_view text);
TokenTable read_token_table(const std::filesystem::path& path);
void write_token_table(const TokenTable& table,
                       const std::filesystem::path& path);

/// `vocab_size` == 0 disables the out-of-vocabulary check.
TokenizedCorpus parse_tokenized_corpus(std::string_view text,
                                       std::size_t vocab_size = 0);
TokenizedCorpus read_tokenized_corpus(const std::filesystem::path& path,
                                      std::size_t vocab_size = 0);
void write_tokenized_corpus(const TokenizedCorpus& corpus,
                            const std::filesystem::path& path);

RelevanceJudgments parse_qrels(std::string_view text);
RelevanceJudgments read_qrels(const std::filesystem::path& path);
void write_qrels(const RelevanceJudgments& qrels,
                 const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`, so a
/// reader never observes a partially written file.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view bytes);

}  // namespace tokalign
