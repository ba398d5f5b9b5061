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

#include "tokalign/sparse_retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>
#include <zlib.h>

#include "byte_io.hpp"
#include "tokalign/error.hpp"
#include "tokalign/parallel.hpp"

namespace tokalign {

namespace {

constexpr std::string_view kIndexMagic = "SPX1";

void check_k(std::size_t k, std::size_t vocab_size, const char* name) {
  if (k > vocab_size) {
    throw Error(ErrorCode::out_of_range,
                std::string(name) + "=" + std::to_string(k) +
                    " exceeds vocabulary size " + std::to_string(vocab_size));
  }
}

}  // namespace

SparseDocVector build_sparse_doc(std::string doc_id, std::span<const float> h,
                                 const EmbeddingMatrix& token_embeddings,
                                 std::size_t k) {
  check_k(k, token_embeddings.rows(), "K");
  const auto scores = score_tokens(h, token_embeddings);
  const auto ranking = rank_aligned(scores, k);
  SparseDocVector doc;
  doc.doc_id = std::move(doc_id);
  doc.entries.reserve(k);
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    doc.entries.push_back(
        {ranking.token_ids[i], static_cast<float>(ranking.scores[i])});
  }
  std::sort(doc.entries.begin(), doc.entries.end(),
            [](const SparseEntry& a, const SparseEntry& b) {
              return a.token < b.token;
            });
  return doc;
}

std::uint32_t token_embedding_checksum(const EmbeddingMatrix& token_embeddings) {
  detail::ByteWriter header;
  header.put_bytes("EMB1");
  header.put_u32(token_embeddings.rows());
  header.put_u32(token_embeddings.dim());
  auto bytes = header.take();
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()),
              static_cast<uInt>(bytes.size()));
  // One row at a time keeps the scratch buffer small for large vocabularies.
  for (std::size_t t = 0; t < token_embeddings.rows(); ++t) {
    detail::ByteWriter w;
    for (float v : token_embeddings.row(t)) w.put_f32(v);
    auto row = w.take();
    crc = crc32(crc, reinterpret_cast<const Bytef*>(row.data()),
                static_cast<uInt>(row.size()));
  }
  return static_cast<std::uint32_t>(crc);
}

SparseIndex::SparseIndex(Header header, std::vector<SparseDocVector> docs)
    : header_(header), postings_(header.vocab_size) {
  std::sort(docs.begin(), docs.end(),
            [](const SparseDocVector& a, const SparseDocVector& b) {
              return a.doc_id < b.doc_id;
            });
  doc_ids_.reserve(docs.size());
  for (std::size_t ord = 0; ord < docs.size(); ++ord) {
    const auto& doc = docs[ord];
    if (ord > 0 && doc.doc_id == docs[ord - 1].doc_id) {
      throw Error(ErrorCode::validation,
                  "duplicate doc id \"" + doc.doc_id + "\"");
    }
    if (doc.entries.size() != header_.k) {
      throw Error(ErrorCode::validation,
                  "document \"" + doc.doc_id + "\" has " +
                      std::to_string(doc.entries.size()) +
                      " entries, index K is " + std::to_string(header_.k));
    }
    for (std::size_t i = 0; i < doc.entries.size(); ++i) {
      const auto& e = doc.entries[i];
      if (e.token >= header_.vocab_size) {
        throw Error(ErrorCode::out_of_range,
                    "token id " + std::to_string(e.token) +
                        " outside the vocabulary");
      }
      if (i > 0 && e.token <= doc.entries[i - 1].token) {
        throw Error(ErrorCode::validation,
                    "document \"" + doc.doc_id +
                        "\" entries are not strictly ascending");
      }
      if (!std::isfinite(e.weight)) {
        throw Error(ErrorCode::validation, "non-finite posting weight");
      }
      postings_[e.token].push_back({static_cast<std::uint32_t>(ord), e.weight});
    }
    doc_ids_.push_back(doc.doc_id);
  }
}

std::size_t SparseIndex::posting_count() const noexcept {
  std::size_t n = 0;
  for (const auto& list : postings_) n += list.size();
  return n;
}

SparseDocVector SparseIndex::document(std::uint32_t ordinal) const {
  SparseDocVector doc;
  doc.doc_id = doc_ids_.at(ordinal);
  for (std::size_t t = 0; t < postings_.size(); ++t) {
    const auto& list = postings_[t];
    auto it = std::lower_bound(
        list.begin(), list.end(), ordinal,
        [](const Posting& p, std::uint32_t o) { return p.doc < o; });
    if (it != list.end() && it->doc == ordinal) {
      doc.entries.push_back({static_cast<TokenId>(t), it->weight});
    }
  }
  return doc;
}

std::string SparseIndex::serialize() const {
  detail::ByteWriter w;
  w.put_bytes(kIndexMagic);
  w.put_u32(header_.k);
  w.put_u32(header_.vocab_size);
  w.put_u32(static_cast<std::uint32_t>(doc_ids_.size()));
  w.put_u32(header_.dim);
  w.put_u32(header_.token_checksum);
  for (const auto& id : doc_ids_) {
    w.put_u32(static_cast<std::uint32_t>(id.size()));
    w.put_bytes(id);
  }
  for (const auto& list : postings_) {
    w.put_u32(static_cast<std::uint32_t>(list.size()));
    for (const auto& p : list) {
      w.put_u32(p.doc);
      w.put_f32(p.weight);
    }
  }
  return w.take();
}

SparseIndex SparseIndex::deserialize(std::string_view bytes) {
  if (!kIndexMagic.starts_with(bytes.substr(0, 4))) {
    throw Error(ErrorCode::format, "bad magic: not an SPX1 index");
  }
  detail::ByteReader r(bytes);
  r.get_bytes(4);
  SparseIndex index;
  index.header_.k = r.get_u32();
  index.header_.vocab_size = r.get_u32();
  const auto doc_count = r.get_u32();
  index.header_.dim = r.get_u32();
  index.header_.token_checksum = r.get_u32();

  index.doc_ids_.reserve(doc_count);
  for (std::uint32_t i = 0; i < doc_count; ++i) {
    const auto len = r.get_u32();
    index.doc_ids_.emplace_back(r.get_bytes(len));
    if (i > 0 && index.doc_ids_[i] <= index.doc_ids_[i - 1]) {
      throw Error(ErrorCode::validation,
                  "index doc ids are not strictly ascending");
    }
  }

  std::vector<std::size_t> per_doc(doc_count, 0);
  index.postings_.resize(index.header_.vocab_size);
  for (auto& list : index.postings_) {
    const auto count = r.get_u32();
    if (count > doc_count) {
      throw Error(ErrorCode::validation, "posting list longer than corpus");
    }
    list.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
      Posting p{r.get_u32(), r.get_f32()};
      if (p.doc >= doc_count || (i > 0 && p.doc <= list.back().doc)) {
        throw Error(ErrorCode::validation, "malformed posting list");
      }
      if (!std::isfinite(p.weight)) {
        throw Error(ErrorCode::validation, "non-finite posting weight");
      }
      ++per_doc[p.doc];
      list.push_back(p);
    }
  }
  if (r.remaining() != 0) {
    throw Error(ErrorCode::length_mismatch,
                std::to_string(r.remaining()) +
                    " trailing bytes after SPX1 postings");
  }
  for (std::uint32_t d = 0; d < doc_count; ++d) {
    if (per_doc[d] != index.header_.k) {
      throw Error(ErrorCode::validation,
                  "document \"" + index.doc_ids_[d] + "\" has " +
                      std::to_string(per_doc[d]) + " postings, expected K=" +
                      std::to_string(index.header_.k));
    }
  }
  return index;
}

SparseIndex build_index(const TokenizedCorpus& corpus,
                        const EmbeddingMatrix& doc_embeddings,
                        const EmbeddingMatrix& token_embeddings, std::size_t k,
                        unsigned threads) {
  if (k == 0) throw Error(ErrorCode::out_of_range, "K must be at least 1");
  check_k(k, token_embeddings.rows(), "K");
  if (corpus.size() != doc_embeddings.rows()) {
    throw Error(ErrorCode::dimension_mismatch,
                "corpus has " + std::to_string(corpus.size()) +
                    " documents but " + std::to_string(doc_embeddings.rows()) +
                    " embeddings were supplied");
  }
  if (doc_embeddings.dim() != token_embeddings.dim()) {
    throw Error(ErrorCode::dimension_mismatch,
                "document embeddings and token embeddings differ in dimension");
  }
  std::vector<SparseDocVector> docs(corpus.size());
  parallel_for(corpus.size(), threads, [&](std::size_t i) {
    docs[i] = build_sparse_doc(corpus.docs[i].id, doc_embeddings.row(i),
                               token_embeddings, k);
  });
  SparseIndex::Header header;
  header.k = static_cast<std::uint32_t>(k);
  header.vocab_size = token_embeddings.rows();
  header.dim = token_embeddings.dim();
  header.token_checksum = token_embedding_checksum(token_embeddings);
  return SparseIndex(header, std::move(docs));
}

SparseIndex read_index(const std::filesystem::path& path) {
  return SparseIndex::deserialize(read_file(path));
}

void write_index(const SparseIndex& index, const std::filesystem::path& path) {
  write_file_atomic(path, index.serialize());
}

ExpandedQuery expand_query(std::string query_id,
                           std::span<const TokenId> query_tokens,
                           std::span<const float> h,
                           const EmbeddingMatrix& token_embeddings,
                           std::size_t m) {
  check_k(m, token_embeddings.rows(), "M");
  ExpandedQuery q;
  q.query_id = std::move(query_id);
  q.literal_tokens = LiteralTokenSet(query_tokens).ids();
  for (auto t : q.literal_tokens) {
    if (t >= token_embeddings.rows()) {
      throw Error(ErrorCode::out_of_range,
                  "query token id " + std::to_string(t) +
                      " outside the vocabulary");
    }
  }
  if (m > 0) {
    q.expansion_tokens =
        rank_aligned(score_tokens(h, token_embeddings), m).token_ids;
  } else if (h.size() != token_embeddings.dim()) {
    throw Error(ErrorCode::dimension_mismatch,
                "query embedding and token embeddings differ in dimension");
  }
  q.tokens = q.literal_tokens;
  q.tokens.insert(q.tokens.end(), q.expansion_tokens.begin(),
                  q.expansion_tokens.end());
  std::sort(q.tokens.begin(), q.tokens.end());
  q.tokens.erase(std::unique(q.tokens.begin(), q.tokens.end()), q.tokens.end());
  return q;
}

RankedList search(const SparseIndex& index, const ExpandedQuery& query,
                  std::size_t top_n, SearchStats* stats) {
  std::vector<double> acc(index.doc_count(), 0.0);
  std::vector<std::uint32_t> touched;
  std::vector<char> seen(index.doc_count(), 0);
  std::size_t additions = 0;
  for (auto t : query.tokens) {
    if (t >= index.vocab_size()) continue;
    for (const auto& p : index.postings(t)) {
      acc[p.doc] += static_cast<double>(p.weight);
      ++additions;
      if (!seen[p.doc]) {
        seen[p.doc] = 1;
        touched.push_back(p.doc);
      }
    }
  }

  auto before = [&](std::uint32_t a, std::uint32_t b) {
    return ranks_before(acc[a], a, acc[b], b);
  };
  const std::size_t keep =
      top_n == 0 ? touched.size() : std::min(top_n, touched.size());
  std::partial_sort(touched.begin(),
                    touched.begin() + static_cast<std::ptrdiff_t>(keep),
                    touched.end(), before);

  RankedList list;
  list.query_id = query.query_id;
  list.results.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    list.results.push_back({index.doc_ids()[touched[i]], acc[touched[i]]});
  }
  if (stats != nullptr) {
    stats->scored_postings = additions;
    stats->scored_docs = touched.size();
  }
  return list;
}

CostReport cost_report(const SparseIndex& index,
                       std::span<const ExpandedQuery> queries) {
  CostReport report;
  for (const auto& q : queries) {
    SearchStats stats;
    search(index, q, 1, &stats);
    QueryCost c;
    c.query_id = q.query_id;
    c.sparse_ops = stats.scored_postings;
    c.scored_docs = stats.scored_docs;
    c.mean_additions_per_pair =
        stats.scored_docs == 0 ? 0.0
                               : static_cast<double>(stats.scored_postings) /
                                     static_cast<double>(stats.scored_docs);
    c.dense_ops = index.dim() * index.doc_count();
    report.total_sparse_ops += c.sparse_ops;
    report.total_dense_ops += c.dense_ops;
    report.queries.push_back(std::move(c));
  }
  report.ratio = report.total_dense_ops == 0
                     ? 0.0
                     : static_cast<double>(report.total_sparse_ops) /
                           static_cast<double>(report.total_dense_ops);
  return report;
}

std::string to_jsonl(const CostReport& report) {
  using nlohmann::ordered_json;
  std::string out;
  for (const auto& q : report.queries) {
    ordered_json rec;
    rec["record"] = "query_cost";
    rec["query_id"] = q.query_id;
    rec["sparse_ops"] = q.sparse_ops;
    rec["scored_docs"] = q.scored_docs;
    rec["mean_additions_per_pair"] = q.mean_additions_per_pair;
    rec["dense_ops"] = q.dense_ops;
    out += rec.dump() + "\n";
  }
  ordered_json summary;
  summary["record"] = "cost_summary";
  summary["queries"] = report.queries.size();
  summary["total_sparse_ops"] = report.total_sparse_ops;
  summary["total_dense_ops"] = report.total_dense_ops;
  summary["ratio"] = report.ratio;
  out += summary.dump() + "\n";
  return out;
}

}  // namespace tokalign
