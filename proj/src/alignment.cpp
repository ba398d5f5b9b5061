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

#include "tokalign/alignment.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "tokalign/error.hpp"
#include "tokalign/parallel.hpp"

namespace tokalign {

namespace {

template <typename T>
std::vector<double> score_tokens_impl(std::span<const T> h,
                                      const EmbeddingMatrix& token_embeddings) {
  if (h.size() != token_embeddings.dim()) {
    throw Error(ErrorCode::dimension_mismatch,
                "embedding has dimension " + std::to_string(h.size()) +
                    " but token embeddings have " +
                    std::to_string(token_embeddings.dim()));
  }
  std::vector<double> scores(token_embeddings.rows());
  for (std::size_t t = 0; t < scores.size(); ++t) {
    auto e = token_embeddings.row(t);
    double acc = 0.0;
    for (std::size_t c = 0; c < h.size(); ++c) {
      acc += static_cast<double>(e[c]) * static_cast<double>(h[c]);
    }
    scores[t] = acc;
  }
  return scores;
}

void check_alignment_inputs(const TokenizedCorpus& corpus,
                            const EmbeddingMatrix& embeddings,
                            const EmbeddingMatrix& token_embeddings) {
  if (corpus.size() != embeddings.rows()) {
    throw Error(ErrorCode::dimension_mismatch,
                "corpus has " + std::to_string(corpus.size()) +
                    " documents but " + std::to_string(embeddings.rows()) +
                    " embeddings were supplied");
  }
  if (embeddings.dim() != token_embeddings.dim()) {
    throw Error(ErrorCode::dimension_mismatch,
                "text embeddings and token embeddings differ in dimension");
  }
  for (const auto& doc : corpus.docs) {
    if (doc.token_ids.empty()) {
      throw Error(ErrorCode::validation,
                  "document \"" + doc.id + "\" has no tokens");
    }
    for (auto t : doc.token_ids) {
      if (t >= token_embeddings.rows()) {
        throw Error(ErrorCode::out_of_range,
                    "document \"" + doc.id + "\" has token id " +
                        std::to_string(t) + " outside the vocabulary");
      }
    }
  }
}

}  // namespace

std::vector<double> score_tokens(std::span<const float> h,
                                 const EmbeddingMatrix& token_embeddings) {
  return score_tokens_impl(h, token_embeddings);
}

std::vector<double> score_tokens(std::span<const double> h,
                                 const EmbeddingMatrix& token_embeddings) {
  return score_tokens_impl(h, token_embeddings);
}

AlignedTokenRanking rank_aligned(std::span<const double> scores) {
  return rank_aligned(scores, scores.size());
}

AlignedTokenRanking rank_aligned(std::span<const double> scores,
                                 std::size_t count) {
  count = std::min(count, scores.size());
  std::vector<TokenId> order(scores.size());
  std::iota(order.begin(), order.end(), TokenId{0});
  auto before = [&](TokenId a, TokenId b) {
    return ranks_before(scores[a], a, scores[b], b);
  };
  std::partial_sort(order.begin(),
                    order.begin() + static_cast<std::ptrdiff_t>(count),
                    order.end(), before);
  order.resize(count);

  AlignedTokenRanking ranking;
  ranking.scores.reserve(count);
  for (auto t : order) ranking.scores.push_back(scores[t]);
  ranking.token_ids = std::move(order);
  return ranking;
}

LiteralTokenSet::LiteralTokenSet(std::span<const TokenId> token_ids)
    : ids_(token_ids.begin(), token_ids.end()) {
  std::sort(ids_.begin(), ids_.end());
  ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
}

bool LiteralTokenSet::contains(TokenId id) const {
  return std::binary_search(ids_.begin(), ids_.end(), id);
}

LiteralTokenSet literal_token_set(std::span<const TokenId> doc) {
  if (doc.empty()) {
    throw Error(ErrorCode::validation, "literal token set of an empty text");
  }
  return LiteralTokenSet(doc);
}

std::string_view to_string(TokenLabel label) {
  return label == TokenLabel::literal ? "literal" : "non-literal";
}

TokenLabel classify_token(TokenId id, const LiteralTokenSet& literal) {
  return literal.contains(id) ? TokenLabel::literal : TokenLabel::non_literal;
}

std::vector<DocumentAlignment> align_documents(
    const TokenizedCorpus& corpus, const EmbeddingMatrix& embeddings,
    const EmbeddingMatrix& token_embeddings, std::size_t k, unsigned threads) {
  if (k == 0) throw Error(ErrorCode::out_of_range, "K must be at least 1");
  check_alignment_inputs(corpus, embeddings, token_embeddings);

  std::vector<DocumentAlignment> out(corpus.size());
  parallel_for(corpus.size(), threads, [&](std::size_t i) {
    auto& doc = out[i];
    doc.literal = literal_token_set(corpus.docs[i].token_ids);
    const auto scores = score_tokens(embeddings.row(i), token_embeddings);
    doc.ranking = rank_aligned(scores, std::max(k, doc.literal.size()));

    for (auto t : doc.ranking.top(k)) {
      if (doc.literal.contains(t)) {
        doc.hit = true;
        break;
      }
    }
    for (auto t : doc.ranking.top(doc.literal.size())) {
      if (doc.literal.contains(t)) doc.aligned_literal.push_back(t);
    }
    std::sort(doc.aligned_literal.begin(), doc.aligned_literal.end());
  });
  return out;
}

AlignmentMetrics aggregate_metrics(std::span<const DocumentAlignment> docs) {
  AlignmentMetrics m;
  if (docs.empty()) return m;
  double hits = 0.0;
  double local = 0.0;
  std::set<TokenId> aligned_union;
  std::set<TokenId> literal_union;
  for (const auto& d : docs) {
    hits += d.hit ? 1.0 : 0.0;
    local += static_cast<double>(d.aligned_literal.size()) /
             static_cast<double>(d.literal.size());
    aligned_union.insert(d.aligned_literal.begin(), d.aligned_literal.end());
    literal_union.insert(d.literal.ids().begin(), d.literal.ids().end());
  }
  const auto n = static_cast<double>(docs.size());
  m.hit_at_k = hits / n;
  m.lar = local / n;
  m.gar = static_cast<double>(aligned_union.size()) /
          static_cast<double>(literal_union.size());
  return m;
}

double hit_at_k(const TokenizedCorpus& corpus,
                const EmbeddingMatrix& embeddings,
                const EmbeddingMatrix& token_embeddings, std::size_t k,
                unsigned threads) {
  auto docs = align_documents(corpus, embeddings, token_embeddings, k, threads);
  return aggregate_metrics(docs).hit_at_k;
}

double lar(const TokenizedCorpus& corpus, const EmbeddingMatrix& embeddings,
           const EmbeddingMatrix& token_embeddings, unsigned threads) {
  auto docs = align_documents(corpus, embeddings, token_embeddings, 1, threads);
  return aggregate_metrics(docs).lar;
}

double gar(const TokenizedCorpus& corpus, const EmbeddingMatrix& embeddings,
           const EmbeddingMatrix& token_embeddings, unsigned threads) {
  auto docs = align_documents(corpus, embeddings, token_embeddings, 1, threads);
  return aggregate_metrics(docs).gar;
}

AlignmentReport alignment_report(const TokenizedCorpus& corpus,
                                 const EmbeddingMatrix& embeddings,
                                 const EmbeddingMatrix& token_embeddings,
                                 std::size_t k, const TokenTable* tokens,
                                 unsigned threads) {
  auto docs = align_documents(corpus, embeddings, token_embeddings, k, threads);
  AlignmentReport report;
  report.k = k;
  report.metrics = aggregate_metrics(docs);
  report.docs.reserve(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const auto& d = docs[i];
    DocumentReport r;
    r.doc_id = corpus.docs[i].id;
    r.literal_count = d.literal.size();
    r.aligned_literal_count = d.aligned_literal.size();
    r.hit = d.hit;
    const auto top = d.ranking.top(k);
    for (std::size_t j = 0; j < top.size(); ++j) {
      AlignedToken tok;
      tok.id = top[j];
      tok.score = d.ranking.scores[j];
      tok.label = classify_token(tok.id, d.literal);
      if (tokens != nullptr && tok.id < tokens->size()) {
        tok.text = tokens->text(tok.id);
      }
      r.top.push_back(std::move(tok));
    }
    report.docs.push_back(std::move(r));
  }
  return report;
}

std::string to_jsonl(const AlignmentReport& report) {
  using nlohmann::ordered_json;
  std::string out;
  for (const auto& d : report.docs) {
    ordered_json rec;
    rec["record"] = "document";
    rec["doc_id"] = d.doc_id;
    rec["literal_count"] = d.literal_count;
    rec["aligned_literal_count"] = d.aligned_literal_count;
    rec["hit"] = d.hit;
    auto& top = rec["top"] = ordered_json::array();
    for (const auto& t : d.top) {
      ordered_json tok;
      tok["token_id"] = t.id;
      if (!t.text.empty()) tok["text"] = t.text;
      tok["score"] = t.score;
      tok["label"] = to_string(t.label);
      top.push_back(std::move(tok));
    }
    out += rec.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
    out += '\n';
  }
  ordered_json summary;
  summary["record"] = "summary";
  summary["k"] = report.k;
  summary["documents"] = report.docs.size();
  summary["hit_at_k"] = report.metrics.hit_at_k;
  summary["lar"] = report.metrics.lar;
  summary["gar"] = report.metrics.gar;
  summary["parameters"] = report.parameters;
  out += summary.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
  out += '\n';
  return out;
}

AlignmentReport parse_alignment_report(std::string_view jsonl) {
  AlignmentReport report;
  bool have_summary = false;
  std::size_t start = 0;
  while (start < jsonl.size()) {
    auto end = jsonl.find('\n', start);
    if (end == std::string_view::npos) end = jsonl.size();
    auto line = jsonl.substr(start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    try {
      auto rec = nlohmann::json::parse(line);
      const auto kind = rec.at("record").get<std::string>();
      if (kind == "document") {
        DocumentReport d;
        d.doc_id = rec.at("doc_id").get<std::string>();
        d.literal_count = rec.at("literal_count").get<std::size_t>();
        d.aligned_literal_count =
            rec.at("aligned_literal_count").get<std::size_t>();
        d.hit = rec.at("hit").get<bool>();
        for (const auto& t : rec.at("top")) {
          AlignedToken tok;
          tok.id = t.at("token_id").get<TokenId>();
          tok.score = t.at("score").get<double>();
          tok.label = t.at("label").get<std::string>() == "literal"
                          ? TokenLabel::literal
                          : TokenLabel::non_literal;
          tok.text = t.value("text", std::string());
          d.top.push_back(std::move(tok));
        }
        report.docs.push_back(std::move(d));
      } else if (kind == "summary") {
        report.k = rec.at("k").get<std::size_t>();
        report.metrics.hit_at_k = rec.at("hit_at_k").get<double>();
        report.metrics.lar = rec.at("lar").get<double>();
        report.metrics.gar = rec.at("gar").get<double>();
        report.parameters =
            rec.at("parameters").get<std::map<std::string, std::string>>();
        have_summary = true;
      } else {
        throw Error(ErrorCode::format, "unknown report record \"" + kind + "\"");
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::format, std::string("malformed report: ") + e.what());
    }
  }
  if (!have_summary) {
    throw Error(ErrorCode::format, "report has no summary record");
  }
  return report;
}

}  // namespace tokalign
