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

#include "tokalign/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>

#include "tokalign/error.hpp"

namespace tokalign {

namespace {

double discount(std::size_t rank) {
  return std::log2(static_cast<double>(rank) + 1.0);
}

std::string shortest(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

std::optional<double> ndcg_at_k(const RankedList& ranking,
                                const RelevanceJudgments& judgments,
                                std::size_t k) {
  if (k == 0) throw Error(ErrorCode::out_of_range, "k must be at least 1");
  auto q = judgments.by_query.find(ranking.query_id);
  if (q == judgments.by_query.end()) return std::nullopt;

  std::vector<int> ideal;
  for (const auto& [doc, grade] : q->second) ideal.push_back(grade);
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  double idcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, ideal.size()); ++i) {
    idcg += static_cast<double>(ideal[i]) / discount(i + 1);
  }
  if (idcg <= 0.0) return std::nullopt;

  double dcg = 0.0;
  const auto depth = std::min(k, ranking.results.size());
  for (std::size_t i = 0; i < depth; ++i) {
    auto it = q->second.find(ranking.results[i].doc_id);
    if (it == q->second.end()) continue;
    dcg += static_cast<double>(it->second) / discount(i + 1);
  }
  return dcg / idcg;
}

std::string_view to_string(SkipReason reason) {
  return reason == SkipReason::no_relevant ? "no_relevant"
                                           : "missing_from_run";
}

EvaluationResult evaluate_run(std::span<const RankedList> runs,
                              const RelevanceJudgments& judgments,
                              std::size_t k) {
  if (k == 0) throw Error(ErrorCode::out_of_range, "k must be at least 1");
  EvaluationResult result;
  result.k = k;

  std::map<std::string, const RankedList*> by_query;
  for (const auto& run : runs) by_query.emplace(run.query_id, &run);

  std::map<std::string, SkipReason> skipped;
  std::map<std::string, double> scored;
  for (const auto& [qid, run] : by_query) {
    if (auto v = ndcg_at_k(*run, judgments, k)) {
      scored.emplace(qid, *v);
    } else {
      skipped.emplace(qid, SkipReason::no_relevant);
    }
  }
  for (const auto& [qid, docs] : judgments.by_query) {
    if (by_query.contains(qid)) continue;
    const bool any_relevant = std::any_of(
        docs.begin(), docs.end(), [](const auto& d) { return d.second > 0; });
    skipped.emplace(qid, any_relevant ? SkipReason::missing_from_run
                                      : SkipReason::no_relevant);
  }

  double sum = 0.0;
  for (const auto& [qid, v] : scored) {
    result.per_query.push_back({qid, v});
    sum += v;
  }
  for (const auto& [qid, reason] : skipped) {
    result.skipped.push_back({qid, reason});
  }
  if (!result.per_query.empty()) {
    result.macro_average = sum / static_cast<double>(result.per_query.size());
  }
  return result;
}

std::string format_evaluation(const EvaluationResult& result) {
  const std::string measure = "ndcg_cut_" + std::to_string(result.k);
  std::string out = "measure\tquery\tvalue\n";
  for (const auto& q : result.per_query) {
    out += measure + "\t" + q.query_id + "\t" + shortest(q.ndcg) + "\n";
  }
  for (const auto& s : result.skipped) {
    out += "skipped\t" + s.query_id + "\t" + std::string(to_string(s.reason)) +
           "\n";
  }
  out += "num_q\tall\t" + std::to_string(result.per_query.size()) + "\n";
  out += "num_skipped\tall\t" + std::to_string(result.skipped.size()) + "\n";
  out += measure + "\tall\t" + shortest(result.macro_average) + "\n";
  return out;
}

}  // namespace tokalign
