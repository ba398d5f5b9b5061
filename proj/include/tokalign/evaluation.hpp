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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tokalign/io.hpp"
#include "tokalign/run.hpp"

namespace tokalign {

/// nDCG@k with linear gain and log2(rank + 1) discount. The ideal ordering
/// sorts the query's judged grades in descending order. Returns nullopt
/// when the query has no relevant (grade > 0) judgment, as nDCG is then
/// undefined.
std::optional<double> ndcg_at_k(const RankedList& ranking,
                                const RelevanceJudgments& judgments,
                                std::size_t k);

enum class SkipReason { no_relevant, missing_from_run };

std::string_view to_string(SkipReason reason);

struct QueryEvaluation {
  std::string query_id;
  double ndcg = 0.0;
};

struct SkippedQuery {
  std::string query_id;
  SkipReason reason = SkipReason::no_relevant;
};

struct EvaluationResult {
  std::size_t k = 0;
  std::vector<QueryEvaluation> per_query;  // sorted by query id
  std::vector<SkippedQuery> skipped;       // sorted by query id
  double macro_average = 0.0;              // over per_query only
};

/// Scores every query of the run that has relevant judgments. Judged
/// queries absent from the run and queries without relevant documents are
/// listed as skipped rather than scored zero.
EvaluationResult evaluate_run(std::span<const RankedList> runs,
                              const RelevanceJudgments& judgments,
                              std::size_t k);

/// Tab-separated table: one "ndcg_cut_<k>" row per query, one "skipped" row
/// per skipped query, then the "all" rows.
std::string format_evaluation(const EvaluationResult& result);

}  // namespace tokalign
