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

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tokalign {

struct ScoredDoc {
  std::string doc_id;
  double score = 0.0;

  friend bool operator==(const ScoredDoc&, const ScoredDoc&) = default;
};

/// Results of one query, best first.
struct RankedList {
  std::string query_id;
  std::vector<ScoredDoc> results;

  friend bool operator==(const RankedList&, const RankedList&) = default;
};

// TREC run format: "query_id Q0 doc_id rank score run_tag", rank from 1.
// Scores are written in shortest round-trip form.
std::string format_trec_run(std::span<const RankedList> runs,
                            std::string_view run_tag);

/// Groups lines by query (first-appearance order) and orders each query's
/// results by the rank column; equal ranks keep file order.
std::vector<RankedList> parse_trec_run(std::string_view text);

std::vector<RankedList> read_trec_run(const std::filesystem::path& path);

}  // namespace tokalign
