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

#include "tokalign/run.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <sstream>

#include "tokalign/error.hpp"
#include "tokalign/io.hpp"

namespace tokalign {

namespace {

std::string shortest(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

std::string format_trec_run(std::span<const RankedList> runs,
                            std::string_view run_tag) {
  std::string out;
  for (const auto& run : runs) {
    for (std::size_t i = 0; i < run.results.size(); ++i) {
      const auto& r = run.results[i];
      out += run.query_id;
      out += " Q0 ";
      out += r.doc_id;
      out += ' ';
      out += std::to_string(i + 1);
      out += ' ';
      out += shortest(r.score);
      out += ' ';
      out += run_tag;
      out += '\n';
    }
  }
  return out;
}

std::vector<RankedList> parse_trec_run(std::string_view text) {
  struct Line {
    long rank;
    std::size_t order;
    ScoredDoc doc;
  };
  std::vector<std::string> query_order;
  std::map<std::string, std::vector<Line>> by_query;

  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string qid, q0, doc, rank_s, score_s, tag;
    if (!(fields >> qid)) continue;
    if (!(fields >> q0 >> doc >> rank_s >> score_s >> tag)) {
      throw Error(ErrorCode::format,
                  "run line " + std::to_string(line_no) +
                      ": expected \"query_id Q0 doc_id rank score tag\"");
    }
    long rank = 0;
    double score = 0.0;
    auto r1 = std::from_chars(rank_s.data(), rank_s.data() + rank_s.size(), rank);
    auto r2 =
        std::from_chars(score_s.data(), score_s.data() + score_s.size(), score);
    if (r1.ec != std::errc() || r1.ptr != rank_s.data() + rank_s.size() ||
        r2.ec != std::errc() || r2.ptr != score_s.data() + score_s.size()) {
      throw Error(ErrorCode::format,
                  "run line " + std::to_string(line_no) + ": bad rank or score");
    }
    auto [it, inserted] = by_query.try_emplace(qid);
    if (inserted) query_order.push_back(qid);
    it->second.push_back({rank, it->second.size(), {doc, score}});
  }

  std::vector<RankedList> runs;
  runs.reserve(query_order.size());
  for (const auto& qid : query_order) {
    auto& lines = by_query[qid];
    std::stable_sort(lines.begin(), lines.end(),
                     [](const Line& a, const Line& b) { return a.rank < b.rank; });
    RankedList list;
    list.query_id = qid;
    for (auto& l : lines) list.results.push_back(std::move(l.doc));
    runs.push_back(std::move(list));
  }
  return runs;
}

std::vector<RankedList> read_trec_run(const std::filesystem::path& path) {
  return parse_trec_run(read_file(path));
}

}  // namespace tokalign
