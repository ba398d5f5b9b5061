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

#include "tokalign/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <system_error>

#include <unistd.h>

#include "byte_io.hpp"
#include "tokalign/error.hpp"

namespace tokalign {

namespace {

constexpr std::string_view kEmbeddingMagic = "EMB1";
constexpr std::size_t kEmbeddingHeaderBytes = 12;

// Splits on '\n'. A trailing newline does not produce an empty record.
std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

std::vector<std::string_view> split_whitespace(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  auto is_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f';
  };
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    auto start = i;
    while (i < line.size() && !is_space(line[i])) ++i;
    if (i > start) fields.push_back(line.substr(start, i - start));
  }
  return fields;
}

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

[[noreturn]] void line_error(ErrorCode code, std::size_t line_no,
                             const std::string& what) {
  throw Error(code, "line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::usage:
      return "usage";
    case ErrorCode::io:
      return "io";
    case ErrorCode::format:
      return "format";
    case ErrorCode::length_mismatch:
      return "length_mismatch";
    case ErrorCode::validation:
      return "validation";
    case ErrorCode::out_of_range:
      return "out_of_range";
    case ErrorCode::dimension_mismatch:
      return "dimension_mismatch";
    case ErrorCode::numerical:
      return "numerical";
  }
  return "unknown";
}

EmbeddingMatrix::EmbeddingMatrix(std::uint32_t rows, std::uint32_t dim,
                                 std::vector<float> data)
    : rows_(rows), dim_(dim), data_(std::move(data)) {
  if (rows_ == 0 || dim_ == 0) {
    throw Error(ErrorCode::validation,
                "embedding matrix must have at least one row and column");
  }
  if (data_.size() != static_cast<std::size_t>(rows_) * dim_) {
    throw Error(ErrorCode::length_mismatch,
                "embedding matrix payload has " +
                    std::to_string(data_.size()) + " values, expected " +
                    std::to_string(static_cast<std::size_t>(rows_) * dim_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw Error(ErrorCode::validation,
                  "non-finite value at row " + std::to_string(i / dim_) +
                      ", column " + std::to_string(i % dim_));
    }
  }
}

EmbeddingMatrix EmbeddingMatrix::slice(std::size_t first,
                                       std::size_t count) const {
  if (first + count > rows_) {
    throw Error(ErrorCode::out_of_range, "row slice exceeds matrix");
  }
  auto begin = data_.begin() + static_cast<std::ptrdiff_t>(first * dim_);
  return EmbeddingMatrix(static_cast<std::uint32_t>(count), dim_,
                         std::vector<float>(begin, begin + static_cast<std::ptrdiff_t>(count * dim_)));
}

std::size_t TokenizedCorpus::token_count() const noexcept {
  std::size_t n = 0;
  for (const auto& d : docs) n += d.token_ids.size();
  return n;
}

std::size_t RelevanceJudgments::size() const noexcept {
  std::size_t n = 0;
  for (const auto& [q, docs] : by_query) n += docs.size();
  return n;
}

int RelevanceJudgments::grade(const std::string& query_id,
                              const std::string& doc_id) const {
  auto q = by_query.find(query_id);
  if (q == by_query.end()) return 0;
  auto d = q->second.find(doc_id);
  return d == q->second.end() ? 0 : d->second;
}

std::string encode_embedding_matrix(const EmbeddingMatrix& m) {
  detail::ByteWriter w;
  w.put_bytes(kEmbeddingMagic);
  w.put_u32(m.rows());
  w.put_u32(m.dim());
  for (float v : m.data()) w.put_f32(v);
  return w.take();
}

EmbeddingMatrix decode_embedding_matrix(std::string_view bytes) {
  if (!kEmbeddingMagic.starts_with(bytes.substr(0, 4))) {
    throw Error(ErrorCode::format, "bad magic: not an EMB1 file");
  }
  if (bytes.size() < kEmbeddingHeaderBytes) {
    throw Error(ErrorCode::length_mismatch, "truncated EMB1 header");
  }
  detail::ByteReader r(bytes);
  if (r.get_bytes(4) != kEmbeddingMagic) {
    throw Error(ErrorCode::format, "bad magic: not an EMB1 file");
  }
  auto rows = r.get_u32();
  auto dim = r.get_u32();
  auto expected = static_cast<std::uint64_t>(rows) * dim * 4;
  if (r.remaining() != expected) {
    throw Error(ErrorCode::length_mismatch,
                "EMB1 header declares " + std::to_string(rows) + "x" +
                    std::to_string(dim) + " (" + std::to_string(expected) +
                    " payload bytes) but file has " +
                    std::to_string(r.remaining()));
  }
  std::vector<float> data(static_cast<std::size_t>(rows) * dim);
  for (auto& v : data) v = r.get_f32();
  return EmbeddingMatrix(rows, dim, std::move(data));
}

EmbeddingMatrix read_embedding_matrix(const std::filesystem::path& path) {
  return decode_embedding_matrix(read_file(path));
}

void write_embedding_matrix(const EmbeddingMatrix& m,
                            const std::filesystem::path& path) {
  write_file_atomic(path, encode_embedding_matrix(m));
}

std::pair<std::uint32_t, std::uint32_t> peek_embedding_shape(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  std::string header(kEmbeddingHeaderBytes, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header.size()));
  header.resize(static_cast<std::size_t>(in.gcount()));
  if (header.size() < kEmbeddingHeaderBytes) {
    throw Error(ErrorCode::length_mismatch,
                "truncated EMB1 header in " + path.string());
  }
  detail::ByteReader r(header);
  if (r.get_bytes(4) != kEmbeddingMagic) {
    throw Error(ErrorCode::format, path.string() + " is not an EMB1 file");
  }
  auto rows = r.get_u32();
  auto dim = r.get_u32();
  return {rows, dim};
}

TokenTable parse_token_table(std::string_view text) {
  std::vector<std::string> texts;
  auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto line = lines[i];
    auto tab = line.find('\t');
    std::uint32_t id = 0;
    if (tab == std::string_view::npos || !parse_int(line.substr(0, tab), id)) {
      line_error(ErrorCode::format, i + 1, "expected \"<id>\\t<token>\"");
    }
    if (id < texts.size()) {
      line_error(ErrorCode::validation, i + 1,
                 "duplicate token id " + std::to_string(id));
    }
    if (id > texts.size()) {
      line_error(ErrorCode::validation, i + 1,
                 "gap in token ids: expected " + std::to_string(texts.size()) +
                     ", got " + std::to_string(id));
    }
    texts.emplace_back(line.substr(tab + 1));
  }
  if (texts.empty()) throw Error(ErrorCode::validation, "empty token table");
  return TokenTable(std::move(texts));
}

TokenTable read_token_table(const std::filesystem::path& path) {
  return parse_token_table(read_file(path));
}

void write_token_table(const TokenTable& table,
                       const std::filesystem::path& path) {
  std::string out;
  for (std::size_t id = 0; id < table.size(); ++id) {
    const auto& t = table.texts()[id];
    if (t.find('\n') != std::string::npos) {
      throw Error(ErrorCode::validation,
                  "token " + std::to_string(id) + " contains a newline");
    }
    out += std::to_string(id);
    out += '\t';
    out += t;
    out += '\n';
  }
  write_file_atomic(path, out);
}

TokenizedCorpus parse_tokenized_corpus(std::string_view text,
                                       std::size_t vocab_size) {
  TokenizedCorpus corpus;
  std::set<std::string, std::less<>> seen;
  auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto line = lines[i];
    auto tab = line.find('\t');
    if (tab == std::string_view::npos || tab == 0) {
      line_error(ErrorCode::format, i + 1,
                 "expected \"<doc_id>\\t<token ids>\"");
    }
    Document doc;
    doc.id = std::string(line.substr(0, tab));
    for (auto field : split_whitespace(line.substr(tab + 1))) {
      std::uint32_t id = 0;
      if (!parse_int(field, id)) {
        line_error(ErrorCode::format, i + 1,
                   "bad token id \"" + std::string(field) + "\"");
      }
      if (vocab_size != 0 && id >= vocab_size) {
        line_error(ErrorCode::out_of_range, i + 1,
                   "token id " + std::to_string(id) +
                       " outside vocabulary of size " +
                       std::to_string(vocab_size));
      }
      doc.token_ids.push_back(id);
    }
    if (doc.token_ids.empty()) {
      line_error(ErrorCode::validation, i + 1,
                 "document \"" + doc.id + "\" has no tokens");
    }
    if (!seen.insert(doc.id).second) {
      line_error(ErrorCode::validation, i + 1,
                 "duplicate doc id \"" + doc.id + "\"");
    }
    corpus.docs.push_back(std::move(doc));
  }
  return corpus;
}

TokenizedCorpus read_tokenized_corpus(const std::filesystem::path& path,
                                      std::size_t vocab_size) {
  return parse_tokenized_corpus(read_file(path), vocab_size);
}

void write_tokenized_corpus(const TokenizedCorpus& corpus,
                            const std::filesystem::path& path) {
  std::string out;
  for (const auto& d : corpus.docs) {
    if (d.id.empty() || d.id.find_first_of("\t\n") != std::string::npos) {
      throw Error(ErrorCode::validation, "invalid doc id \"" + d.id + "\"");
    }
    out += d.id;
    out += '\t';
    for (std::size_t j = 0; j < d.token_ids.size(); ++j) {
      if (j) out += ' ';
      out += std::to_string(d.token_ids[j]);
    }
    out += '\n';
  }
  write_file_atomic(path, out);
}

RelevanceJudgments parse_qrels(std::string_view text) {
  RelevanceJudgments qrels;
  auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto fields = split_whitespace(lines[i]);
    if (fields.empty()) continue;
    int grade = 0;
    if (fields.size() != 4 || !parse_int(fields[3], grade)) {
      line_error(ErrorCode::format, i + 1,
                 "expected \"query_id iter doc_id grade\"");
    }
    if (grade < 0) {
      line_error(ErrorCode::validation, i + 1, "negative relevance grade");
    }
    auto& docs = qrels.by_query[std::string(fields[0])];
    if (!docs.emplace(std::string(fields[2]), grade).second) {
      line_error(ErrorCode::validation, i + 1,
                 "duplicate judgment for (" + std::string(fields[0]) + ", " +
                     std::string(fields[2]) + ")");
    }
  }
  return qrels;
}

RelevanceJudgments read_qrels(const std::filesystem::path& path) {
  return parse_qrels(read_file(path));
}

void write_qrels(const RelevanceJudgments& qrels,
                 const std::filesystem::path& path) {
  std::string out;
  for (const auto& [q, docs] : qrels.by_query) {
    for (const auto& [d, grade] : docs) {
      out += q + " 0 " + d + " " + std::to_string(grade) + "\n";
    }
  }
  write_file_atomic(path, out);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::io, "read failed: " + path.string());
  return std::move(ss).str();
}

void write_file_atomic(const std::filesystem::path& path,
                       std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io, "cannot create " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw Error(ErrorCode::io, "write failed: " + path.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCode::io, "cannot rename into " + path.string());
  }
}

}  // namespace tokalign
