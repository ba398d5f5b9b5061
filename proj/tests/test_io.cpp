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

#include <cmath>
#include <cstring>
#include <limits>

#include <doctest.h>

#include "test_support.hpp"
#include "tokalign/error.hpp"
#include "tokalign/io.hpp"

using namespace tokalign;
using tokalign::testing::TempDir;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected tokalign::Error");
  return ErrorCode::io;
}

std::string header(std::uint32_t rows, std::uint32_t dim) {
  std::string s = "EMB1";
  for (auto v : {rows, dim}) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  return s;
}

std::string le_float(float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  std::string s;
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  return s;
}

}  // namespace

TEST_CASE("EMB1 minimal file decodes") {
  auto m = decode_embedding_matrix(header(1, 2) + le_float(1.0f) + le_float(0.0f));
  CHECK(m.rows() == 1);
  CHECK(m.dim() == 2);
  CHECK(m.row(0)[0] == 1.0f);
  CHECK(m.row(0)[1] == 0.0f);
}

TEST_CASE("EMB1 1x1 file is 16 bytes") {
  TempDir dir;
  write_embedding_matrix(EmbeddingMatrix(1, 1, {0.0f}), dir / "m.emb1");
  CHECK(std::filesystem::file_size(dir / "m.emb1") == 16);
  CHECK(read_file(dir / "m.emb1") == header(1, 1) + le_float(0.0f));
}

TEST_CASE("EMB1 header fields are little-endian") {
  auto bytes = encode_embedding_matrix(EmbeddingMatrix(258, 1, std::vector<float>(258, 0.5f)));
  CHECK(static_cast<unsigned char>(bytes[4]) == 2);
  CHECK(static_cast<unsigned char>(bytes[5]) == 1);
  CHECK(bytes.substr(12, 4) == le_float(0.5f));
}

TEST_CASE("EMB1 reader errors") {
  SUBCASE("short payload") {
    std::string s = header(2, 3);
    for (int i = 0; i < 5; ++i) s += le_float(1.0f);
    CHECK(code_of([&] { decode_embedding_matrix(s); }) == ErrorCode::length_mismatch);
  }
  SUBCASE("extra payload") {
    std::string s = header(1, 1) + le_float(1.0f) + le_float(2.0f);
    CHECK(code_of([&] { decode_embedding_matrix(s); }) == ErrorCode::length_mismatch);
  }
  SUBCASE("bad magic") {
    std::string s = header(1, 1) + le_float(1.0f);
    s[3] = '2';
    CHECK(code_of([&] { decode_embedding_matrix(s); }) == ErrorCode::format);
  }
  SUBCASE("truncated header") {
    CHECK(code_of([&] { decode_embedding_matrix("EMB1\x01"); }) == ErrorCode::length_mismatch);
  }
  SUBCASE("non-finite values") {
    auto nan = std::numeric_limits<float>::quiet_NaN();
    auto inf = std::numeric_limits<float>::infinity();
    CHECK(code_of([&] { decode_embedding_matrix(header(1, 1) + le_float(nan)); }) ==
          ErrorCode::validation);
    CHECK(code_of([&] { decode_embedding_matrix(header(1, 1) + le_float(-inf)); }) ==
          ErrorCode::validation);
  }
  SUBCASE("zero rows") {
    CHECK(code_of([&] { decode_embedding_matrix(header(0, 3)); }) == ErrorCode::validation);
  }
  SUBCASE("missing file") {
    CHECK(code_of([] { read_embedding_matrix("/nonexistent/x.emb1"); }) == ErrorCode::io);
  }
}

TEST_CASE("EMB1 round trip is bitwise") {
  TempDir dir;
  std::mt19937 rng(7);
  for (auto [rows, dim] : {std::pair{100u, 64u}, std::pair{3u, 5u}, std::pair{2u, 2u}}) {
    auto m = tokalign::testing::random_matrix(rng, rows, dim);
    // Include values whose bit patterns are easy to corrupt.
    std::vector<float> data(m.data().begin(), m.data().end());
    data[0] = -0.0f;
    data[1] = std::numeric_limits<float>::denorm_min();
    data[2] = std::numeric_limits<float>::max();
    m = EmbeddingMatrix(rows, dim, data);
    write_embedding_matrix(m, dir / "m.emb1");
    auto back = read_embedding_matrix(dir / "m.emb1");
    REQUIRE(back.rows() == rows);
    REQUIRE(back.dim() == dim);
    CHECK(std::memcmp(back.data().data(), m.data().data(), m.data().size_bytes()) == 0);
    CHECK(peek_embedding_shape(dir / "m.emb1") == std::pair{rows, dim});
  }
}

TEST_CASE("token table") {
  auto t = parse_token_table("0\ta\n1\tb\n");
  REQUIRE(t.size() == 2);
  CHECK(t.text(0) == "a");
  CHECK(t.text(1) == "b");

  CHECK(parse_token_table("0\t\tx y\n1\t\n").text(0) == "\tx y");
  CHECK(parse_token_table("0\t\tx y\n1\t\n").text(1).empty());

  CHECK(code_of([] { parse_token_table("0\ta\n2\tc\n"); }) == ErrorCode::validation);
  CHECK(code_of([] { parse_token_table("0\ta\n0\tb\n"); }) == ErrorCode::validation);
  CHECK(code_of([] { parse_token_table("0 a\n"); }) == ErrorCode::format);
  CHECK(code_of([] { parse_token_table("x\ta\n"); }) == ErrorCode::format);
  CHECK(code_of([] { parse_token_table(""); }) == ErrorCode::validation);
}

TEST_CASE("large token table round trip keeps ids contiguous") {
  TempDir dir;
  std::vector<std::string> texts;
  for (int i = 0; i < 32000; ++i) texts.push_back("\xe2\x96\x81tok" + std::to_string(i));
  write_token_table(TokenTable(texts), dir / "t.tsv");
  auto back = read_token_table(dir / "t.tsv");
  CHECK(back.size() == 32000);
  CHECK(back == TokenTable(texts));
}

TEST_CASE("tokenized corpus") {
  auto c = parse_tokenized_corpus("doc1\t3 1 3\n");
  REQUIRE(c.size() == 1);
  CHECK(c.docs[0].id == "doc1");
  CHECK(c.docs[0].token_ids == std::vector<std::uint32_t>{3, 1, 3});

  CHECK(code_of([] { parse_tokenized_corpus("d\t9\n", 5); }) == ErrorCode::out_of_range);
  CHECK(code_of([] { parse_tokenized_corpus("d\t1\nd\t2\n"); }) == ErrorCode::validation);
  CHECK(code_of([] { parse_tokenized_corpus("d\t\n"); }) == ErrorCode::validation);
  CHECK(code_of([] { parse_tokenized_corpus("d\t1 x\n"); }) == ErrorCode::format);
  CHECK(code_of([] { parse_tokenized_corpus("d 1\n"); }) == ErrorCode::format);

  TempDir dir;
  std::mt19937 rng(3);
  auto corpus = tokalign::testing::random_corpus(rng, 25, 100, 12);
  write_tokenized_corpus(corpus, dir / "c.tsv");
  CHECK(read_tokenized_corpus(dir / "c.tsv", 100) == corpus);
}

TEST_CASE("qrels") {
  auto q = parse_qrels("q1 0 d1 1\n");
  CHECK(q.size() == 1);
  CHECK(q.grade("q1", "d1") == 1);
  CHECK(q.grade("q1", "d2") == 0);

  CHECK(code_of([] { parse_qrels("q1 0 d1 1\nq1 0 d1 2\n"); }) == ErrorCode::validation);
  CHECK(code_of([] { parse_qrels("q1 0 d1\n"); }) == ErrorCode::format);
  CHECK(code_of([] { parse_qrels("q1 0 d1 -1\n"); }) == ErrorCode::validation);

  std::string text;
  for (int qi = 0; qi < 3; ++qi) {
    for (int d = 0; d < 10; ++d) {
      text += "q" + std::to_string(qi) + "\tQ0\td" + std::to_string(d) + "  " +
              std::to_string((qi + d) % 3) + "\n";
    }
  }
  auto fixture = parse_qrels(text);
  CHECK(fixture.size() == 30);
  CHECK(fixture.by_query.size() == 3);
  CHECK(fixture.grade("q2", "d7") == 0);
  CHECK(fixture.grade("q1", "d7") == 2);
}

TEST_CASE("atomic write leaves no temporary behind") {
  TempDir dir;
  write_file_atomic(dir / "a.txt", "hello");
  write_file_atomic(dir / "a.txt", "bye");
  CHECK(read_file(dir / "a.txt") == "bye");
  std::size_t files = 0;
  for ([[maybe_unused]] auto& e : std::filesystem::directory_iterator(dir.path())) ++files;
  CHECK(files == 1);
  CHECK(code_of([&] { write_file_atomic(dir / "missing" / "a.txt", "x"); }) == ErrorCode::io);
}
