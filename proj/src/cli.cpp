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

#include "tokalign/cli.hpp"

#include <cmath>
#include <ostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tokalign/alignment.hpp"
#include "tokalign/evaluation.hpp"
#include "tokalign/io.hpp"
#include "tokalign/parallel.hpp"
#include "tokalign/pooling.hpp"
#include "tokalign/sparse_retrieval.hpp"
#include "tokalign/spectral.hpp"

namespace tokalign::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

[[noreturn]] void usage_error(const std::string& what) {
  throw Error(ErrorCode::usage, what);
}

void require_input(const fs::path& path, const std::string& flag) {
  if (path.empty()) usage_error("missing required flag " + flag);
  if (!fs::is_regular_file(path)) {
    usage_error(flag + ": no such file: " + path.string());
  }
}

void require_output(const fs::path& path, const std::string& flag) {
  if (path.empty()) usage_error("missing required flag " + flag);
  auto parent = path.parent_path();
  if (!parent.empty() && !fs::is_directory(parent)) {
    usage_error(flag + ": directory does not exist: " + parent.string());
  }
}

void require_at_least_one(std::size_t value, const std::string& flag) {
  if (value < 1) usage_error(flag + " must be at least 1");
}

// K/M/top-k against the vocabulary size, read from the EMB1 header only.
void require_within_vocab(std::size_t value, const fs::path& token_embeddings,
                          const std::string& flag) {
  const auto [vocab, dim] = peek_embedding_shape(token_embeddings);
  if (value > vocab) {
    usage_error(flag + "=" + std::to_string(value) +
                " exceeds the vocabulary size " + std::to_string(vocab));
  }
}

std::string dump(const ordered_json& j) {
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

void require_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) {
    throw Error(ErrorCode::numerical, "non-finite " + what);
  }
}

TokenTable load_token_table(const RunConfig& c, std::size_t vocab) {
  if (c.token_table.empty()) return {};
  auto table = read_token_table(c.token_table);
  if (table.size() != vocab) {
    throw Error(ErrorCode::validation,
                "token table has " + std::to_string(table.size()) +
                    " entries but token embeddings have " +
                    std::to_string(vocab) + " rows");
  }
  return table;
}

void run_align(const RunConfig& c, std::ostream& out) {
  const auto token_embeddings = read_embedding_matrix(c.token_embeddings);
  const auto tokens = load_token_table(c, token_embeddings.rows());
  const auto corpus =
      read_tokenized_corpus(c.corpus, token_embeddings.rows());
  const auto embeddings =
      c.hidden_states.empty()
          ? read_embedding_matrix(c.embeddings)
          : pool_corpus(read_embedding_matrix(c.hidden_states), corpus,
                        *c.pooling);

  auto report = alignment_report(corpus, embeddings, token_embeddings, c.k,
                                 tokens.size() ? &tokens : nullptr, c.threads);
  report.parameters["pooling"] =
      c.pooling ? std::string(to_string(*c.pooling)) : "none";
  report.parameters["embeddings"] =
      c.hidden_states.empty() ? c.embeddings.string() : c.hidden_states.string();
  report.parameters["token_embeddings"] = c.token_embeddings.string();
  report.parameters["corpus"] = c.corpus.string();
  if (!c.token_table.empty()) {
    report.parameters["token_table"] = c.token_table.string();
  }
  write_file_atomic(c.out, to_jsonl(report));
  out << "documents=" << report.docs.size() << " hit@" << c.k << "="
      << report.metrics.hit_at_k << " lar=" << report.metrics.lar
      << " gar=" << report.metrics.gar << "\n";
}

ordered_json token_json(TokenId id, const TokenTable& tokens) {
  ordered_json t;
  t["token_id"] = id;
  if (tokens.size()) t["text"] = tokens.text(id);
  return t;
}

void run_spectral(const RunConfig& c, std::ostream& out) {
  const auto base = read_embedding_matrix(c.base_embeddings);
  const auto token_embeddings = read_embedding_matrix(c.token_embeddings);
  const auto tokens = load_token_table(c, token_embeddings.rows());
  if (base.dim() != token_embeddings.dim()) {
    throw Error(ErrorCode::dimension_mismatch,
                "base embeddings and token embeddings differ in dimension");
  }
  const auto basis = svd_basis(base);

  std::vector<double> variation;
  if (!c.tuned_embeddings.empty()) {
    variation = component_variation(
        base, read_embedding_matrix(c.tuned_embeddings), basis);
  }

  std::vector<double> lambdas = c.lambdas;
  auto scales = c.lambda_scales;
  if (scales.empty() && lambdas.empty() && !variation.empty()) {
    scales = {0.95, 1.0, 1.05};
  }
  for (double s : scales) lambdas.push_back(s * variation.at(0));

  std::string report;
  for (std::size_t j = 0; j < basis.dim(); ++j) {
    ordered_json rec;
    rec["record"] = "component";
    rec["j"] = j + 1;
    const double sigma = basis.singular_values(static_cast<Eigen::Index>(j));
    require_finite(sigma, "singular value");
    rec["singular_value"] = sigma;
    if (!variation.empty()) {
      require_finite(variation[j], "variation");
      rec["v"] = variation[j];
    }
    report += dump(rec) + "\n";
  }

  for (std::size_t i = 0; i < base.rows(); ++i) {
    ordered_json rec;
    rec["record"] = "contribution";
    rec["row"] = i;
    auto& list = rec["tokens"] = ordered_json::array();
    for (const auto& tc :
         decompose_contribution(base.row(i), basis, token_embeddings, c.top_k)) {
      auto t = token_json(tc.token_id, tokens);
      t["total"] = tc.total;
      t["first_component"] = tc.first_component;
      t["rest"] = tc.rest;
      list.push_back(std::move(t));
    }
    report += dump(rec) + "\n";
  }

  for (double lambda : lambdas) {
    require_finite(lambda, "lambda");
    for (std::size_t i = 0; i < base.rows(); ++i) {
      const auto adjusted = adjust_first_component(base.row(i), basis, lambda);
      const auto ranking =
          rank_aligned(score_tokens(adjusted, token_embeddings), c.top_k);
      ordered_json rec;
      rec["record"] = "adjusted";
      rec["lambda"] = lambda;
      rec["row"] = i;
      auto& list = rec["tokens"] = ordered_json::array();
      for (std::size_t r = 0; r < ranking.size(); ++r) {
        auto t = token_json(ranking.token_ids[r], tokens);
        t["score"] = ranking.scores[r];
        list.push_back(std::move(t));
      }
      report += dump(rec) + "\n";
    }
  }

  ordered_json summary;
  summary["record"] = "summary";
  summary["rows"] = base.rows();
  summary["dim"] = base.dim();
  summary["top_k"] = c.top_k;
  if (!variation.empty()) summary["v1"] = variation[0];
  summary["lambdas"] = lambdas;
  report += dump(summary) + "\n";

  write_file_atomic(c.out, report);
  out << "components=" << basis.dim() << " lambdas=" << lambdas.size();
  if (!variation.empty()) out << " v1=" << variation[0];
  out << "\n";
}

void run_index_build(const RunConfig& c, std::ostream& out) {
  const auto token_embeddings = read_embedding_matrix(c.token_embeddings);
  const auto corpus =
      read_tokenized_corpus(c.corpus, token_embeddings.rows());
  const auto doc_embeddings = read_embedding_matrix(c.doc_embeddings);
  const auto index =
      build_index(corpus, doc_embeddings, token_embeddings, c.k, c.threads);
  write_index(index, c.out);
  out << "documents=" << index.doc_count() << " postings="
      << index.posting_count() << " k=" << index.k() << "\n";
}

void run_search(const RunConfig& c, std::ostream& out) {
  const auto index = read_index(c.index);
  const auto token_embeddings = read_embedding_matrix(c.token_embeddings);
  if (token_embedding_checksum(token_embeddings) !=
          index.header().token_checksum ||
      token_embeddings.rows() != index.vocab_size() ||
      token_embeddings.dim() != index.dim()) {
    throw Error(ErrorCode::validation,
                "token embeddings do not match the ones the index was built "
                "with");
  }
  const auto queries =
      read_tokenized_corpus(c.query_corpus, token_embeddings.rows());
  const auto query_embeddings = read_embedding_matrix(c.query_embeddings);
  if (queries.size() != query_embeddings.rows()) {
    throw Error(ErrorCode::dimension_mismatch,
                "query corpus has " + std::to_string(queries.size()) +
                    " queries but " + std::to_string(query_embeddings.rows()) +
                    " embeddings were supplied");
  }

  std::vector<ExpandedQuery> expanded(queries.size());
  std::vector<RankedList> runs(queries.size());
  parallel_for(queries.size(), c.threads, [&](std::size_t i) {
    expanded[i] = expand_query(queries.docs[i].id, queries.docs[i].token_ids,
                               query_embeddings.row(i), token_embeddings, c.m);
    runs[i] = search(index, expanded[i], c.top_n);
  });

  std::string cost;
  if (!c.cost_out.empty()) cost = to_jsonl(cost_report(index, expanded));
  write_file_atomic(c.out, format_trec_run(runs, c.run_tag));
  if (!c.cost_out.empty()) write_file_atomic(c.cost_out, cost);

  std::size_t returned = 0;
  for (const auto& r : runs) returned += r.results.size();
  out << "queries=" << runs.size() << " results=" << returned << "\n";
}

void run_eval(const RunConfig& c, std::ostream& out) {
  const auto runs = read_trec_run(c.run);
  const auto qrels = read_qrels(c.qrels);
  const auto table = format_evaluation(evaluate_run(runs, qrels, c.k));
  if (!c.out.empty()) write_file_atomic(c.out, table);
  out << table;
}

void run_pool(const RunConfig& c, std::ostream& out) {
  const auto corpus = read_tokenized_corpus(c.corpus);
  const auto pooled =
      pool_corpus(read_embedding_matrix(c.hidden_states), corpus, *c.pooling);
  write_embedding_matrix(pooled, c.out);
  out << "documents=" << pooled.rows() << " dim=" << pooled.dim() << "\n";
}

}  // namespace

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::usage:
      return kExitUsage;
    case ErrorCode::numerical:
      return kExitNumerical;
    default:
      return kExitData;
  }
}

RunConfig parse_and_validate(int argc, const char* const* argv) {
  RunConfig c;
  std::string pooling;

  CLI::App app{"Embedding-to-token alignment, spectral analysis and sparse "
               "retrieval toolkit",
               "tokalign"};
  app.set_config("--config", "", "TOML/INI file with default flag values");
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  app.add_option("--threads", c.threads, "Worker threads (0 = all cores)")
      ->capture_default_str();

  auto* align = app.add_subcommand("align", "Embedding-token alignment report");
  align->add_option("--embeddings", c.embeddings, "Text embeddings (EMB1)");
  align->add_option("--hidden-states", c.hidden_states,
                    "Per-token hidden states (EMB1), pooled per document");
  align->add_option("--pooling", pooling, "last | mean | weighted-mean");
  align->add_option("--token-embeddings", c.token_embeddings,
                    "Unembedding matrix (EMB1)");
  align->add_option("--corpus", c.corpus, "Tokenized corpus (TSV)");
  align->add_option("--token-table", c.token_table, "Token table (TSV)");
  align->add_option("--k", c.k, "Top-K for Hit@K")->capture_default_str();
  align->add_option("--report-out", c.out, "Report path (JSON lines)");

  auto* spectral =
      app.add_subcommand("spectral", "Spectral analysis of an embedding space");
  spectral->add_option("--base-embeddings", c.base_embeddings,
                       "Base model embeddings (EMB1); fits the basis");
  spectral->add_option("--tuned-embeddings", c.tuned_embeddings,
                       "Embedder embeddings of the same texts (EMB1)");
  spectral->add_option("--token-embeddings", c.token_embeddings,
                       "Unembedding matrix (EMB1)");
  spectral->add_option("--token-table", c.token_table, "Token table (TSV)");
  spectral->add_option("--top-k", c.top_k, "Tokens listed per row")
      ->capture_default_str();
  spectral->add_option("--lambda", c.lambdas,
                       "First-component adjustment (repeatable)");
  spectral->add_option("--lambda-scale", c.lambda_scales,
                       "Adjustment as a multiple of v_1 (repeatable)");
  spectral->add_option("--out", c.out, "Report path (JSON lines)");

  auto* index = app.add_subcommand("index", "Sparse index operations");
  index->require_subcommand(1);
  auto* build = index->add_subcommand("build", "Build a sparse index");
  build->add_option("--doc-embeddings", c.doc_embeddings,
                    "Document embeddings (EMB1)");
  build->add_option("--corpus", c.corpus, "Tokenized documents (TSV)");
  build->add_option("--token-embeddings", c.token_embeddings,
                    "Unembedding matrix (EMB1)");
  build->add_option("--k", c.k, "Aligned tokens kept per document");
  build->add_option("--out", c.out, "Index path (SPX1)");

  auto* search = app.add_subcommand("search", "Query a sparse index");
  search->add_option("--index", c.index, "Index (SPX1)");
  search->add_option("--query-embeddings", c.query_embeddings,
                     "Query embeddings (EMB1)");
  search->add_option("--query-corpus", c.query_corpus,
                     "Tokenized queries (TSV)");
  search->add_option("--token-embeddings", c.token_embeddings,
                     "Unembedding matrix the index was built with (EMB1)");
  search->add_option("--m", c.m, "Expansion tokens per query")
      ->capture_default_str();
  search->add_option("--top-n", c.top_n, "Results per query")
      ->capture_default_str();
  search->add_option("--run-tag", c.run_tag, "TREC run tag")
      ->capture_default_str();
  search->add_option("--run-out", c.out, "Run path (TREC format)");
  search->add_option("--cost-out", c.cost_out,
                     "Optional cost report path (JSON lines)");

  auto* eval = app.add_subcommand("eval", "nDCG@k of a TREC run");
  eval->add_option("--run", c.run, "Run (TREC format)");
  eval->add_option("--qrels", c.qrels, "Relevance judgments (TREC qrels)");
  eval->add_option("--k", c.k, "Cutoff")->capture_default_str();
  eval->add_option("--out", c.out, "Optional copy of the table");

  auto* pool = app.add_subcommand("pool", "Pool per-token hidden states");
  pool->add_option("--hidden-states", c.hidden_states,
                   "Per-token hidden states (EMB1)");
  pool->add_option("--corpus", c.corpus, "Tokenized corpus (TSV)");
  pool->add_option("--pooling", pooling, "last | mean | weighted-mean");
  pool->add_option("--out", c.out, "Pooled embeddings (EMB1)");

  bool k_given = false;
  try {
    app.parse(argc, argv);
    k_given = build->count("--k") > 0;
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested{app.help()};
  } catch (const CLI::CallForAllHelp&) {
    throw HelpRequested{app.help("", CLI::AppFormatMode::All)};
  } catch (const CLI::ParseError& e) {
    usage_error(e.what());
  }

  if (!pooling.empty()) {
    c.pooling = parse_pooling(pooling);
    if (!c.pooling) usage_error("--pooling: unknown strategy \"" + pooling + "\"");
  }

  if (*align) {
    c.command = Subcommand::align;
    if (c.embeddings.empty() == c.hidden_states.empty()) {
      usage_error("align needs exactly one of --embeddings, --hidden-states");
    }
    if (!c.hidden_states.empty()) {
      require_input(c.hidden_states, "--hidden-states");
      if (!c.pooling) usage_error("--hidden-states requires --pooling");
    } else {
      require_input(c.embeddings, "--embeddings");
    }
    require_input(c.token_embeddings, "--token-embeddings");
    require_input(c.corpus, "--corpus");
    if (!c.token_table.empty()) require_input(c.token_table, "--token-table");
    require_output(c.out, "--report-out");
    require_at_least_one(c.k, "--k");
    require_within_vocab(c.k, c.token_embeddings, "--k");
    if (!c.token_table.empty()) {
      const auto vocab = read_token_table(c.token_table).size();
      if (c.k > vocab) {
        usage_error("--k=" + std::to_string(c.k) +
                    " exceeds the token table size " + std::to_string(vocab));
      }
    }
  } else if (*spectral) {
    c.command = Subcommand::spectral;
    require_input(c.base_embeddings, "--base-embeddings");
    if (!c.tuned_embeddings.empty()) {
      require_input(c.tuned_embeddings, "--tuned-embeddings");
    } else if (!c.lambda_scales.empty()) {
      usage_error("--lambda-scale requires --tuned-embeddings");
    }
    require_input(c.token_embeddings, "--token-embeddings");
    if (!c.token_table.empty()) require_input(c.token_table, "--token-table");
    require_output(c.out, "--out");
    require_at_least_one(c.top_k, "--top-k");
    require_within_vocab(c.top_k, c.token_embeddings, "--top-k");
  } else if (*build) {
    c.command = Subcommand::index_build;
    if (!k_given) c.k = 1000;
    require_input(c.doc_embeddings, "--doc-embeddings");
    require_input(c.corpus, "--corpus");
    require_input(c.token_embeddings, "--token-embeddings");
    require_output(c.out, "--out");
    require_at_least_one(c.k, "--k");
    require_within_vocab(c.k, c.token_embeddings, "--k");
  } else if (*search) {
    c.command = Subcommand::search;
    require_input(c.index, "--index");
    require_input(c.query_embeddings, "--query-embeddings");
    require_input(c.query_corpus, "--query-corpus");
    require_input(c.token_embeddings, "--token-embeddings");
    require_output(c.out, "--run-out");
    if (!c.cost_out.empty()) require_output(c.cost_out, "--cost-out");
    require_at_least_one(c.top_n, "--top-n");
    require_within_vocab(c.m, c.token_embeddings, "--m");
    if (c.run_tag.empty() ||
        c.run_tag.find_first_of(" \t\n") != std::string::npos) {
      usage_error("--run-tag must be a non-empty word");
    }
  } else if (*eval) {
    c.command = Subcommand::eval;
    require_input(c.run, "--run");
    require_input(c.qrels, "--qrels");
    require_at_least_one(c.k, "--k");
    if (!c.out.empty()) require_output(c.out, "--out");
  } else if (*pool) {
    c.command = Subcommand::pool;
    require_input(c.hidden_states, "--hidden-states");
    require_input(c.corpus, "--corpus");
    if (!c.pooling) usage_error("missing required flag --pooling");
    require_output(c.out, "--out");
  }
  return c;
}

void run(const RunConfig& config, std::ostream& out) {
  switch (config.command) {
    case Subcommand::align:
      return run_align(config, out);
    case Subcommand::spectral:
      return run_spectral(config, out);
    case Subcommand::index_build:
      return run_index_build(config, out);
    case Subcommand::search:
      return run_search(config, out);
    case Subcommand::eval:
      return run_eval(config, out);
    case Subcommand::pool:
      return run_pool(config, out);
  }
}

int main_entry(int argc, const char* const* argv, std::ostream& out,
               std::ostream& err) {
  try {
    run(parse_and_validate(argc, argv), out);
    return kExitOk;
  } catch (const HelpRequested& help) {
    out << help.text;
    return kExitOk;
  } catch (const Error& e) {
    err << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace tokalign::cli
