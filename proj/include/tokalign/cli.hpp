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
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tokalign/error.hpp"
#include "tokalign/pooling.hpp"

namespace tokalign::cli {

enum class Subcommand { align, spectral, index_build, search, eval, pool };

// Exit statuses.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

int exit_code_for(ErrorCode code);

/// Fully validated invocation. Only the fields of the chosen subcommand are
/// meaningful.
struct RunConfig {
  Subcommand command = Subcommand::align;

  // Inputs.
  std::filesystem::path embeddings;
  std::filesystem::path hidden_states;
  std::filesystem::path token_embeddings;
  std::filesystem::path token_table;
  std::filesystem::path corpus;
  std::filesystem::path base_embeddings;
  std::filesystem::path tuned_embeddings;
  std::filesystem::path doc_embeddings;
  std::filesystem::path index;
  std::filesystem::path query_embeddings;
  std::filesystem::path query_corpus;
  std::filesystem::path run;
  std::filesystem::path qrels;

  // Outputs.
  std::filesystem::path out;
  std::filesystem::path cost_out;

  std::size_t k = 10;  // align / index build / eval cutoff
  std::size_t m = 50;
  std::size_t top_k = 10;  // spectral
  std::size_t top_n = 1000;
  std::optional<PoolingStrategy> pooling;
  std::vector<double> lambdas;
  std::vector<double> lambda_scales;
  std::string run_tag = "tokalign";
  unsigned threads = 0;
};

/// Thrown when --help is requested; carries the help text.
struct HelpRequested {
  std::string text;
};

/// Parses argv (argv[0] is the program name) and validates every path and
/// hyper-parameter before any data is loaded. Throws Error(ErrorCode::usage)
/// naming the offending flag, or HelpRequested.
RunConfig parse_and_validate(int argc, const char* const* argv);

/// Executes a validated config. Outputs are written atomically and only
/// after all computation succeeded. Library errors propagate as Error.
void run(const RunConfig& config, std::ostream& out);

/// parse_and_validate + run with diagnostics on `err`; returns the exit
/// status.
int main_entry(int argc, const char* const* argv, std::ostream& out,
               std::ostream& err);

}  // namespace tokalign::cli
