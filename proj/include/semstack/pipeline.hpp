// Copyright 2026 The Semstack Authors.
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

#ifndef SEMSTACK_PIPELINE_HPP_
#define SEMSTACK_PIPELINE_HPP_

// Subcommand bodies behind the `semstack` binary. Every run reads and writes
// inside one working directory and leaves manifests/<subcommand>.json with its
// configuration and the content hashes of its inputs and outputs.

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "semstack/datagen.hpp"
#include "semstack/dpr.hpp"
#include "semstack/dsr.hpp"
#include "semstack/eval.hpp"
#include "semstack/index.hpp"
#include "semstack/serving.hpp"

namespace semstack {

inline constexpr int kManifestSchemaVersion = 1;

// File names inside the working directory.
struct WorkFiles {
  static constexpr const char* kCatalog = "catalog.jsonl";
  static constexpr const char* kTrainSessions = "sessions.train.jsonl";
  static constexpr const char* kTrainUtility = "sessions.train.utility.jsonl";
  static constexpr const char* kHeldoutSessions = "sessions.heldout.jsonl";
  static constexpr const char* kHeldoutUtility = "sessions.heldout.utility.jsonl";
  static constexpr const char* kTriplets = "triplets.jsonl";
  static constexpr const char* kPairs = "pairs.jsonl";
  static constexpr const char* kManifestDir = "manifests";
  static constexpr const char* kReportDir = "reports";
};

struct RunContext {
  std::filesystem::path dir = "run";
  std::uint64_t seed = 42;
  bool deterministic = true;
};

// Derives an independent stream seed for one pipeline stage.
std::uint64_t stage_seed(std::uint64_t seed, std::string_view stage);

struct DatagenOptions {
  CatalogConfig catalog;
  SessionConfig sessions;
  double heldout_fraction = 0.1;
  TripletPolicy triplets;
  PairOptions pairs;
  std::uint32_t buckets = 1u << 16;
};

struct TrainDsrOptions {
  DsrTrainConfig train;
  std::filesystem::path triplets;  // empty: <dir>/triplets.jsonl
};

struct TrainDprOptions {
  DprTrainConfig train;
  std::filesystem::path pairs;  // empty: <dir>/pairs.jsonl
};

struct BuildIndexOptions {
  IndexVariant variant = IndexVariant::kIvf;
  IvfParams ivf;
};

struct EvalRetrievalOptions {
  std::size_t k = 10;
  std::uint32_t nprobe = 0;
  std::size_t sample_cases = 5;
  std::size_t sample_top = 5;
};

struct EvalRankingOptions {
  std::size_t ndcg_k = 5;
};

struct BenchOptions {
  BenchConfig bench;
  // Nonzero: benchmark a synthetic clustered collection of this many unit
  // vectors instead of the working-directory catalog.
  std::size_t synthetic_items = 0;
  std::uint32_t synthetic_dim = 64;
  std::size_t synthetic_queries = 256;
  IndexVariant variant = IndexVariant::kExact;
  IvfParams ivf;
};

struct ServeOptions {
  std::string host = "0.0.0.0";
  int port = 8080;
  std::filesystem::path artifacts;
  ServiceOptions service;
};

// Each returns the report it wrote (or, for training and indexing, a summary).
nlohmann::json run_datagen(const RunContext& ctx, const DatagenOptions& options);
nlohmann::json run_train_dsr(const RunContext& ctx, const TrainDsrOptions& options);
nlohmann::json run_train_dpr(const RunContext& ctx, const TrainDprOptions& options);
nlohmann::json run_build_index(const RunContext& ctx, const BuildIndexOptions& options);
nlohmann::json run_eval_retrieval(const RunContext& ctx, const EvalRetrievalOptions& options);
nlohmann::json run_eval_ranking(const RunContext& ctx, const EvalRankingOptions& options);
nlohmann::json run_bench(const RunContext& ctx, const BenchOptions& options);
// Blocks until the server stops.
void run_serve(const ServeOptions& options);

// Unit vectors drawn around `n_centers` random directions; used by the
// benchmark and by index tests that need realistic cluster structure.
RowMatrixXf clustered_unit_vectors(std::size_t n, std::uint32_t dim, std::size_t n_centers,
                                   double spread, std::uint64_t seed);

// Mean and standard deviation of capped recall@k for a retriever that picks
// k of n items uniformly when `relevant` of them are relevant.
struct RandomRecallBaseline {
  double mean = 0;
  double stddev = 0;
};
RandomRecallBaseline random_recall_baseline(std::size_t n, std::size_t relevant, std::size_t k);

}  // namespace semstack

#endif  // SEMSTACK_PIPELINE_HPP_
