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

#ifndef SEMSTACK_EVAL_HPP_
#define SEMSTACK_EVAL_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "semstack/index.hpp"

namespace semstack {

struct ScoredItem {
  std::uint64_t item_id = 0;
  double score = 0;
  bool ordered = false;
};

struct ScoredSession {
  std::uint64_t session_id = 0;
  std::vector<ScoredItem> items;
};

struct SessionAucReport {
  double mean_auc = 0;
  std::size_t defined_sessions = 0;
  // Sessions lacking an ordered or a non-ordered item; never averaged in.
  std::size_t excluded_sessions = 0;
};

// Fraction of (ordered, non-ordered) pairs ranked correctly, ties counting
// one half; std::nullopt when the session lacks either class.
std::optional<double> single_session_auc(const ScoredSession& session);

// Unweighted mean of per-session AUC over sessions where it is defined.
// Throws kUndefinedMetric when no session qualifies.
SessionAucReport session_auc(std::span<const ScoredSession> sessions);

// Binary-gain NDCG with 1-based ranks and log2 discounts. Zero when there are
// no positives.
double ndcg_at_k(std::span<const std::uint64_t> ranked,
                 const std::unordered_set<std::uint64_t>& positives, std::size_t k = 5);

enum class RecallDenominator {
  kRelevantCount,  // |top-k ∩ relevant| / |relevant|
  kCappedAtK,      // |top-k ∩ relevant| / min(k, |relevant|)
};

// std::nullopt when the relevant set is empty.
std::optional<double> recall_at_k(std::span<const std::uint64_t> retrieved,
                                  const std::unordered_set<std::uint64_t>& relevant, std::size_t k,
                                  RecallDenominator denominator = RecallDenominator::kRelevantCount);

struct BenchConfig {
  std::size_t k = 10;
  std::uint32_t nprobe = 0;  // 0 selects the index default
  std::vector<std::size_t> concurrency = {1, 2, 4};
  std::size_t min_timed_queries = 1000;
  std::size_t warmup_queries = 20;
};

struct BenchReport {
  double index_build_seconds = 0;
  std::size_t n_items = 0;
  std::uint32_t dim = 0;
  std::string variant;
  std::uint32_t nprobe = 0;
  std::size_t timed_queries = 0;
  double mean_ms = 0;
  double p50_ms = 0;
  double p99_ms = 0;
  double qps_single = 0;
  std::vector<std::pair<std::size_t, double>> qps_by_concurrency;
  std::string machine;
};

// Times index.search over `queries` (one unit vector per row), cycling the
// set until min_timed_queries have run. Warmup queries are not recorded.
BenchReport bench_search(const EmbeddingIndex& index, const Eigen::MatrixXd& queries,
                         const BenchConfig& config, double index_build_seconds);

std::string machine_descriptor();
std::string bench_report_to_json(const BenchReport& report);

}  // namespace semstack

#endif  // SEMSTACK_EVAL_HPP_
