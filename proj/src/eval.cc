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

#include "semstack/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

#include "json.hpp"
#include "semstack/status.hpp"

namespace semstack {
namespace {

using Clock = std::chrono::steady_clock;

double percentile(std::vector<double> sorted_values, double q) {
  if (sorted_values.empty()) return 0;
  std::sort(sorted_values.begin(), sorted_values.end());
  const double rank = q * static_cast<double>(sorted_values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = static_cast<std::size_t>(std::ceil(rank));
  return sorted_values[lo] + (rank - static_cast<double>(lo)) * (sorted_values[hi] - sorted_values[lo]);
}

}  // namespace

std::optional<double> single_session_auc(const ScoredSession& session) {
  std::size_t pairs = 0;
  double correct = 0;
  for (const auto& pos : session.items) {
    if (!pos.ordered) continue;
    for (const auto& neg : session.items) {
      if (neg.ordered) continue;
      ++pairs;
      if (pos.score > neg.score) {
        correct += 1.0;
      } else if (pos.score == neg.score) {
        correct += 0.5;
      }
    }
  }
  if (pairs == 0) return std::nullopt;
  return correct / static_cast<double>(pairs);
}

SessionAucReport session_auc(std::span<const ScoredSession> sessions) {
  SessionAucReport report;
  double sum = 0;
  for (const auto& s : sessions) {
    if (auto auc = single_session_auc(s)) {
      sum += *auc;
      ++report.defined_sessions;
    } else {
      ++report.excluded_sessions;
    }
  }
  require(report.defined_sessions > 0, ErrorCode::kUndefinedMetric,
          "session_auc: no session has both an ordered and a non-ordered item");
  report.mean_auc = sum / static_cast<double>(report.defined_sessions);
  return report;
}

double ndcg_at_k(std::span<const std::uint64_t> ranked,
                 const std::unordered_set<std::uint64_t>& positives, std::size_t k) {
  require(k >= 1, ErrorCode::kValidation, "ndcg_at_k: k must be >= 1");
  if (positives.empty()) return 0.0;
  double dcg = 0;
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) {
    if (positives.count(ranked[i])) dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  }
  double idcg = 0;
  for (std::size_t i = 0; i < std::min(k, positives.size()); ++i) {
    idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  }
  return dcg / idcg;
}

std::optional<double> recall_at_k(std::span<const std::uint64_t> retrieved,
                                  const std::unordered_set<std::uint64_t>& relevant, std::size_t k,
                                  RecallDenominator denominator) {
  if (relevant.empty()) return std::nullopt;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < std::min(k, retrieved.size()); ++i) {
    hits += relevant.count(retrieved[i]);
  }
  const std::size_t denom =
      denominator == RecallDenominator::kCappedAtK ? std::min(k, relevant.size()) : relevant.size();
  return static_cast<double>(hits) / static_cast<double>(denom);
}

std::string machine_descriptor() {
  std::string cpu = "unknown cpu";
  std::ifstream info("/proc/cpuinfo");
  std::string line;
  while (std::getline(info, line)) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) cpu = line.substr(colon + 2);
      break;
    }
  }
  return cpu + ", " + std::to_string(std::thread::hardware_concurrency()) + " hw threads, " +
#if defined(__clang__)
         "clang " __clang_version__;
#elif defined(__GNUC__)
         "gcc " __VERSION__;
#else
         "unknown compiler";
#endif
}

BenchReport bench_search(const EmbeddingIndex& index, const Eigen::MatrixXd& queries,
                         const BenchConfig& config, double index_build_seconds) {
  require(queries.rows() > 0, ErrorCode::kValidation, "bench_search: empty query set");
  require(config.k >= 1, ErrorCode::kValidation, "bench_search: k must be >= 1");
  BenchReport report;
  report.index_build_seconds = index_build_seconds;
  report.n_items = index.size();
  report.dim = index.dim();
  report.variant = index.variant() == IndexVariant::kExact ? "exact" : "ivf";
  report.nprobe = index.variant() == IndexVariant::kIvf
                      ? (config.nprobe ? std::min(config.nprobe, index.n_clusters())
                                       : default_nprobe(index.n_clusters()))
                      : 0;
  report.machine = machine_descriptor();

  const auto n_queries = static_cast<std::size_t>(queries.rows());
  auto query_at = [&](std::size_t i) -> Eigen::VectorXd {
    return queries.row(static_cast<Eigen::Index>(i % n_queries)).transpose();
  };
  std::size_t sink = 0;
  for (std::size_t i = 0; i < config.warmup_queries; ++i) {
    sink += index.search(query_at(i), config.k, report.nprobe).size();
  }

  const std::size_t timed = std::max<std::size_t>(config.min_timed_queries, 1);
  std::vector<double> latencies;
  latencies.reserve(timed);
  const auto wall_start = Clock::now();
  for (std::size_t i = 0; i < timed; ++i) {
    const Eigen::VectorXd q = query_at(i);
    const auto t0 = Clock::now();
    sink += index.search(q, config.k, report.nprobe).size();
    latencies.push_back(std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
  }
  const double wall = std::chrono::duration<double>(Clock::now() - wall_start).count();
  report.timed_queries = timed;
  double total = 0;
  for (double l : latencies) total += l;
  report.mean_ms = total / static_cast<double>(timed);
  report.p50_ms = percentile(latencies, 0.50);
  report.p99_ms = percentile(latencies, 0.99);
  report.qps_single = static_cast<double>(timed) / wall;

  for (std::size_t workers : config.concurrency) {
    if (workers == 0) continue;
    std::vector<std::thread> pool;
    std::vector<std::size_t> sinks(workers, 0);
    const auto start = Clock::now();
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < timed; i += workers) {
          sinks[w] += index.search(query_at(i), config.k, report.nprobe).size();
        }
      });
    }
    for (auto& t : pool) t.join();
    const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
    for (auto s : sinks) sink += s;
    report.qps_by_concurrency.emplace_back(workers, static_cast<double>(timed) / seconds);
  }
  if (sink == 0 && index.size() > 0) {
    throw Error(ErrorCode::kState, "bench_search: searches returned no results");
  }
  return report;
}

std::string bench_report_to_json(const BenchReport& r) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["machine"] = r.machine;
  j["variant"] = r.variant;
  j["n_items"] = r.n_items;
  j["dim"] = r.dim;
  j["nprobe"] = r.nprobe;
  j["timed_queries"] = r.timed_queries;
  nlohmann::ordered_json row;
  row["path"] = "CPU";
  row["indexing (sec.)"] = r.index_build_seconds;
  row["search (ms)"] = r.mean_ms;
  row["QPS"] = r.qps_single;
  row["search p50 (ms)"] = r.p50_ms;
  row["search p99 (ms)"] = r.p99_ms;
  j["table"] = nlohmann::ordered_json::array({row});
  nlohmann::ordered_json sweep = nlohmann::ordered_json::array();
  for (const auto& [workers, qps] : r.qps_by_concurrency) {
    sweep.push_back({{"concurrency", workers}, {"QPS", qps}});
  }
  j["qps_by_concurrency"] = sweep;
  return j.dump(2) + "\n";
}

}  // namespace semstack
