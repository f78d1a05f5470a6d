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

#ifndef SEMSTACK_SERVING_HPP_
#define SEMSTACK_SERVING_HPP_

// Online layer: an immutable ArtifactSet (feature config + stats, two-tower
// checkpoint, embedding index, pairwise checkpoint) behind one shared pointer
// that request handlers snapshot and hot_swap replaces atomically.

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "semstack/dpr.hpp"
#include "semstack/dsr.hpp"
#include "semstack/features.hpp"
#include "semstack/index.hpp"

namespace httplib {
class Server;
}

namespace semstack {

inline constexpr const char* kArtifactManifestFile = "artifacts.json";

struct ArtifactFileNames {
  static constexpr const char* kFeatureConfig = "features.json";
  static constexpr const char* kFeatureStats = "stats.json";
  static constexpr const char* kDsrCheckpoint = "dsr.ckpt";
  static constexpr const char* kIndex = "index.eidx";
  static constexpr const char* kDprCheckpoint = "dpr.ckpt";
};

struct ArtifactSet {
  std::string manifest_hash;
  Featurizer featurizer;
  TwoTowerModel dsr;
  EmbeddingIndex index;
  PairwiseModel dpr;
};

// Checks that featurizer, towers and index agree on buckets and dimensions.
void validate_artifact_set(const ArtifactSet& set);

// Hashes the five artifact files in `dir` and writes the manifest. Returns the
// manifest hash, or std::nullopt if any artifact is still missing.
std::optional<std::string> write_artifact_manifest(const std::filesystem::path& dir);

// Loads and verifies every file against the manifest; refuses mismatches.
std::shared_ptr<const ArtifactSet> load_artifact_set(const std::filesystem::path& dir);

struct ServiceOptions {
  std::uint32_t nprobe_default = 0;  // 0 selects the index default
  std::size_t max_k = 1000;
  std::size_t rerank_limit = kDefaultRerankLimit;
};

struct SearchRequest {
  std::string query;
  std::size_t k = 10;
  std::optional<std::uint32_t> nprobe;
};

struct SearchResponse {
  SearchResult results;
  double latency_ms = 0;
  std::string manifest_hash;
};

struct WireItem {
  std::uint64_t item_id = 0;
  std::string title;
  std::vector<double> numeric;
};

struct WireRerankRequest {
  std::string user_actions;
  std::vector<double> user_numeric;
  std::string query;
  std::vector<WireItem> items;
};

struct RerankResponse {
  std::vector<RankedItem> results;
  double latency_ms = 0;
  std::string manifest_hash;
};

class Service {
 public:
  explicit Service(ServiceOptions options = {});
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  bool ready() const;
  std::shared_ptr<const ArtifactSet> snapshot() const;

  // Validates `next` first; on failure the current set stays in place and the
  // error propagates. Requests already running keep their snapshot.
  std::string hot_swap(std::shared_ptr<const ArtifactSet> next);

  SearchResponse search(const SearchRequest& request) const;
  RerankResponse rerank(const WireRerankRequest& request) const;

  nlohmann::json health() const;
  nlohmann::json metrics() const;

  // HTTP/1.1 front end: POST /search, POST /rerank, GET /healthz,
  // GET /metrics, POST /admin/reload.
  void bind_routes(httplib::Server& server);
  void listen(const std::string& host, int port);
  // Binds an ephemeral port and serves on a background thread; returns the port.
  int start_background(const std::string& host = "127.0.0.1");
  void stop();

 private:
  enum Endpoint { kSearch = 0, kRerank, kHealth, kMetrics, kReload, kEndpointCount };
  static constexpr std::array<double, 11> kBucketsMs = {0.1, 0.25, 0.5, 1, 2.5, 5, 10, 25, 50, 100, 250};

  struct Histogram {
    std::array<std::atomic<std::uint64_t>, kBucketsMs.size() + 1> counts{};
    std::atomic<std::uint64_t> requests{0};
    std::atomic<std::uint64_t> errors{0};
  };

  void observe(Endpoint endpoint, double latency_ms, bool error) const;

  ServiceOptions options_;
  std::shared_ptr<const ArtifactSet> current_;
  mutable std::array<Histogram, kEndpointCount> histograms_;
  std::atomic<std::uint64_t> swaps_{0};
  std::unique_ptr<httplib::Server> server_;
  std::unique_ptr<std::thread> server_thread_;
};

// JSON codecs for the wire bodies, shared by the HTTP layer and tests.
SearchRequest parse_search_request(const std::string& body);
WireRerankRequest parse_rerank_request(const std::string& body);
std::string search_response_json(const SearchResponse& response);
std::string rerank_response_json(const RerankResponse& response);
std::string error_json(ErrorCode code, const std::string& message);

}  // namespace semstack

#endif  // SEMSTACK_SERVING_HPP_
