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

#include "semstack/serving.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <utility>

#include "httplib.h"
#include "semstack/binary_io.hpp"
#include "semstack/checkpoint.hpp"

namespace semstack {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr int kWireSchemaVersion = 1;

struct ManifestEntry {
  const char* role;
  const char* file;
};

constexpr ManifestEntry kManifestEntries[] = {
    {"feature_config", ArtifactFileNames::kFeatureConfig},
    {"feature_stats", ArtifactFileNames::kFeatureStats},
    {"dsr_checkpoint", ArtifactFileNames::kDsrCheckpoint},
    {"index", ArtifactFileNames::kIndex},
    {"dpr_checkpoint", ArtifactFileNames::kDprCheckpoint},
};

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
      .count();
}

json parse_body(const std::string& body) {
  json doc = json::parse(body, nullptr, false);
  require(!doc.is_discarded() && doc.is_object(), ErrorCode::kFormat,
          "request body is not a JSON object");
  if (doc.contains("schema_version")) {
    require(doc["schema_version"].is_number_integer() &&
                doc["schema_version"].get<int>() == kWireSchemaVersion,
            ErrorCode::kUnsupportedVersion, "unsupported request schema_version");
  }
  return doc;
}

template <typename T>
T field(const json& doc, const char* name, T fallback) {
  if (!doc.contains(name)) return fallback;
  try {
    return doc.at(name).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::kValidation, std::string("field '") + name + "' has the wrong type");
  }
}

std::vector<double> number_list(const json& doc, const char* name) {
  if (!doc.contains(name)) return {};
  const json& arr = doc.at(name);
  require(arr.is_array(), ErrorCode::kValidation, std::string("field '") + name + "' must be an array");
  std::vector<double> out;
  out.reserve(arr.size());
  for (const json& v : arr) {
    require(v.is_number(), ErrorCode::kValidation,
            std::string("field '") + name + "' must contain numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kState:
      return 503;
    case ErrorCode::kIo:
    case ErrorCode::kChecksum:
      return 500;
    default:
      return 400;
  }
}

}  // namespace

void validate_artifact_set(const ArtifactSet& set) {
  const FeatureConfig& fc = set.featurizer.config();
  const nn::TowerSpec& q = set.dsr.query_tower().spec();
  const nn::TowerSpec& s = set.dsr.item_tower().spec();
  const nn::TowerSpec& p = set.dpr.tower().spec();
  require(q.field_buckets.size() == 1 && q.field_buckets[0] == fc.query_buckets, ErrorCode::kValidation,
          "query tower buckets disagree with the feature config");
  require(s.field_buckets.size() == 1 && s.field_buckets[0] == fc.item_buckets, ErrorCode::kValidation,
          "item tower buckets disagree with the feature config");
  require(s.numeric_dim == fc.item_numeric_dim(), ErrorCode::kValidation,
          "item tower numeric width disagrees with the feature config");
  require(set.index.size() == 0 || set.dsr.output_dim() == set.index.dim(), ErrorCode::kValidation,
          "query tower dim " + std::to_string(set.dsr.output_dim()) + " != index dim " +
              std::to_string(set.index.dim()));
  require(p.field_buckets.size() == 3 && p.field_buckets[0] == fc.query_buckets &&
              p.field_buckets[1] == fc.item_buckets && p.field_buckets[2] == fc.user_buckets,
          ErrorCode::kValidation, "pairwise tower buckets disagree with the feature config");
  require(p.numeric_dim == fc.item_numeric_dim() + fc.user_numeric_dim(), ErrorCode::kValidation,
          "pairwise tower numeric width disagrees with the feature config");
  require(set.featurizer.stats().item.dim() == fc.item_numeric_dim() &&
              set.featurizer.stats().user.dim() == fc.user_numeric_dim(),
          ErrorCode::kValidation, "feature stats disagree with the feature config");
}

std::optional<std::string> write_artifact_manifest(const fs::path& dir) {
  json files = json::object();
  for (const ManifestEntry& e : kManifestEntries) {
    if (!fs::exists(dir / e.file)) return std::nullopt;
    files[e.role] = {{"path", e.file}, {"fnv1a64", content_hash_hex(read_file_bytes(dir / e.file))}};
  }
  json doc = {{"schema_version", kWireSchemaVersion}, {"files", files}};
  const std::string text = doc.dump(2) + "\n";
  write_file_atomic(dir / kArtifactManifestFile, text);
  return content_hash_hex(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::shared_ptr<const ArtifactSet> load_artifact_set(const fs::path& dir) {
  const std::vector<std::uint8_t> manifest_bytes = read_file_bytes(dir / kArtifactManifestFile);
  json doc = json::parse(manifest_bytes.begin(), manifest_bytes.end(), nullptr, false);
  require(!doc.is_discarded() && doc.is_object() && doc.contains("files"), ErrorCode::kFormat,
          "artifact manifest is not valid JSON");
  require(doc.value("schema_version", 0) == kWireSchemaVersion, ErrorCode::kUnsupportedVersion,
          "unsupported artifact manifest schema_version");

  std::vector<std::vector<std::uint8_t>> blobs;
  for (const ManifestEntry& e : kManifestEntries) {
    require(doc["files"].contains(e.role), ErrorCode::kValidation,
            std::string("artifact manifest lacks ") + e.role);
    const json& entry = doc["files"][e.role];
    const std::string rel = entry.value("path", "");
    require(!rel.empty() && fs::path(rel).is_relative(), ErrorCode::kValidation,
            std::string("artifact path for ") + e.role + " must be relative");
    std::vector<std::uint8_t> bytes = read_file_bytes(dir / rel);
    require(content_hash_hex(bytes) == entry.value("fnv1a64", ""), ErrorCode::kChecksum,
            "content hash mismatch for " + rel);
    blobs.push_back(std::move(bytes));
  }

  auto as_text = [](const std::vector<std::uint8_t>& b) {
    return std::string_view(reinterpret_cast<const char*>(b.data()), b.size());
  };
  auto set = std::make_shared<ArtifactSet>();
  set->manifest_hash = content_hash_hex(manifest_bytes);
  set->featurizer = Featurizer(feature_config_from_json(as_text(blobs[0])),
                               feature_stats_from_json(as_text(blobs[1])));
  set->dsr = decode_dsr_checkpoint(blobs[2]);
  set->index = EmbeddingIndex::decode(blobs[3]);
  set->dpr = decode_dpr_checkpoint(blobs[4]);
  validate_artifact_set(*set);
  return set;
}

SearchRequest parse_search_request(const std::string& body) {
  const json doc = parse_body(body);
  require(doc.contains("query") && doc["query"].is_string(), ErrorCode::kValidation,
          "field 'query' is required");
  SearchRequest r;
  r.query = doc["query"].get<std::string>();
  const std::int64_t k = field<std::int64_t>(doc, "k", 10);
  require(k >= 1, ErrorCode::kValidation, "k must be >= 1");
  r.k = static_cast<std::size_t>(k);
  if (doc.contains("nprobe") && !doc["nprobe"].is_null()) {
    const std::int64_t np = field<std::int64_t>(doc, "nprobe", 0);
    require(np >= 1, ErrorCode::kValidation, "nprobe must be >= 1");
    r.nprobe = static_cast<std::uint32_t>(np);
  }
  return r;
}

WireRerankRequest parse_rerank_request(const std::string& body) {
  const json doc = parse_body(body);
  WireRerankRequest r;
  r.query = field<std::string>(doc, "query", "");
  require(doc.contains("user") && doc["user"].is_object(), ErrorCode::kValidation,
          "field 'user' is required");
  r.user_actions = field<std::string>(doc["user"], "actions", "");
  r.user_numeric = number_list(doc["user"], "numeric");
  require(doc.contains("items") && doc["items"].is_array(), ErrorCode::kValidation,
          "field 'items' must be an array");
  for (const json& it : doc["items"]) {
    require(it.is_object() && it.contains("item_id"), ErrorCode::kValidation,
            "every item needs an item_id");
    WireItem w;
    w.item_id = field<std::uint64_t>(it, "item_id", 0);
    w.title = field<std::string>(it, "title", "");
    w.numeric = number_list(it, "numeric");
    r.items.push_back(std::move(w));
  }
  return r;
}

std::string search_response_json(const SearchResponse& response) {
  json results = json::array();
  for (const SearchHit& h : response.results) results.push_back({{"item_id", h.item_id}, {"score", h.score}});
  json doc = {{"schema_version", kWireSchemaVersion},
              {"manifest_hash", response.manifest_hash},
              {"results", results},
              {"latency_ms", response.latency_ms}};
  return doc.dump();
}

std::string rerank_response_json(const RerankResponse& response) {
  json results = json::array();
  for (const RankedItem& h : response.results) results.push_back({{"item_id", h.item_id}, {"score", h.score}});
  json doc = {{"schema_version", kWireSchemaVersion},
              {"manifest_hash", response.manifest_hash},
              {"results", results},
              {"latency_ms", response.latency_ms}};
  return doc.dump();
}

std::string error_json(ErrorCode code, const std::string& message) {
  json doc = {{"schema_version", kWireSchemaVersion},
              {"error", {{"code", std::string(error_code_name(code))}, {"message", message}}}};
  return doc.dump();
}

Service::Service(ServiceOptions options) : options_(options) {}

Service::~Service() { stop(); }

bool Service::ready() const { return snapshot() != nullptr; }

std::shared_ptr<const ArtifactSet> Service::snapshot() const { return std::atomic_load(&current_); }

std::string Service::hot_swap(std::shared_ptr<const ArtifactSet> next) {
  require(next != nullptr, ErrorCode::kValidation, "empty artifact set");
  validate_artifact_set(*next);
  std::string hash = next->manifest_hash;
  std::atomic_store(&current_, std::move(next));
  swaps_.fetch_add(1);
  return hash;
}

SearchResponse Service::search(const SearchRequest& request) const {
  const auto start = std::chrono::steady_clock::now();
  bool failed = true;
  struct Record {
    const Service* self;
    std::chrono::steady_clock::time_point start;
    const bool* failed;
    ~Record() { self->observe(kSearch, elapsed_ms(start), *failed); }
  } record{this, start, &failed};

  const std::shared_ptr<const ArtifactSet> set = snapshot();
  require(set != nullptr, ErrorCode::kState, "artifacts not loaded");
  require(request.k >= 1, ErrorCode::kValidation, "k must be >= 1");
  require(request.k <= options_.max_k, ErrorCode::kValidation,
          "k exceeds the configured maximum of " + std::to_string(options_.max_k));
  const std::uint32_t nprobe = request.nprobe.value_or(options_.nprobe_default);

  SearchResponse out;
  const Eigen::VectorXd q = query_embed(set->dsr, set->featurizer.query(request.query));
  out.results = set->index.search(q, request.k, nprobe);
  out.manifest_hash = set->manifest_hash;
  out.latency_ms = elapsed_ms(start);
  failed = false;
  return out;
}

RerankResponse Service::rerank(const WireRerankRequest& request) const {
  const auto start = std::chrono::steady_clock::now();
  bool failed = true;
  struct Record {
    const Service* self;
    std::chrono::steady_clock::time_point start;
    const bool* failed;
    ~Record() { self->observe(kRerank, elapsed_ms(start), *failed); }
  } record{this, start, &failed};

  const std::shared_ptr<const ArtifactSet> set = snapshot();
  require(set != nullptr, ErrorCode::kState, "artifacts not loaded");
  require(request.items.size() <= options_.rerank_limit, ErrorCode::kValidation,
          "too many items to rerank");

  RerankRequest r;
  r.user = set->featurizer.user(request.user_actions, request.user_numeric);
  r.query = set->featurizer.query(request.query);
  r.items.reserve(request.items.size());
  for (const WireItem& it : request.items) r.items.push_back(set->featurizer.item(it.item_id, it.title, it.numeric));

  RerankResponse out;
  out.results = semstack::rerank(set->dpr, r, options_.rerank_limit).ranked;
  out.manifest_hash = set->manifest_hash;
  out.latency_ms = elapsed_ms(start);
  failed = false;
  return out;
}

void Service::observe(Endpoint endpoint, double latency_ms, bool error) const {
  Histogram& h = histograms_[endpoint];
  std::size_t b = 0;
  while (b < kBucketsMs.size() && latency_ms > kBucketsMs[b]) ++b;
  h.counts[b].fetch_add(1, std::memory_order_relaxed);
  h.requests.fetch_add(1, std::memory_order_relaxed);
  if (error) h.errors.fetch_add(1, std::memory_order_relaxed);
}

nlohmann::json Service::health() const {
  const std::shared_ptr<const ArtifactSet> set = snapshot();
  json doc = {{"schema_version", kWireSchemaVersion}, {"ready", set != nullptr}};
  if (set) {
    doc["manifest_hash"] = set->manifest_hash;
    doc["index"] = {{"size", set->index.size()},
                    {"dim", set->index.dim()},
                    {"variant", set->index.variant() == IndexVariant::kExact ? "exact" : "ivf"}};
  } else {
    doc["manifest_hash"] = nullptr;
  }
  return doc;
}

nlohmann::json Service::metrics() const {
  static constexpr const char* kNames[kEndpointCount] = {"search", "rerank", "healthz", "metrics",
                                                         "reload"};
  json endpoints = json::object();
  for (int e = 0; e < kEndpointCount; ++e) {
    const Histogram& h = histograms_[e];
    json buckets = json::array();
    std::uint64_t cumulative = 0;
    for (std::size_t b = 0; b <= kBucketsMs.size(); ++b) {
      cumulative += h.counts[b].load(std::memory_order_relaxed);
      buckets.push_back({{"le", b < kBucketsMs.size() ? json(kBucketsMs[b]) : json("+inf")},
                         {"count", cumulative}});
    }
    endpoints[kNames[e]] = {{"requests", h.requests.load(std::memory_order_relaxed)},
                            {"errors", h.errors.load(std::memory_order_relaxed)},
                            {"latency_ms", buckets}};
  }
  return {{"schema_version", kWireSchemaVersion}, {"swaps", swaps_.load()}, {"endpoints", endpoints}};
}

void Service::bind_routes(httplib::Server& server) {
  auto guarded = [](httplib::Response& res, auto&& body) {
    try {
      body();
    } catch (const Error& e) {
      res.status = http_status(e.code());
      res.set_content(error_json(e.code(), e.what()), "application/json");
    } catch (const std::exception& e) {
      res.status = 500;
      res.set_content(error_json(ErrorCode::kState, e.what()), "application/json");
    }
  };

  server.Post("/search", [this, guarded](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      SearchRequest r;
      try {
        r = parse_search_request(req.body);
      } catch (const Error&) {
        observe(kSearch, 0, true);
        throw;
      }
      res.set_content(search_response_json(search(r)), "application/json");
    });
  });
  server.Post("/rerank", [this, guarded](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      WireRerankRequest r;
      try {
        r = parse_rerank_request(req.body);
      } catch (const Error&) {
        observe(kRerank, 0, true);
        throw;
      }
      res.set_content(rerank_response_json(rerank(r)), "application/json");
    });
  });
  server.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
    const auto start = std::chrono::steady_clock::now();
    const json doc = health();
    res.status = doc["ready"].get<bool>() ? 200 : 503;
    res.set_content(doc.dump(), "application/json");
    observe(kHealth, elapsed_ms(start), false);
  });
  server.Get("/metrics", [this](const httplib::Request&, httplib::Response& res) {
    const auto start = std::chrono::steady_clock::now();
    res.set_content(metrics().dump(), "application/json");
    observe(kMetrics, elapsed_ms(start), false);
  });
  server.Post("/admin/reload", [this, guarded](const httplib::Request& req, httplib::Response& res) {
    const auto start = std::chrono::steady_clock::now();
    bool failed = true;
    guarded(res, [&] {
      const json doc = parse_body(req.body);
      require(doc.contains("artifacts") && doc["artifacts"].is_string(), ErrorCode::kValidation,
              "field 'artifacts' is required");
      const std::string hash = hot_swap(load_artifact_set(doc["artifacts"].get<std::string>()));
      res.set_content(json({{"schema_version", kWireSchemaVersion}, {"manifest_hash", hash}}).dump(),
                      "application/json");
      failed = false;
    });
    observe(kReload, elapsed_ms(start), failed);
  });
}

void Service::listen(const std::string& host, int port) {
  server_ = std::make_unique<httplib::Server>();
  bind_routes(*server_);
  require(server_->listen(host, port), ErrorCode::kIo,
          "cannot listen on " + host + ":" + std::to_string(port));
}

int Service::start_background(const std::string& host) {
  server_ = std::make_unique<httplib::Server>();
  bind_routes(*server_);
  const int port = server_->bind_to_any_port(host);
  require(port > 0, ErrorCode::kIo, "cannot bind " + host);
  server_thread_ = std::make_unique<std::thread>([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port;
}

void Service::stop() {
  if (server_) server_->stop();
  if (server_thread_ && server_thread_->joinable()) server_thread_->join();
  server_thread_.reset();
}

}  // namespace semstack
