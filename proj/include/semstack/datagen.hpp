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

#ifndef SEMSTACK_DATAGEN_HPP_
#define SEMSTACK_DATAGEN_HPP_

// Synthetic catalog and session logs with planted semantics (latent clusters)
// and planted user preference (a hidden utility per presented item), plus the
// conversions from logs to retrieval triplets and ranking pairs.

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "semstack/features.hpp"

namespace semstack {

struct CatalogConfig {
  std::size_t n_items = 5000;
  std::size_t n_clusters = 50;
  std::size_t latent_dim = 16;
  // Attribute schema cycles through price, ctr, cvr, sale volume.
  std::size_t numeric_dim = 4;
  std::size_t cluster_pool_size = 12;
  std::size_t shared_pool_size = 40;
  double latent_noise = 1.0;

  void validate() const;
};

struct CatalogItem {
  std::uint64_t item_id = 0;
  std::string title;
  std::vector<double> numeric;     // raw attributes as logged
  std::uint32_t cluster = 0;
  std::vector<double> latent;      // unit norm
  std::vector<double> attributes;  // hidden standardized qualities behind `numeric`
};

struct SyntheticCatalog {
  CatalogConfig config;
  std::vector<std::vector<double>> centroids;
  std::vector<CatalogItem> items;

  std::size_t n_clusters() const;
  const CatalogItem& at(std::uint64_t item_id) const;
  bool contains(std::uint64_t item_id) const;
  std::vector<std::vector<std::size_t>> members_by_cluster() const;
  void reindex();

 private:
  std::unordered_map<std::uint64_t, std::size_t> by_id_;
};

std::vector<NumericTransform> item_numeric_transforms(std::size_t numeric_dim);
std::vector<NumericTransform> user_numeric_transforms();
FeatureConfig default_feature_config(std::size_t item_numeric_dim);

SyntheticCatalog generate_catalog(const CatalogConfig& config, std::uint64_t seed);

struct UtilityWeights {
  std::vector<double> attribute = {-0.3, 1.0, 1.5, 0.8};
  double price_match = 1.5;
  double relevance = 6.0;
  double position = 0.5;
  double click_bias = -1.5;
  double order_bias = -5.0;
};

struct SessionConfig {
  std::size_t n_sessions = 20000;
  std::size_t presented_per_session = 20;
  std::size_t max_presented = 100;
  double in_cluster_fraction = 0.9;
  std::size_t history_items = 3;
  UtilityWeights utility;
  double noise_scale = 0.5;
  std::uint64_t first_session_id = 1;
  // Distinct queries per cluster, reused across sessions; 0 draws a fresh
  // query for every session.
  std::size_t queries_per_cluster = 20;
  // Returning users sampled per session; 0 draws a fresh user every session.
  std::size_t n_users = 2000;
};

struct SyntheticUser {
  std::string actions;          // title tokens of previously clicked items
  std::vector<double> numeric;  // raw: purchasing power, activity count
  double purchasing_power = 0;  // hidden standardized value behind numeric[0]
};

struct PresentedItem {
  std::uint64_t item_id = 0;
  std::uint32_t position = 0;  // 1-based
  bool clicked = false;
  bool ordered = false;
  double planted_utility = 0;  // noiseless; lives in the sidecar file
};

struct SessionLog {
  std::uint64_t session_id = 0;
  std::string query;
  std::uint32_t query_cluster = 0;
  SyntheticUser user;
  std::vector<PresentedItem> presented;
};

double sigmoid(double x);
double click_probability(double utility, std::uint32_t position, const UtilityWeights& w);
double order_probability(double utility, std::uint32_t position, const UtilityWeights& w);

// Share of title tokens drawn from the item's own cluster vocabulary. The
// planted relevance of an item to a query of its cluster.
double on_topic_share(const SyntheticCatalog& catalog, const CatalogItem& item);

std::vector<SessionLog> generate_sessions(const SyntheticCatalog& catalog,
                                          const SessionConfig& config, std::uint64_t seed);

struct TripletPolicy {
  std::size_t negatives_per_positive = 2;
  // Probability of an unclicked same-cluster presented item; otherwise a
  // uniform item from another cluster.
  double hard_negative_prob = 0.5;
};

struct TripletRecord {
  std::uint64_t session_id = 0;
  std::string query;
  std::uint32_t query_cluster = 0;
  std::uint64_t positive_id = 0;
  std::uint64_t negative_id = 0;
};

struct TripletSet {
  std::vector<TripletRecord> records;
  std::size_t sessions_without_clicks = 0;
  std::size_t hard_fallbacks = 0;
};

TripletSet make_triplets(const std::vector<SessionLog>& sessions, const SyntheticCatalog& catalog,
                         const TripletPolicy& policy, std::uint64_t seed);

struct PairRecord {
  std::uint64_t session_id = 0;
  SyntheticUser user;
  std::string query;
  std::uint64_t item_a = 0;
  std::uint64_t item_b = 0;
  int label = 0;  // 1 iff a preferred over b
};

struct PairOptions {
  bool include_click_pairs = false;
};

std::vector<PairRecord> make_pairs(const std::vector<SessionLog>& sessions,
                                   const PairOptions& options = {});

struct TripletExample {
  QueryFeatures query;
  ItemFeatures positive;
  ItemFeatures negative;
};

struct PairExample {
  UserContext user;
  QueryFeatures query;
  ItemFeatures item_a;
  ItemFeatures item_b;
  int label = 0;
};

ItemFeatures featurize_item(const Featurizer& featurizer, const CatalogItem& item);
std::vector<TripletExample> featurize_triplets(const std::vector<TripletRecord>& records,
                                               const SyntheticCatalog& catalog,
                                               const Featurizer& featurizer);
std::vector<PairExample> featurize_pairs(const std::vector<PairRecord>& records,
                                         const SyntheticCatalog& catalog,
                                         const Featurizer& featurizer);

// Item stats over the catalog, user stats over the given (training) sessions.
FeatureStats fit_feature_stats(const FeatureConfig& config, const SyntheticCatalog& catalog,
                               const std::vector<SessionLog>& train_sessions);

// Line-delimited JSON, one record per line, each with schema_version.
void write_catalog(const std::filesystem::path& path, const SyntheticCatalog& catalog);
SyntheticCatalog read_catalog(const std::filesystem::path& path);
// Sessions without utilities; the planted utilities go to the sidecar file.
void write_sessions(const std::filesystem::path& path, const std::filesystem::path& sidecar,
                    const std::vector<SessionLog>& sessions);
std::vector<SessionLog> read_sessions(const std::filesystem::path& path,
                                      const std::filesystem::path& sidecar = {});
void write_triplets(const std::filesystem::path& path, const std::vector<TripletRecord>& records);
std::vector<TripletRecord> read_triplets(const std::filesystem::path& path);
void write_pairs(const std::filesystem::path& path, const std::vector<PairRecord>& records);
std::vector<PairRecord> read_pairs(const std::filesystem::path& path);

}  // namespace semstack

#endif  // SEMSTACK_DATAGEN_HPP_
