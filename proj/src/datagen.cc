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

#include "semstack/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "semstack/binary_io.hpp"
#include "semstack/status.hpp"

namespace semstack {
namespace {

using nlohmann::json;

constexpr int kSchemaVersion = 1;
constexpr std::uint64_t kFirstItemId = 100000;
constexpr std::uint32_t kClusterWordBase = 1000;

constexpr const char* kSyllables[] = {"ka", "lo", "mi", "ra", "te", "su", "no",
                                      "vi", "da", "pe", "zu", "ho", "ri", "ba",
                                      "ge", "fa", "ju", "wo", "xi", "ly"};
constexpr std::uint32_t kNumSyllables = 20;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t kPopulationStream = ~std::uint64_t{0};

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(stream + 0x5851F42D4C957F2DULL)));
}

std::string pseudo_word(std::uint32_t id) {
  std::string word;
  std::uint32_t x = id;
  do {
    word += kSyllables[x % kNumSyllables];
    x /= kNumSyllables;
  } while (x > 0);
  return word;
}

std::string cluster_word(const CatalogConfig& c, std::uint32_t cluster, std::size_t j) {
  return pseudo_word(kClusterWordBase + static_cast<std::uint32_t>(cluster * c.cluster_pool_size + j));
}

std::string shared_word(std::size_t j) { return pseudo_word(static_cast<std::uint32_t>(j)); }

std::vector<double> unit_gaussian(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  double norm = 0;
  do {
    norm = 0;
    for (auto& x : v) {
      x = normal(rng);
      norm += x * x;
    }
  } while (norm == 0);
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

double raw_attribute(std::size_t k, double z) {
  switch (k % 4) {
    case 0: return std::exp(3.0 + 0.8 * z);            // price
    case 1: return sigmoid(-3.0 + 0.5 * z);            // past ctr
    case 2: return sigmoid(-4.0 + 0.5 * z);            // past cvr
    default: return std::floor(std::exp(2.0 + 1.2 * z));  // sale volume
  }
}

// Pick `count` tokens, each from the cluster pool with probability p_cluster.
std::string draw_text(std::mt19937_64& rng, const CatalogConfig& c, std::uint32_t cluster,
                      std::size_t count, double p_cluster) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick_cluster(0, c.cluster_pool_size - 1);
  std::uniform_int_distribution<std::size_t> pick_shared(0, c.shared_pool_size - 1);
  std::string text;
  for (std::size_t t = 0; t < count; ++t) {
    if (t) text += ' ';
    text += unit(rng) < p_cluster ? cluster_word(c, cluster, pick_cluster(rng))
                                  : shared_word(pick_shared(rng));
  }
  return text;
}

// Title with exactly round(purity * count) cluster tokens in shuffled order.
std::string draw_title(std::mt19937_64& rng, const CatalogConfig& c, std::uint32_t cluster,
                       std::size_t count, double purity) {
  std::uniform_int_distribution<std::size_t> pick_cluster(0, c.cluster_pool_size - 1);
  std::uniform_int_distribution<std::size_t> pick_shared(0, c.shared_pool_size - 1);
  const auto n_cluster = static_cast<std::size_t>(std::llround(purity * static_cast<double>(count)));
  std::vector<std::string> words;
  for (std::size_t t = 0; t < count; ++t) {
    words.push_back(t < n_cluster ? cluster_word(c, cluster, pick_cluster(rng)) : shared_word(pick_shared(rng)));
  }
  std::shuffle(words.begin(), words.end(), rng);
  std::string text;
  for (const auto& w : words) {
    if (!text.empty()) text += ' ';
    text += w;
  }
  return text;
}

double planted_utility(const CatalogItem& item, double relevance, const SyntheticUser& user,
                       const UtilityWeights& w) {
  double u = 0;
  for (std::size_t k = 0; k < item.attributes.size(); ++k) u += w.attribute[k] * item.attributes[k];
  u -= w.price_match * std::abs(user.purchasing_power - item.attributes[0]);
  return u + w.relevance * relevance;
}

json user_to_json(const SyntheticUser& u) {
  return json{{"actions", u.actions}, {"numeric", u.numeric}};
}

SyntheticUser user_from_json(const json& j) {
  SyntheticUser u;
  u.actions = j.at("actions").get<std::string>();
  u.numeric = j.at("numeric").get<std::vector<double>>();
  return u;
}

template <typename Fn>
void for_each_line(const std::filesystem::path& path, const char* what, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, std::string("cannot open ") + what + " file " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kFormat, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    const int version = j.value("schema_version", -1);
    if (version != kSchemaVersion) {
      throw Error(ErrorCode::kUnsupportedVersion,
                  path.string() + ":" + std::to_string(lineno) + ": unsupported schema_version " +
                      std::to_string(version));
    }
    try {
      fn(j);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kFormat, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void write_lines(const std::filesystem::path& path, const std::vector<json>& lines) {
  std::string out;
  for (const auto& j : lines) {
    out += j.dump();
    out += '\n';
  }
  write_file_atomic(path, out);
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double click_probability(double utility, std::uint32_t position, const UtilityWeights& w) {
  return sigmoid(utility + w.click_bias - w.position * std::log2(1.0 + position));
}

double order_probability(double utility, std::uint32_t position, const UtilityWeights& w) {
  return click_probability(utility, position, w) * sigmoid(utility + w.order_bias);
}

void CatalogConfig::validate() const {
  if (n_items == 0) return;
  require(n_clusters >= 1 && n_clusters <= n_items, ErrorCode::kConfig,
          "catalog: need 1 <= n_clusters <= n_items");
  require(latent_dim >= 1, ErrorCode::kConfig, "catalog: latent_dim must be >= 1");
  require(numeric_dim >= 1, ErrorCode::kConfig, "catalog: numeric_dim must be >= 1");
  require(cluster_pool_size >= 1 && shared_pool_size >= 1, ErrorCode::kConfig,
          "catalog: token pools must be nonempty");
}

std::size_t SyntheticCatalog::n_clusters() const { return centroids.size(); }

void SyntheticCatalog::reindex() {
  by_id_.clear();
  for (std::size_t i = 0; i < items.size(); ++i) {
    const bool inserted = by_id_.emplace(items[i].item_id, i).second;
    require(inserted, ErrorCode::kValidation,
            "catalog: duplicate item_id " + std::to_string(items[i].item_id));
  }
}

bool SyntheticCatalog::contains(std::uint64_t item_id) const { return by_id_.count(item_id) > 0; }

const CatalogItem& SyntheticCatalog::at(std::uint64_t item_id) const {
  auto it = by_id_.find(item_id);
  require(it != by_id_.end(), ErrorCode::kOutOfRange,
          "item_id " + std::to_string(item_id) + " not in catalog");
  return items[it->second];
}

std::vector<std::vector<std::size_t>> SyntheticCatalog::members_by_cluster() const {
  std::vector<std::vector<std::size_t>> members(n_clusters());
  for (std::size_t i = 0; i < items.size(); ++i) members[items[i].cluster].push_back(i);
  return members;
}

std::vector<NumericTransform> item_numeric_transforms(std::size_t numeric_dim) {
  std::vector<NumericTransform> out;
  for (std::size_t k = 0; k < numeric_dim; ++k) {
    out.push_back((k % 4 == 0 || k % 4 == 3) ? NumericTransform::kLog1pZScore
                                             : NumericTransform::kZScore);
  }
  return out;
}

std::vector<NumericTransform> user_numeric_transforms() {
  return {NumericTransform::kLog1pZScore, NumericTransform::kLog1pZScore};
}

FeatureConfig default_feature_config(std::size_t item_numeric_dim) {
  FeatureConfig c;
  c.item_transforms = item_numeric_transforms(item_numeric_dim);
  c.user_transforms = user_numeric_transforms();
  return c;
}

SyntheticCatalog generate_catalog(const CatalogConfig& config, std::uint64_t seed) {
  config.validate();
  SyntheticCatalog catalog;
  catalog.config = config;
  if (config.n_items == 0) return catalog;
  auto rng = stream_rng(seed, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> title_len(4, 7);

  for (std::size_t c = 0; c < config.n_clusters; ++c) {
    catalog.centroids.push_back(unit_gaussian(rng, config.latent_dim));
  }
  const double noise = config.latent_noise / std::sqrt(static_cast<double>(config.latent_dim));
  catalog.items.reserve(config.n_items);
  for (std::size_t i = 0; i < config.n_items; ++i) {
    CatalogItem item;
    item.item_id = kFirstItemId + i;
    item.cluster = static_cast<std::uint32_t>(i % config.n_clusters);
    const auto& centroid = catalog.centroids[item.cluster];
    item.latent.resize(config.latent_dim);
    double norm = 0;
    for (std::size_t k = 0; k < config.latent_dim; ++k) {
      item.latent[k] = centroid[k] + noise * normal(rng);
      norm += item.latent[k] * item.latent[k];
    }
    norm = std::sqrt(norm);
    for (auto& x : item.latent) x /= norm;
    for (std::size_t k = 0; k < config.numeric_dim; ++k) {
      item.attributes.push_back(normal(rng));
      item.numeric.push_back(raw_attribute(k, item.attributes.back()));
    }
    // Items closer to their cluster centroid carry more cluster vocabulary.
    double alignment = 0;
    for (std::size_t k = 0; k < config.latent_dim; ++k) alignment += item.latent[k] * centroid[k];
    item.title = draw_title(rng, config, item.cluster, title_len(rng), std::clamp(alignment, 0.0, 1.0));
    catalog.items.push_back(std::move(item));
  }
  catalog.reindex();
  return catalog;
}

// Purchasing power, activity and a click history drawn half from `cluster`.
SyntheticUser draw_user(std::mt19937_64& rng, const SyntheticCatalog& catalog,
                        const std::vector<std::vector<std::size_t>>& members, std::uint32_t cluster,
                        std::size_t history_items) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> any_item(0, catalog.items.size() - 1);
  const auto& cluster_members = members[cluster];
  SyntheticUser user;
  user.purchasing_power = normal(rng);
  const double activity = normal(rng);
  user.numeric = {std::exp(3.0 + 0.8 * user.purchasing_power), std::floor(std::exp(1.5 + activity))};
  for (std::size_t h = 0; h < history_items; ++h) {
    const std::size_t idx =
        (unit(rng) < 0.5 && !cluster_members.empty())
            ? cluster_members[std::uniform_int_distribution<std::size_t>(0, cluster_members.size() - 1)(rng)]
            : any_item(rng);
    if (h) user.actions += ' ';
    user.actions += catalog.items[idx].title;
  }
  return user;
}

double on_topic_share(const SyntheticCatalog& catalog, const CatalogItem& item) {
  const CatalogConfig& c = catalog.config;
  std::unordered_set<std::string> vocab;
  for (std::size_t j = 0; j < c.cluster_pool_size; ++j) vocab.insert(cluster_word(c, item.cluster, j));
  const TokenList tokens = tokenize(item.title);
  if (tokens.unigrams.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& t : tokens.unigrams) hits += vocab.count(t);
  return static_cast<double>(hits) / static_cast<double>(tokens.unigrams.size());
}

std::vector<SessionLog> generate_sessions(const SyntheticCatalog& catalog,
                                          const SessionConfig& config, std::uint64_t seed) {
  const std::size_t n_items = catalog.items.size();
  const std::size_t per = config.presented_per_session;
  if (config.n_sessions == 0) return {};
  require(per >= 1, ErrorCode::kConfig, "sessions: presented_per_session must be >= 1");
  require(per <= n_items, ErrorCode::kConfig,
          "sessions: presented_per_session " + std::to_string(per) + " exceeds catalog size " +
              std::to_string(n_items));
  require(per <= config.max_presented, ErrorCode::kConfig,
          "sessions: presented_per_session exceeds max_presented");
  const std::size_t numeric_dim = catalog.items.front().attributes.size();
  require(config.utility.attribute.size() == numeric_dim, ErrorCode::kConfig,
          "sessions: utility weights need one entry per numeric attribute");
  require(config.noise_scale >= 0, ErrorCode::kConfig, "sessions: noise_scale must be >= 0");

  const auto members = catalog.members_by_cluster();
  const std::size_t n_clusters = catalog.n_clusters();
  std::vector<double> on_topic(n_items);
  for (std::size_t i = 0; i < n_items; ++i) on_topic[i] = on_topic_share(catalog, catalog.items[i]);

  // Returning users and head queries come from their own stream so that the
  // per-session streams stay independent of the population sizes.
  auto population_rng = stream_rng(seed, kPopulationStream);
  std::vector<std::vector<std::string>> query_pool(n_clusters);
  for (std::size_t c = 0; c < n_clusters && config.queries_per_cluster > 0; ++c) {
    for (std::size_t q = 0; q < config.queries_per_cluster; ++q) {
      query_pool[c].push_back(draw_text(population_rng, catalog.config, static_cast<std::uint32_t>(c),
                                        std::uniform_int_distribution<std::size_t>(2, 3)(population_rng), 0.8));
    }
  }
  std::vector<SyntheticUser> population;
  for (std::size_t u = 0; u < config.n_users; ++u) {
    const auto favorite = static_cast<std::uint32_t>(
        std::uniform_int_distribution<std::size_t>(0, n_clusters - 1)(population_rng));
    population.push_back(draw_user(population_rng, catalog, members, favorite, config.history_items));
  }

  std::vector<SessionLog> sessions;
  sessions.reserve(config.n_sessions);
  for (std::size_t s = 0; s < config.n_sessions; ++s) {
    SessionLog log;
    log.session_id = config.first_session_id + s;
    auto rng = stream_rng(seed, log.session_id);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> any_item(0, n_items - 1);

    log.query_cluster = static_cast<std::uint32_t>(
        std::uniform_int_distribution<std::size_t>(0, n_clusters - 1)(rng));
    const auto& cluster_members = members[log.query_cluster];
    if (config.queries_per_cluster > 0) {
      const auto& pool = query_pool[log.query_cluster];
      log.query = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
    } else {
      log.query = draw_text(rng, catalog.config, log.query_cluster,
                            std::uniform_int_distribution<std::size_t>(2, 3)(rng), 0.8);
    }

    if (config.n_users > 0) {
      log.user = population[std::uniform_int_distribution<std::size_t>(0, population.size() - 1)(rng)];
    } else {
      log.user = draw_user(rng, catalog, members, log.query_cluster, config.history_items);
    }
    const SyntheticUser& user = log.user;

    const std::size_t outside = n_items - cluster_members.size();
    std::size_t n_in = static_cast<std::size_t>(std::llround(config.in_cluster_fraction * per));
    n_in = std::min({n_in, cluster_members.size(), per});
    std::size_t n_out = std::min(per - n_in, outside);
    n_in = per - n_out;

    std::vector<std::size_t> chosen;
    std::vector<std::size_t> pool = cluster_members;
    for (std::size_t k = 0; k < n_in; ++k) {
      const std::size_t j = std::uniform_int_distribution<std::size_t>(k, pool.size() - 1)(rng);
      std::swap(pool[k], pool[j]);
      chosen.push_back(pool[k]);
    }
    std::unordered_set<std::size_t> taken(chosen.begin(), chosen.end());
    while (n_out > 0) {
      const std::size_t idx = any_item(rng);
      if (catalog.items[idx].cluster == log.query_cluster || !taken.insert(idx).second) continue;
      chosen.push_back(idx);
      --n_out;
    }
    std::shuffle(chosen.begin(), chosen.end(), rng);

    for (std::size_t p = 0; p < chosen.size(); ++p) {
      const auto& item = catalog.items[chosen[p]];
      PresentedItem shown;
      shown.item_id = item.item_id;
      shown.position = static_cast<std::uint32_t>(p + 1);
      const double relevance = item.cluster == log.query_cluster ? on_topic[chosen[p]] : 0.0;
      shown.planted_utility = planted_utility(item, relevance, user, config.utility);
      const double noisy = shown.planted_utility + config.noise_scale * normal(rng);
      shown.clicked = unit(rng) < click_probability(noisy, shown.position, config.utility);
      const bool converts = unit(rng) < sigmoid(noisy + config.utility.order_bias);
      shown.ordered = shown.clicked && converts;
      log.presented.push_back(shown);
    }
    sessions.push_back(std::move(log));
  }
  return sessions;
}

TripletSet make_triplets(const std::vector<SessionLog>& sessions, const SyntheticCatalog& catalog,
                         const TripletPolicy& policy, std::uint64_t seed) {
  TripletSet out;
  const std::size_t n_items = catalog.items.size();
  for (const auto& session : sessions) {
    std::vector<const PresentedItem*> clicked;
    std::vector<std::uint64_t> hard;
    for (const auto& shown : session.presented) {
      if (shown.clicked) {
        clicked.push_back(&shown);
      } else if (catalog.at(shown.item_id).cluster == session.query_cluster) {
        hard.push_back(shown.item_id);
      }
    }
    if (clicked.empty()) {
      ++out.sessions_without_clicks;
      continue;
    }
    auto rng = stream_rng(seed, session.session_id);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> any_item(0, n_items - 1);
    const bool single_cluster = catalog.n_clusters() <= 1;

    for (const auto* positive : clicked) {
      for (std::size_t k = 0; k < policy.negatives_per_positive; ++k) {
        std::uint64_t negative = 0;
        bool found = false;
        if (unit(rng) < policy.hard_negative_prob) {
          if (!hard.empty()) {
            negative = hard[std::uniform_int_distribution<std::size_t>(0, hard.size() - 1)(rng)];
            found = true;
          } else {
            ++out.hard_fallbacks;
          }
        }
        if (!found) {
          if (n_items < 2) break;
          // With a single cluster every item is relevant; any other item serves.
          for (;;) {
            const auto& cand = catalog.items[any_item(rng)];
            if (cand.item_id == positive->item_id) continue;
            if (!single_cluster && cand.cluster == session.query_cluster) continue;
            negative = cand.item_id;
            break;
          }
        }
        out.records.push_back({session.session_id, session.query, session.query_cluster,
                               positive->item_id, negative});
      }
    }
  }
  return out;
}

std::vector<PairRecord> make_pairs(const std::vector<SessionLog>& sessions,
                                   const PairOptions& options) {
  std::vector<PairRecord> out;
  auto emit = [&out](const SessionLog& s, std::uint64_t preferred, std::uint64_t other) {
    out.push_back({s.session_id, s.user, s.query, preferred, other, 1});
    out.push_back({s.session_id, s.user, s.query, other, preferred, 0});
  };
  for (const auto& s : sessions) {
    for (const auto& a : s.presented) {
      if (!a.ordered) continue;
      for (const auto& b : s.presented) {
        if (!b.ordered) emit(s, a.item_id, b.item_id);
      }
    }
    if (options.include_click_pairs) {
      for (const auto& a : s.presented) {
        if (!a.clicked || a.ordered) continue;
        for (const auto& b : s.presented) {
          if (!b.clicked) emit(s, a.item_id, b.item_id);
        }
      }
    }
  }
  return out;
}

ItemFeatures featurize_item(const Featurizer& featurizer, const CatalogItem& item) {
  return featurizer.item(item.item_id, item.title, item.numeric);
}

std::vector<TripletExample> featurize_triplets(const std::vector<TripletRecord>& records,
                                               const SyntheticCatalog& catalog,
                                               const Featurizer& featurizer) {
  std::unordered_map<std::uint64_t, ItemFeatures> cache;
  auto item = [&](std::uint64_t id) -> const ItemFeatures& {
    auto it = cache.find(id);
    if (it == cache.end()) it = cache.emplace(id, featurize_item(featurizer, catalog.at(id))).first;
    return it->second;
  };
  std::vector<TripletExample> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    out.push_back({featurizer.query(r.query), item(r.positive_id), item(r.negative_id)});
  }
  return out;
}

std::vector<PairExample> featurize_pairs(const std::vector<PairRecord>& records,
                                         const SyntheticCatalog& catalog,
                                         const Featurizer& featurizer) {
  std::unordered_map<std::uint64_t, ItemFeatures> cache;
  auto item = [&](std::uint64_t id) -> const ItemFeatures& {
    auto it = cache.find(id);
    if (it == cache.end()) it = cache.emplace(id, featurize_item(featurizer, catalog.at(id))).first;
    return it->second;
  };
  std::vector<PairExample> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    out.push_back({featurizer.user(r.user.actions, r.user.numeric), featurizer.query(r.query),
                   item(r.item_a), item(r.item_b), r.label});
  }
  return out;
}

FeatureStats fit_feature_stats(const FeatureConfig& config, const SyntheticCatalog& catalog,
                               const std::vector<SessionLog>& train_sessions) {
  const auto item_dim = static_cast<Eigen::Index>(config.item_numeric_dim());
  Eigen::MatrixXd items(static_cast<Eigen::Index>(catalog.items.size()), item_dim);
  for (std::size_t i = 0; i < catalog.items.size(); ++i) {
    const auto& raw = catalog.items[i].numeric;
    require(raw.size() == config.item_numeric_dim(), ErrorCode::kShape,
            "catalog numeric width disagrees with feature config");
    for (Eigen::Index d = 0; d < item_dim; ++d) items(static_cast<Eigen::Index>(i), d) = raw[d];
  }
  const auto user_dim = static_cast<Eigen::Index>(config.user_numeric_dim());
  Eigen::MatrixXd users(static_cast<Eigen::Index>(train_sessions.size()), user_dim);
  for (std::size_t i = 0; i < train_sessions.size(); ++i) {
    const auto& raw = train_sessions[i].user.numeric;
    require(raw.size() == config.user_numeric_dim(), ErrorCode::kShape,
            "user numeric width disagrees with feature config");
    for (Eigen::Index d = 0; d < user_dim; ++d) users(static_cast<Eigen::Index>(i), d) = raw[d];
  }
  return FeatureStats{fit_numeric_stats(items, config.item_transforms),
                      fit_numeric_stats(users, config.user_transforms)};
}

void write_catalog(const std::filesystem::path& path, const SyntheticCatalog& catalog) {
  const auto& cfg = catalog.config;
  std::vector<json> lines;
  lines.push_back({{"schema_version", kSchemaVersion}, {"kind", "config"},
                   {"n_items", cfg.n_items}, {"n_clusters", cfg.n_clusters},
                   {"latent_dim", cfg.latent_dim}, {"numeric_dim", cfg.numeric_dim},
                   {"cluster_pool_size", cfg.cluster_pool_size},
                   {"shared_pool_size", cfg.shared_pool_size}, {"latent_noise", cfg.latent_noise}});
  for (std::size_t c = 0; c < catalog.centroids.size(); ++c) {
    lines.push_back({{"schema_version", kSchemaVersion}, {"kind", "centroid"},
                     {"cluster", c}, {"vector", catalog.centroids[c]}});
  }
  for (const auto& item : catalog.items) {
    lines.push_back({{"schema_version", kSchemaVersion},
                     {"kind", "item"},
                     {"item_id", item.item_id},
                     {"title", item.title},
                     {"numeric", item.numeric},
                     {"cluster", item.cluster},
                     {"latent", item.latent},
                     {"attributes", item.attributes}});
  }
  write_lines(path, lines);
}

SyntheticCatalog read_catalog(const std::filesystem::path& path) {
  SyntheticCatalog catalog;
  for_each_line(path, "catalog", [&](const json& j) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "config") {
      auto& c = catalog.config;
      c.n_items = j.at("n_items").get<std::size_t>();
      c.n_clusters = j.at("n_clusters").get<std::size_t>();
      c.latent_dim = j.at("latent_dim").get<std::size_t>();
      c.numeric_dim = j.at("numeric_dim").get<std::size_t>();
      c.cluster_pool_size = j.at("cluster_pool_size").get<std::size_t>();
      c.shared_pool_size = j.at("shared_pool_size").get<std::size_t>();
      c.latent_noise = j.at("latent_noise").get<double>();
      return;
    }
    if (kind == "centroid") {
      catalog.centroids.push_back(j.at("vector").get<std::vector<double>>());
      return;
    }
    CatalogItem item;
    item.item_id = j.at("item_id").get<std::uint64_t>();
    item.title = j.at("title").get<std::string>();
    item.numeric = j.at("numeric").get<std::vector<double>>();
    item.cluster = j.at("cluster").get<std::uint32_t>();
    item.latent = j.at("latent").get<std::vector<double>>();
    item.attributes = j.at("attributes").get<std::vector<double>>();
    require(item.cluster < catalog.centroids.size(), ErrorCode::kFormat,
            "catalog: item cluster has no centroid");
    catalog.items.push_back(std::move(item));
  });
  catalog.reindex();
  return catalog;
}

void write_sessions(const std::filesystem::path& path, const std::filesystem::path& sidecar,
                    const std::vector<SessionLog>& sessions) {
  std::vector<json> lines;
  std::vector<json> utilities;
  for (const auto& s : sessions) {
    json presented = json::array();
    std::vector<double> u;
    for (const auto& p : s.presented) {
      presented.push_back({{"item_id", p.item_id}, {"position", p.position},
                           {"clicked", p.clicked}, {"ordered", p.ordered}});
      u.push_back(p.planted_utility);
    }
    lines.push_back({{"schema_version", kSchemaVersion},
                     {"session_id", s.session_id},
                     {"query", s.query},
                     {"query_cluster", s.query_cluster},
                     {"user", user_to_json(s.user)},
                     {"presented", presented}});
    utilities.push_back({{"schema_version", kSchemaVersion},
                         {"session_id", s.session_id},
                         {"purchasing_power", s.user.purchasing_power},
                         {"planted_utility", u}});
  }
  write_lines(path, lines);
  if (!sidecar.empty()) write_lines(sidecar, utilities);
}

std::vector<SessionLog> read_sessions(const std::filesystem::path& path,
                                      const std::filesystem::path& sidecar) {
  std::vector<SessionLog> sessions;
  for_each_line(path, "sessions", [&](const json& j) {
    SessionLog s;
    s.session_id = j.at("session_id").get<std::uint64_t>();
    s.query = j.at("query").get<std::string>();
    s.query_cluster = j.at("query_cluster").get<std::uint32_t>();
    s.user = user_from_json(j.at("user"));
    for (const auto& p : j.at("presented")) {
      PresentedItem shown;
      shown.item_id = p.at("item_id").get<std::uint64_t>();
      shown.position = p.at("position").get<std::uint32_t>();
      shown.clicked = p.at("clicked").get<bool>();
      shown.ordered = p.at("ordered").get<bool>();
      require(!shown.ordered || shown.clicked, ErrorCode::kFormat,
              "sessions: ordered item that was not clicked");
      require(shown.position == s.presented.size() + 1, ErrorCode::kFormat,
              "sessions: positions must run 1..n without gaps");
      s.presented.push_back(shown);
    }
    sessions.push_back(std::move(s));
  });
  if (!sidecar.empty()) {
    std::unordered_map<std::uint64_t, std::size_t> by_id;
    for (std::size_t i = 0; i < sessions.size(); ++i) by_id[sessions[i].session_id] = i;
    for_each_line(sidecar, "utility sidecar", [&](const json& j) {
      auto it = by_id.find(j.at("session_id").get<std::uint64_t>());
      require(it != by_id.end(), ErrorCode::kFormat, "sidecar references unknown session");
      auto& s = sessions[it->second];
      const auto u = j.at("planted_utility").get<std::vector<double>>();
      require(u.size() == s.presented.size(), ErrorCode::kFormat,
              "sidecar utility count disagrees with session");
      for (std::size_t k = 0; k < u.size(); ++k) s.presented[k].planted_utility = u[k];
      s.user.purchasing_power = j.at("purchasing_power").get<double>();
    });
  }
  return sessions;
}

void write_triplets(const std::filesystem::path& path, const std::vector<TripletRecord>& records) {
  std::vector<json> lines;
  for (const auto& r : records) {
    lines.push_back({{"schema_version", kSchemaVersion}, {"session_id", r.session_id},
                     {"query", r.query}, {"query_cluster", r.query_cluster},
                     {"positive", r.positive_id}, {"negative", r.negative_id}});
  }
  write_lines(path, lines);
}

std::vector<TripletRecord> read_triplets(const std::filesystem::path& path) {
  std::vector<TripletRecord> out;
  for_each_line(path, "triplets", [&](const json& j) {
    out.push_back({j.at("session_id").get<std::uint64_t>(), j.at("query").get<std::string>(),
                   j.at("query_cluster").get<std::uint32_t>(), j.at("positive").get<std::uint64_t>(),
                   j.at("negative").get<std::uint64_t>()});
  });
  return out;
}

void write_pairs(const std::filesystem::path& path, const std::vector<PairRecord>& records) {
  std::vector<json> lines;
  for (const auto& r : records) {
    lines.push_back({{"schema_version", kSchemaVersion}, {"session_id", r.session_id},
                     {"user", user_to_json(r.user)}, {"query", r.query},
                     {"item_a", r.item_a}, {"item_b", r.item_b}, {"label", r.label}});
  }
  write_lines(path, lines);
}

std::vector<PairRecord> read_pairs(const std::filesystem::path& path) {
  std::vector<PairRecord> out;
  for_each_line(path, "pairs", [&](const json& j) {
    PairRecord r;
    r.session_id = j.at("session_id").get<std::uint64_t>();
    r.user = user_from_json(j.at("user"));
    r.query = j.at("query").get<std::string>();
    r.item_a = j.at("item_a").get<std::uint64_t>();
    r.item_b = j.at("item_b").get<std::uint64_t>();
    r.label = j.at("label").get<int>();
    require(r.label == 0 || r.label == 1, ErrorCode::kFormat, "pairs: label must be 0 or 1");
    out.push_back(std::move(r));
  });
  return out;
}

}  // namespace semstack
