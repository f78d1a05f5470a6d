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


#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "semstack/binary_io.hpp"
#include "semstack/datagen.hpp"
#include "semstack/status.hpp"
#include "test_util.hpp"

namespace semstack {
namespace {

CatalogConfig small_catalog_config() {
  CatalogConfig c;
  c.n_items = 2000;
  c.n_clusters = 20;
  return c;
}

TEST(Catalog, EmptyCatalog) {
  CatalogConfig c;
  c.n_items = 0;
  c.n_clusters = 0;
  EXPECT_TRUE(generate_catalog(c, 1).items.empty());
}

TEST(Catalog, Invariants) {
  const CatalogConfig c = small_catalog_config();
  const SyntheticCatalog cat = generate_catalog(c, 5);
  ASSERT_EQ(cat.items.size(), c.n_items);
  std::map<std::uint32_t, std::size_t> sizes;
  std::set<std::uint64_t> ids;
  for (const auto& item : cat.items) {
    ++sizes[item.cluster];
    EXPECT_TRUE(ids.insert(item.item_id).second);
    EXPECT_LT(item.cluster, c.n_clusters);
    double norm = 0;
    for (double x : item.latent) norm += x * x;
    EXPECT_NEAR(std::sqrt(norm), 1.0, 1e-12);
    EXPECT_EQ(item.numeric.size(), c.numeric_dim);
    EXPECT_FALSE(item.title.empty());
    const double share = on_topic_share(cat, item);
    EXPECT_GE(share, 0.0);
    EXPECT_LE(share, 1.0);
  }
  ASSERT_EQ(sizes.size(), c.n_clusters);
  const double expected = static_cast<double>(c.n_items) / static_cast<double>(c.n_clusters);
  for (const auto& [cluster, n] : sizes) {
    EXPECT_GE(static_cast<double>(n), 0.5 * expected) << cluster;
    EXPECT_LE(static_cast<double>(n), 1.5 * expected) << cluster;
  }
}

TEST(Catalog, TermsOverlapAcrossClusters) {
  const SyntheticCatalog cat = generate_catalog(small_catalog_config(), 5);
  std::map<std::string, std::set<std::uint32_t>> clusters_of;
  for (const auto& item : cat.items) {
    for (const auto& w : tokenize(item.title).unigrams) clusters_of[w].insert(item.cluster);
  }
  std::size_t shared = 0;
  for (const auto& [w, cs] : clusters_of) shared += cs.size() > 1;
  EXPECT_GT(shared, 0u);
}

TEST(Catalog, SameSeedSameBytes) {
  testing::TempDir dir("catalog");
  write_catalog(dir / "a.jsonl", generate_catalog(small_catalog_config(), 9));
  write_catalog(dir / "b.jsonl", generate_catalog(small_catalog_config(), 9));
  write_catalog(dir / "c.jsonl", generate_catalog(small_catalog_config(), 10));
  EXPECT_EQ(read_file_bytes(dir / "a.jsonl"), read_file_bytes(dir / "b.jsonl"));
  EXPECT_NE(read_file_bytes(dir / "a.jsonl"), read_file_bytes(dir / "c.jsonl"));
}

TEST(Catalog, RoundTripAndSchemaVersion) {
  testing::TempDir dir("catalog_rt");
  const SyntheticCatalog cat = generate_catalog(small_catalog_config(), 3);
  write_catalog(dir / "cat.jsonl", cat);
  const SyntheticCatalog back = read_catalog(dir / "cat.jsonl");
  ASSERT_EQ(back.items.size(), cat.items.size());
  EXPECT_EQ(back.items[17].title, cat.items[17].title);
  EXPECT_EQ(back.items[17].numeric, cat.items[17].numeric);
  EXPECT_EQ(back.items[17].cluster, cat.items[17].cluster);
  const std::string text = read_file_text(dir / "cat.jsonl");
  const auto first_line = text.substr(0, text.find('\n'));
  EXPECT_EQ(nlohmann::json::parse(first_line).at("schema_version"), 1);
}

TEST(Catalog, SingleClusterSharesOnePool) {
  CatalogConfig c;
  c.n_items = 50;
  c.n_clusters = 1;
  const SyntheticCatalog cat = generate_catalog(c, 2);
  for (const auto& item : cat.items) EXPECT_EQ(item.cluster, 0u);
}

TEST(Catalog, RejectsInvalidSizes) {
  CatalogConfig c;
  c.n_items = 5;
  c.n_clusters = 6;
  try {
    generate_catalog(c, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig);
  }
}

SessionConfig small_session_config(std::size_t n) {
  SessionConfig s;
  s.n_sessions = n;
  s.n_users = 200;
  return s;
}

TEST(Sessions, Invariants) {
  const SyntheticCatalog cat = generate_catalog(small_catalog_config(), 5);
  SessionConfig cfg = small_session_config(2000);
  const auto sessions = generate_sessions(cat, cfg, 7);
  ASSERT_EQ(sessions.size(), 2000u);
  std::set<std::uint64_t> ids;
  for (const auto& s : sessions) {
    EXPECT_TRUE(ids.insert(s.session_id).second);
    ASSERT_EQ(s.presented.size(), cfg.presented_per_session);
    ASSERT_LE(s.presented.size(), cfg.max_presented);
    std::set<std::uint64_t> shown;
    for (std::size_t p = 0; p < s.presented.size(); ++p) {
      const auto& item = s.presented[p];
      EXPECT_EQ(item.position, p + 1);
      EXPECT_TRUE(!item.ordered || item.clicked);
      EXPECT_TRUE(cat.contains(item.item_id));
      EXPECT_TRUE(shown.insert(item.item_id).second);
    }
  }
}

TEST(Sessions, MostlyInCluster) {
  const SyntheticCatalog cat = generate_catalog(small_catalog_config(), 5);
  const auto sessions = generate_sessions(cat, small_session_config(1000), 7);
  std::size_t in = 0, total = 0;
  for (const auto& s : sessions) {
    for (const auto& item : s.presented) {
      in += cat.at(item.item_id).cluster == s.query_cluster;
      ++total;
    }
  }
  EXPECT_NEAR(static_cast<double>(in) / static_cast<double>(total), 0.9, 0.01);
}

TEST(Sessions, SameSeedSameLogs) {
  testing::TempDir dir("sessions");
  const SyntheticCatalog cat = generate_catalog(small_catalog_config(), 5);
  write_sessions(dir / "a.jsonl", dir / "a.u.jsonl", generate_sessions(cat, small_session_config(300), 4));
  write_sessions(dir / "b.jsonl", dir / "b.u.jsonl", generate_sessions(cat, small_session_config(300), 4));
  EXPECT_EQ(read_file_bytes(dir / "a.jsonl"), read_file_bytes(dir / "b.jsonl"));
  EXPECT_EQ(read_file_bytes(dir / "a.u.jsonl"), read_file_bytes(dir / "b.u.jsonl"));
}

TEST(Sessions, RoundTripKeepsSidecar) {
  testing::TempDir dir("sessions_rt");
  const SyntheticCatalog cat = generate_catalog(small_catalog_config(), 5);
  const auto sessions = generate_sessions(cat, small_session_config(50), 4);
  write_sessions(dir / "s.jsonl", dir / "s.u.jsonl", sessions);
  const auto with = read_sessions(dir / "s.jsonl", dir / "s.u.jsonl");
  const auto without = read_sessions(dir / "s.jsonl");
  ASSERT_EQ(with.size(), sessions.size());
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    EXPECT_EQ(with[i].query, sessions[i].query);
    EXPECT_EQ(with[i].user.actions, sessions[i].user.actions);
    for (std::size_t p = 0; p < sessions[i].presented.size(); ++p) {
      EXPECT_EQ(with[i].presented[p].planted_utility, sessions[i].presented[p].planted_utility);
      EXPECT_EQ(with[i].presented[p].ordered, sessions[i].presented[p].ordered);
      EXPECT_EQ(without[i].presented[p].planted_utility, 0.0);
    }
  }
}

TEST(Sessions, RejectsMoreThanCatalog) {
  CatalogConfig c;
  c.n_items = 10;
  c.n_clusters = 2;
  const SyntheticCatalog cat = generate_catalog(c, 1);
  SessionConfig s = small_session_config(5);
  s.presented_per_session = 11;
  try {
    generate_sessions(cat, s, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig);
  }
}

TEST(Sessions, NoiselessBestItemHasHighestOrderProbability) {
  const SyntheticCatalog cat = generate_catalog(small_catalog_config(), 5);
  SessionConfig cfg = small_session_config(500);
  cfg.noise_scale = 0;
  for (const auto& s : generate_sessions(cat, cfg, 3)) {
    std::vector<double> u;
    for (const auto& item : s.presented) u.push_back(item.planted_utility);
    std::sort(u.rbegin(), u.rend());
    if (std::adjacent_find(u.begin(), u.end()) != u.end()) continue;  // not strictly decreasing
    double best = -1;
    std::size_t argmax = 0;
    for (std::size_t p = 0; p < u.size(); ++p) {
      const double prob = order_probability(u[p], static_cast<std::uint32_t>(p + 1), cfg.utility);
      if (prob > best) {
        best = prob;
        argmax = p;
      }
    }
    EXPECT_EQ(argmax, 0u);
  }
}

TEST(Sessions, OrderRateMatchesBinomialOracle) {
  const SyntheticCatalog cat = generate_catalog(small_catalog_config(), 5);
  SessionConfig cfg = small_session_config(10000);
  cfg.noise_scale = 0;
  const auto sessions = generate_sessions(cat, cfg, 21);
  double expected = 0, variance = 0;
  std::size_t observed = 0;
  for (const auto& s : sessions) {
    double none = 1;
    bool any = false;
    for (const auto& item : s.presented) {
      none *= 1 - order_probability(item.planted_utility, item.position, cfg.utility);
      any = any || item.ordered;
    }
    expected += 1 - none;
    variance += (1 - none) * none;
    observed += any;
  }
  EXPECT_LE(std::abs(static_cast<double>(observed) - expected), 3 * std::sqrt(variance))
      << "observed " << observed << " expected " << expected;
}

// Two clusters of three items; ids 1..3 in cluster 0, 4..6 in cluster 1.
SyntheticCatalog tiny_catalog() {
  SyntheticCatalog cat;
  cat.config.n_items = 6;
  cat.config.n_clusters = 2;
  cat.centroids = {{1, 0}, {0, 1}};
  for (std::uint64_t id = 1; id <= 6; ++id) {
    CatalogItem item;
    item.item_id = id;
    item.cluster = id <= 3 ? 0 : 1;
    item.title = "item" + std::to_string(id);
    item.numeric = {1, 2, 3, 4};
    item.latent = item.cluster == 0 ? std::vector<double>{1, 0} : std::vector<double>{0, 1};
    cat.items.push_back(item);
  }
  cat.reindex();
  return cat;
}

SessionLog tiny_session(std::uint64_t id, std::vector<std::pair<bool, bool>> clicked_ordered) {
  SessionLog s;
  s.session_id = id;
  s.query = "item";
  s.query_cluster = 0;
  for (std::size_t p = 0; p < clicked_ordered.size(); ++p) {
    PresentedItem item;
    item.item_id = p + 1;
    item.position = static_cast<std::uint32_t>(p + 1);
    item.clicked = clicked_ordered[p].first;
    item.ordered = clicked_ordered[p].second;
    s.presented.push_back(item);
  }
  return s;
}

TEST(Triplets, NoClicksNoTriplets) {
  const auto set = make_triplets({tiny_session(1, {{false, false}, {false, false}})}, tiny_catalog(),
                                 TripletPolicy{}, 1);
  EXPECT_TRUE(set.records.empty());
  EXPECT_EQ(set.sessions_without_clicks, 1u);
}

TEST(Triplets, TwoClicksTwoNegativesEach) {
  const auto set = make_triplets(
      {tiny_session(1, {{true, false}, {true, true}, {false, false}, {false, false}})}, tiny_catalog(),
      TripletPolicy{2, 0.5}, 1);
  ASSERT_EQ(set.records.size(), 4u);
  const SyntheticCatalog cat = tiny_catalog();
  for (const auto& r : set.records) {
    EXPECT_NE(r.positive_id, r.negative_id);
    EXPECT_TRUE(r.positive_id == 1 || r.positive_id == 2);
    // Hard negatives are the unclicked same-cluster item 3; easy ones come from cluster 1.
    EXPECT_TRUE(r.negative_id == 3 || cat.at(r.negative_id).cluster == 1) << r.negative_id;
  }
}

TEST(Triplets, HardNegativeShareMatchesBinomialOracle) {
  const SyntheticCatalog cat = generate_catalog(small_catalog_config(), 5);
  const auto sessions = generate_sessions(cat, small_session_config(4000), 8);
  const TripletPolicy policy{2, 0.5};
  const TripletSet set = make_triplets(sessions, cat, policy, 99);
  const std::size_t n = set.records.size();
  ASSERT_GE(n, 10000u);
  EXPECT_LT(static_cast<double>(set.hard_fallbacks), 0.01 * static_cast<double>(n));
  std::size_t same = 0;
  for (const auto& r : set.records) {
    ASSERT_TRUE(cat.contains(r.positive_id));
    ASSERT_TRUE(cat.contains(r.negative_id));
    EXPECT_NE(r.positive_id, r.negative_id);
    same += cat.at(r.negative_id).cluster == r.query_cluster;
  }
  // A hard draw with no candidate falls back to an easy negative.
  const double hard_draws = static_cast<double>(same + set.hard_fallbacks);
  const double sigma = std::sqrt(static_cast<double>(n) * 0.25);
  EXPECT_LE(std::abs(hard_draws - 0.5 * static_cast<double>(n)), 3 * sigma);
}

TEST(Pairs, OneOrderAmongFive) {
  const auto pairs = make_pairs(
      {tiny_session(1, {{true, false}, {true, true}, {false, false}, {false, false}, {true, false}})});
  ASSERT_EQ(pairs.size(), 8u);
  std::size_t positive = 0;
  for (const auto& p : pairs) {
    positive += p.label;
    EXPECT_NE(p.item_a, p.item_b);
    EXPECT_EQ(p.label == 1 ? p.item_a : p.item_b, 2u);
  }
  EXPECT_EQ(positive, 4u);
}

TEST(Pairs, NoOrdersNoPairs) {
  EXPECT_TRUE(make_pairs({tiny_session(1, {{true, false}, {false, false}})}).empty());
}

TEST(Pairs, BothOrderedSkipped) {
  const auto pairs = make_pairs({tiny_session(1, {{true, true}, {true, true}, {false, false}})});
  ASSERT_EQ(pairs.size(), 4u);
  for (const auto& p : pairs) EXPECT_TRUE(p.item_a == 3 || p.item_b == 3);
}

TEST(Pairs, ClickPairsBehindFlag) {
  const auto s = tiny_session(1, {{true, true}, {true, false}, {false, false}});
  EXPECT_EQ(make_pairs({s}).size(), 4u);
  EXPECT_EQ(make_pairs({s}, PairOptions{true}).size(), 6u);
}

TEST(Pairs, ExactlyBalancedAndRoundTrip) {
  const SyntheticCatalog cat = generate_catalog(small_catalog_config(), 5);
  const auto sessions = generate_sessions(cat, small_session_config(500), 8);
  const auto pairs = make_pairs(sessions);
  ASSERT_FALSE(pairs.empty());
  std::size_t ones = 0;
  for (const auto& p : pairs) {
    ones += p.label;
    ASSERT_TRUE(cat.contains(p.item_a) && cat.contains(p.item_b));
  }
  EXPECT_EQ(2 * ones, pairs.size());

  testing::TempDir dir("pairs");
  write_pairs(dir / "p.jsonl", pairs);
  const auto back = read_pairs(dir / "p.jsonl");
  ASSERT_EQ(back.size(), pairs.size());
  EXPECT_EQ(back.back().item_a, pairs.back().item_a);
  EXPECT_EQ(back.back().user.numeric, pairs.back().user.numeric);
  EXPECT_EQ(back.back().label, pairs.back().label);

  const auto triplets = make_triplets(sessions, cat, TripletPolicy{}, 3).records;
  write_triplets(dir / "t.jsonl", triplets);
  const auto tback = read_triplets(dir / "t.jsonl");
  ASSERT_EQ(tback.size(), triplets.size());
  EXPECT_EQ(tback.front().negative_id, triplets.front().negative_id);
}

TEST(Featurize, StatsFromTrainingSplit) {
  const SyntheticCatalog cat = generate_catalog(small_catalog_config(), 5);
  const auto sessions = generate_sessions(cat, small_session_config(200), 8);
  const FeatureConfig fc = default_feature_config(cat.config.numeric_dim);
  const FeatureStats stats = fit_feature_stats(fc, cat, sessions);
  const Featurizer f(fc, stats);
  const auto triplets = featurize_triplets(make_triplets(sessions, cat, TripletPolicy{}, 3).records, cat, f);
  ASSERT_FALSE(triplets.empty());
  EXPECT_EQ(triplets[0].positive.numeric.values.size(), static_cast<Eigen::Index>(cat.config.numeric_dim));
  const auto pairs = featurize_pairs(make_pairs(sessions), cat, f);
  ASSERT_FALSE(pairs.empty());
  EXPECT_EQ(pairs[0].user.numeric.values.size(), static_cast<Eigen::Index>(fc.user_numeric_dim()));
  for (auto id : pairs[0].item_a.tokens.ids) EXPECT_LT(id, fc.item_buckets);
}

}  // namespace
}  // namespace semstack
