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
#include <random>
#include <vector>

#include "semstack/checkpoint.hpp"
#include "semstack/dsr.hpp"
#include "test_util.hpp"

namespace semstack {
namespace {

using testing::random_item;
using testing::random_query;
using testing::distance_to_kinks;
using testing::small_dsr_arch;

TwoTowerModel fresh_model(std::uint64_t seed) {
  TwoTowerModel m(small_dsr_arch());
  m.initialize(seed);
  return m;
}

std::vector<TripletExample> random_triplets(std::mt19937_64& rng, std::size_t n) {
  const auto arch = small_dsr_arch();
  std::vector<TripletExample> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({random_query(rng, arch.query_buckets),
                   random_item(rng, 2 * i + 1, arch.item_buckets, arch.item_numeric_dim),
                   random_item(rng, 2 * i + 2, arch.item_buckets, arch.item_numeric_dim)});
  }
  return out;
}

TEST(Embed, UnitNormPureAndColdSafe) {
  const TwoTowerModel m = fresh_model(1);
  std::mt19937_64 rng(2);
  for (int i = 0; i < 200; ++i) {
    const auto q = random_query(rng, 64);
    const Eigen::VectorXd a = query_embed(m, q);
    EXPECT_NEAR(a.norm(), 1.0, 1e-6);
    EXPECT_EQ(a, query_embed(m, q));
    const auto s = random_item(rng, 1, 64, 3);
    const Eigen::VectorXd b = item_embed(m, s);
    EXPECT_NEAR(b.norm(), 1.0, 1e-6);
    EXPECT_EQ(b, item_embed(m, s));
  }
  const QueryFeatures cold{};
  EXPECT_NEAR(query_embed(m, cold).norm(), 1.0, 1e-6);
  EXPECT_EQ(query_embed(m, cold), query_embed(m, cold));
  EXPECT_EQ(m.output_dim(), 8u);
}

TEST(Embed, BucketViolation) {
  const TwoTowerModel m = fresh_model(1);
  QueryFeatures q;
  q.tokens.ids = {64};
  try {
    query_embed(m, q);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kOutOfRange);
  }
}

TEST(TripletHinge, Examples) {
  const Eigen::Vector2d q(1, 0);
  const Eigen::Vector2d p(0.8, 0.6);
  const Eigen::Vector2d n(0.75, std::sqrt(1 - 0.75 * 0.75));
  EXPECT_NEAR(triplet_hinge_loss(q, p, n, 0.1), 0.05, 1e-15);
  EXPECT_EQ(triplet_hinge_loss(q, p, n, 0.05), 0.0);
  EXPECT_NEAR(triplet_hinge_loss(q, n, p, 0.0), 0.05, 1e-15);
  EXPECT_EQ(triplet_hinge_loss(q, p, p, 0.1), 0.1);
  EXPECT_EQ(triplet_hinge_loss(q, p, p, 0.0), 0.0);
}

TEST(TripletHinge, DirectionalMonotonicity) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 1000; ++i) {
    const Eigen::VectorXd q = testing::random_unit(rng, 8);
    const Eigen::VectorXd p = testing::random_unit(rng, 8);
    const Eigen::VectorXd n = testing::random_unit(rng, 8);
    const double base = triplet_hinge_loss(q, p, n, 0.3);
    const Eigen::VectorXd p_closer = (p + 0.1 * q).normalized();
    const Eigen::VectorXd n_closer = (n + 0.1 * q).normalized();
    EXPECT_LE(triplet_hinge_loss(q, p_closer, n, 0.3), base);
    EXPECT_GE(triplet_hinge_loss(q, p, n_closer, 0.3), base);
  }
}

TEST(TripletHinge, ZeroRegionHasExactlyZeroGradients) {
  TwoTowerModel m = fresh_model(5);
  std::mt19937_64 rng(6);
  std::vector<TripletExample> satisfied;
  for (const auto& t : random_triplets(rng, 200)) {
    const Eigen::VectorXd q = query_embed(m, t.query);
    if (q.dot(item_embed(m, t.positive)) - q.dot(item_embed(m, t.negative)) >= 0.05) {
      satisfied.push_back(t);
    }
  }
  ASSERT_GE(satisfied.size(), 10u);
  m.query_tower().zero_grad();
  m.item_tower().zero_grad();
  EXPECT_EQ(triplet_batch_loss(m, satisfied, 0.05, true), 0.0);
  for (auto* tower : {&m.query_tower(), &m.item_tower()}) {
    for (const auto& block : tower->parameters()) {
      for (Eigen::Index i = 0; i < block.size; ++i) ASSERT_EQ(block.grad[i], 0.0) << block.name;
    }
  }
}

TEST(TripletHinge, GradCheckThroughBothTowers) {
  std::mt19937_64 rng(7);
  int checked = 0;
  for (int attempt = 0; attempt < 40 && checked < 3; ++attempt) {
    TwoTowerModel m = fresh_model(100 + attempt);
    // Unit-scale embeddings keep pre-activations clear of the ReLU kink.
    for (auto* tower : {&m.query_tower(), &m.item_tower()}) {
      for (auto& table : tower->tables()) table.weights *= 100.0;
    }
    const auto batch = random_triplets(rng, 3);
    const double margin = 0.5;
    if (distance_to_kinks(m, batch, margin) < 1e-3) continue;
    m.query_tower().zero_grad();
    m.item_tower().zero_grad();
    triplet_batch_loss(m, batch, margin, true);
    auto loss = [&] { return triplet_batch_loss(m, batch, margin, false); };
    for (auto* tower : {&m.query_tower(), &m.item_tower()}) {
      const auto params = tower->parameters();
      const auto r = nn::grad_check<double>(params, loss);
      EXPECT_LT(r.max_relative_error, 1e-4) << r.worst_block;
    }
    ++checked;
  }
  EXPECT_EQ(checked, 3);
}

TEST(TrainDsr, SingleTripletLossDecreases) {
  std::mt19937_64 rng(8);
  const auto one = random_triplets(rng, 1);
  DsrTrainConfig cfg;
  cfg.arch = small_dsr_arch();
  cfg.epochs = 100;
  cfg.batch_size = 1;
  cfg.adam.lr = 0.05;
  cfg.margin = 0.5;
  DsrTrainResult r = train_dsr(one, cfg);
  ASSERT_EQ(r.history.size(), 100u);
  EXPECT_EQ(r.steps, 100);
  TwoTowerModel initial(cfg.arch);
  initial.initialize(cfg.seed);
  const double before = triplet_batch_loss(initial, one, cfg.margin, false);
  EXPECT_DOUBLE_EQ(r.history.front(), before);
  EXPECT_LT(triplet_batch_loss(r.model, one, cfg.margin, false), before);
}

TEST(TrainDsr, SameSeedBitIdenticalCheckpoints) {
  std::mt19937_64 rng(9);
  const auto data = random_triplets(rng, 50);
  DsrTrainConfig cfg;
  cfg.arch = small_dsr_arch();
  cfg.epochs = 2;
  cfg.batch_size = 8;
  const auto a = train_dsr(data, cfg);
  const auto b = train_dsr(data, cfg);
  EXPECT_EQ(a.history, b.history);
  EXPECT_EQ(encode_dsr_checkpoint(a.model), encode_dsr_checkpoint(b.model));
  cfg.seed += 1;
  EXPECT_NE(encode_dsr_checkpoint(train_dsr(data, cfg).model), encode_dsr_checkpoint(a.model));
}

TEST(TrainDsr, LargerMarginLargerInitialLoss) {
  std::mt19937_64 rng(10);
  const auto data = random_triplets(rng, 400);
  TwoTowerModel m = fresh_model(11);
  const double zero = triplet_batch_loss(m, data, 0.0, false);
  const double half = triplet_batch_loss(m, data, 0.5, false);
  EXPECT_LT(zero, half);
  std::size_t active = 0;
  for (const auto& t : data) active += triplet_batch_loss(m, {&t, 1}, 0.0, false) > 0;
  EXPECT_NEAR(static_cast<double>(active) / 400.0, 0.5, 0.1);
}

TEST(TrainDsr, RejectsBadInput) {
  DsrTrainConfig cfg;
  cfg.arch = small_dsr_arch();
  try {
    train_dsr({}, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig);
  }
  std::mt19937_64 rng(1);
  const auto data = random_triplets(rng, 2);
  cfg.margin = -0.1;
  EXPECT_THROW(train_dsr(data, cfg), Error);
}

}  // namespace
}  // namespace semstack
