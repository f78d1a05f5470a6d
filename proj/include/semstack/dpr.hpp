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

#ifndef SEMSTACK_DPR_HPP_
#define SEMSTACK_DPR_HPP_

// Siamese pairwise re-ranker. A single tower maps (user, query, item) to a
// logit; training compares the logits of two items under the same query with
// a binary cross-entropy on their difference, and serving scores each item
// with one tower pass.

#include <cstdint>
#include <span>
#include <vector>

#include "semstack/datagen.hpp"
#include "semstack/features.hpp"
#include "semstack/nn.hpp"

namespace semstack {

inline constexpr std::size_t kDefaultRerankLimit = 100;

struct DprArchitecture {
  std::uint32_t query_buckets = 1u << 16;
  std::uint32_t item_buckets = 1u << 16;
  std::uint32_t user_buckets = 1u << 16;
  std::uint32_t embedding_dim = 32;
  std::uint32_t item_numeric_dim = 4;
  std::uint32_t user_numeric_dim = 2;
  // Exactly three ReLU layers; a linear layer to the scalar logit follows.
  std::vector<std::uint32_t> relu_widths = {256, 64, 16};

  nn::TowerSpec spec() const;
};

class PairwiseModel {
 public:
  PairwiseModel() = default;
  explicit PairwiseModel(const DprArchitecture& arch);
  // Adopts a tower after checking the 3-ReLU + scalar-logit topology.
  explicit PairwiseModel(nn::Tower<double> tower);

  void initialize(std::uint64_t seed);

  nn::Tower<double>& tower() { return tower_; }
  const nn::Tower<double>& tower() const { return tower_; }

 private:
  nn::Tower<double> tower_;
};

// Field order is query tokens, item tokens, user action tokens; the numeric
// block is item numeric followed by user numeric.
nn::TowerInput pairwise_tower_input(const UserContext& user, const QueryFeatures& query,
                                    const ItemFeatures& item);

double tower_logit(const PairwiseModel& model, const UserContext& user,
                   const QueryFeatures& query, const ItemFeatures& item);

// Cross-entropy of sigmoid(logit_a - logit_b) against `label`, stable for
// large |logit_a - logit_b|.
double pairwise_loss(double logit_a, double logit_b, int label);

// Mean pairwise loss over the batch; with `accumulate_grads` both tower passes
// add their gradients to the shared parameters.
double pair_batch_loss(PairwiseModel& model, std::span<const PairExample> batch,
                       bool accumulate_grads);

struct DprTrainConfig {
  // One slow pass generalizes best; more passes memorize session winners.
  std::size_t epochs = 1;
  std::size_t batch_size = 256;
  nn::AdamHyper adam{3e-5};
  std::uint64_t seed = 29;
  DprArchitecture arch;
};

struct DprTrainResult {
  PairwiseModel model;
  std::vector<double> history;  // mean pair loss of each epoch
  std::int64_t steps = 0;
};

DprTrainResult train_dpr(std::span<const PairExample> pairs, const DprTrainConfig& config);

struct RerankRequest {
  UserContext user;
  QueryFeatures query;
  std::vector<ItemFeatures> items;
};

struct RankedItem {
  std::uint64_t item_id = 0;
  double score = 0;
};

struct RerankResult {
  std::vector<RankedItem> ranked;  // descending score, ties by ascending item_id
  std::size_t tower_evaluations = 0;
};

RerankResult rerank(const PairwiseModel& model, const RerankRequest& request,
                    std::size_t max_items = kDefaultRerankLimit);

}  // namespace semstack

#endif  // SEMSTACK_DPR_HPP_
