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

#include "semstack/dpr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "semstack/status.hpp"

namespace semstack {
namespace {

// log(1 + exp(x)) without overflow.
double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double batch_loss(PairwiseModel& model, std::span<const PairExample* const> batch,
                  bool accumulate_grads) {
  std::vector<nn::TowerInput> a_inputs, b_inputs;
  a_inputs.reserve(batch.size());
  b_inputs.reserve(batch.size());
  for (const auto* p : batch) {
    a_inputs.push_back(pairwise_tower_input(p->user, p->query, p->item_a));
    b_inputs.push_back(pairwise_tower_input(p->user, p->query, p->item_b));
  }
  nn::TowerTape<double> ta, tb;
  const Eigen::MatrixXd la = model.tower().forward(a_inputs, accumulate_grads ? &ta : nullptr);
  const Eigen::MatrixXd lb = model.tower().forward(b_inputs, accumulate_grads ? &tb : nullptr);
  const auto n = static_cast<Eigen::Index>(batch.size());
  const double scale = 1.0 / static_cast<double>(n);
  Eigen::MatrixXd da(1, n), db(1, n);
  double total = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const int y = batch[static_cast<std::size_t>(j)]->label;
    total += pairwise_loss(la(0, j), lb(0, j), y);
    const double g = (logistic(la(0, j) - lb(0, j)) - y) * scale;
    da(0, j) = g;
    db(0, j) = -g;
  }
  if (accumulate_grads) {
    model.tower().backward(ta, da);
    model.tower().backward(tb, db);
  }
  return total * scale;
}

}  // namespace

nn::TowerSpec DprArchitecture::spec() const {
  std::vector<std::uint32_t> widths = relu_widths;
  widths.push_back(1);
  return nn::TowerSpec{{query_buckets, item_buckets, user_buckets},
                       embedding_dim,
                       item_numeric_dim + user_numeric_dim,
                       widths,
                       false};
}

PairwiseModel::PairwiseModel(const DprArchitecture& arch) : tower_(arch.spec()) {
  require(arch.relu_widths.size() == 3, ErrorCode::kConfig,
          "pairwise model: the tower has exactly three ReLU layers");
}

PairwiseModel::PairwiseModel(nn::Tower<double> tower) : tower_(std::move(tower)) {
  const auto& spec = tower_.spec();
  require(spec.field_buckets.size() == 3 && spec.widths.size() == 4 && spec.output_dim() == 1 &&
              !spec.normalize_output,
          ErrorCode::kValidation,
          "pairwise model: expected 3 token fields, 3 ReLU layers and a scalar logit");
}

void PairwiseModel::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  tower_.initialize(rng);
}

nn::TowerInput pairwise_tower_input(const UserContext& user, const QueryFeatures& query,
                                    const ItemFeatures& item) {
  nn::TowerInput in;
  in.fields = {std::span<const std::uint32_t>(query.tokens.ids),
               std::span<const std::uint32_t>(item.tokens.ids),
               std::span<const std::uint32_t>(user.action_tokens.ids)};
  in.numeric.resize(item.numeric.values.size() + user.numeric.values.size());
  in.numeric << item.numeric.values, user.numeric.values;
  return in;
}

double tower_logit(const PairwiseModel& model, const UserContext& user,
                   const QueryFeatures& query, const ItemFeatures& item) {
  return model.tower().infer(pairwise_tower_input(user, query, item))[0];
}

double pairwise_loss(double logit_a, double logit_b, int label) {
  const double delta = logit_a - logit_b;
  // -ln sigmoid(d) = softplus(-d);  -ln(1 - sigmoid(d)) = softplus(d)
  return label ? softplus(-delta) : softplus(delta);
}

double pair_batch_loss(PairwiseModel& model, std::span<const PairExample> batch,
                       bool accumulate_grads) {
  require(!batch.empty(), ErrorCode::kConfig, "pair_batch_loss: empty batch");
  std::vector<const PairExample*> ptrs;
  ptrs.reserve(batch.size());
  for (const auto& p : batch) ptrs.push_back(&p);
  return batch_loss(model, ptrs, accumulate_grads);
}

DprTrainResult train_dpr(std::span<const PairExample> pairs, const DprTrainConfig& config) {
  require(!pairs.empty(), ErrorCode::kConfig, "train_dpr: empty pair set");
  require(config.batch_size >= 1, ErrorCode::kConfig, "train_dpr: batch_size must be >= 1");

  DprTrainResult result{PairwiseModel(config.arch), {}, 0};
  auto& model = result.model;
  model.initialize(config.seed);
  nn::Adam<double> adam({&model.tower()}, config.adam);

  std::mt19937_64 rng(config.seed ^ 0x8CB92BA72F3D8DD7ULL);
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<const PairExample*> batch;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(&pairs[order[i]]);
      model.tower().zero_grad();
      const double loss = batch_loss(model, batch, true);
      if (!std::isfinite(loss)) {
        throw Error(ErrorCode::kNumeric, "train_dpr: non-finite loss at epoch " +
                                             std::to_string(epoch) + ", batch starting at " +
                                             std::to_string(start));
      }
      epoch_loss += loss * static_cast<double>(end - start);
      adam.step();
    }
    result.history.push_back(epoch_loss / static_cast<double>(pairs.size()));
  }
  result.steps = adam.steps();
  return result;
}

RerankResult rerank(const PairwiseModel& model, const RerankRequest& request,
                    std::size_t max_items) {
  require(request.items.size() <= max_items, ErrorCode::kValidation,
          "rerank: " + std::to_string(request.items.size()) + " items exceeds the limit of " +
              std::to_string(max_items));
  RerankResult result;
  result.ranked.reserve(request.items.size());
  for (const auto& item : request.items) {
    result.ranked.push_back({item.item_id, tower_logit(model, request.user, request.query, item)});
    ++result.tower_evaluations;
  }
  std::stable_sort(result.ranked.begin(), result.ranked.end(),
                   [](const RankedItem& x, const RankedItem& y) {
                     if (x.score != y.score) return x.score > y.score;
                     return x.item_id < y.item_id;
                   });
  return result;
}

}  // namespace semstack
