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

#include "semstack/dsr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "semstack/status.hpp"

namespace semstack {

nn::TowerSpec DsrArchitecture::query_spec() const {
  return nn::TowerSpec{{query_buckets}, embedding_dim, 0, widths, true};
}

nn::TowerSpec DsrArchitecture::item_spec() const {
  return nn::TowerSpec{{item_buckets}, embedding_dim, item_numeric_dim, widths, true};
}

TwoTowerModel::TwoTowerModel(const DsrArchitecture& arch)
    : query_(arch.query_spec()), item_(arch.item_spec()) {}

TwoTowerModel::TwoTowerModel(nn::Tower<double> query, nn::Tower<double> item)
    : query_(std::move(query)), item_(std::move(item)) {
  require(query_.spec().normalize_output && item_.spec().normalize_output, ErrorCode::kValidation,
          "two-tower model: both towers must L2-normalize their output");
  require(query_.spec().output_dim() == item_.spec().output_dim(), ErrorCode::kValidation,
          "two-tower model: query and item towers disagree on output dimension");
}

void TwoTowerModel::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  query_.initialize(rng);
  item_.initialize(rng);
}

nn::TowerInput query_tower_input(const QueryFeatures& q) {
  return nn::TowerInput{{std::span<const std::uint32_t>(q.tokens.ids)}, Eigen::VectorXd()};
}

nn::TowerInput item_tower_input(const ItemFeatures& s) {
  return nn::TowerInput{{std::span<const std::uint32_t>(s.tokens.ids)}, s.numeric.values};
}

Eigen::VectorXd query_embed(const TwoTowerModel& model, const QueryFeatures& q) {
  return model.query_tower().infer(query_tower_input(q));
}

Eigen::VectorXd item_embed(const TwoTowerModel& model, const ItemFeatures& s) {
  return model.item_tower().infer(item_tower_input(s));
}

double triplet_hinge_loss(const Eigen::Ref<const Eigen::VectorXd>& qv,
                          const Eigen::Ref<const Eigen::VectorXd>& pv,
                          const Eigen::Ref<const Eigen::VectorXd>& nv, double margin) {
  return std::max(0.0, margin - (qv.dot(pv) - qv.dot(nv)));
}

namespace {

double batch_loss(TwoTowerModel& model, std::span<const TripletExample* const> batch,
                  double margin, bool accumulate_grads) {
  std::vector<nn::TowerInput> queries, positives, negatives;
  queries.reserve(batch.size());
  positives.reserve(batch.size());
  negatives.reserve(batch.size());
  for (const auto* t : batch) {
    queries.push_back(query_tower_input(t->query));
    positives.push_back(item_tower_input(t->positive));
    negatives.push_back(item_tower_input(t->negative));
  }
  nn::TowerTape<double> tq, tp, tn;
  auto want = [&](nn::TowerTape<double>* t) { return accumulate_grads ? t : nullptr; };
  const Eigen::MatrixXd q = model.query_tower().forward(queries, want(&tq));
  const Eigen::MatrixXd p = model.item_tower().forward(positives, want(&tp));
  const Eigen::MatrixXd n = model.item_tower().forward(negatives, want(&tn));

  const Eigen::Index b = q.cols();
  Eigen::MatrixXd dq = Eigen::MatrixXd::Zero(q.rows(), b);
  Eigen::MatrixXd dp = Eigen::MatrixXd::Zero(q.rows(), b);
  Eigen::MatrixXd dn = Eigen::MatrixXd::Zero(q.rows(), b);
  double total = 0;
  for (Eigen::Index j = 0; j < b; ++j) {
    const double slack = margin - (q.col(j).dot(p.col(j)) - q.col(j).dot(n.col(j)));
    if (slack > 0) {
      total += slack;
      dq.col(j) = n.col(j) - p.col(j);
      dp.col(j) = -q.col(j);
      dn.col(j) = q.col(j);
    }
  }
  if (accumulate_grads) {
    model.query_tower().backward(tq, dq);
    model.item_tower().backward(tp, dp);
    model.item_tower().backward(tn, dn);
  }
  return total;
}

}  // namespace

double triplet_batch_loss(TwoTowerModel& model, std::span<const TripletExample> batch,
                          double margin, bool accumulate_grads) {
  std::vector<const TripletExample*> ptrs;
  ptrs.reserve(batch.size());
  for (const auto& t : batch) ptrs.push_back(&t);
  return batch_loss(model, ptrs, margin, accumulate_grads);
}

DsrTrainResult train_dsr(std::span<const TripletExample> triplets, const DsrTrainConfig& config) {
  require(!triplets.empty(), ErrorCode::kConfig, "train_dsr: empty triplet set");
  require(config.margin >= 0, ErrorCode::kConfig, "train_dsr: margin must be >= 0");
  require(config.batch_size >= 1, ErrorCode::kConfig, "train_dsr: batch_size must be >= 1");

  DsrTrainResult result{TwoTowerModel(config.arch), {}, 0};
  auto& model = result.model;
  model.initialize(config.seed);
  nn::Adam<double> adam({&model.query_tower(), &model.item_tower()}, config.adam);

  std::mt19937_64 rng(config.seed ^ 0xD5A61266F0C9392CULL);
  std::vector<std::size_t> order(triplets.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<const TripletExample*> batch;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(&triplets[order[i]]);
      model.query_tower().zero_grad();
      model.item_tower().zero_grad();
      const double loss = batch_loss(model, batch, config.margin, true);
      if (!std::isfinite(loss)) {
        throw Error(ErrorCode::kNumeric, "train_dsr: non-finite loss at epoch " +
                                             std::to_string(epoch) + ", batch starting at " +
                                             std::to_string(start));
      }
      epoch_loss += loss;
      adam.step();
    }
    result.history.push_back(epoch_loss / static_cast<double>(triplets.size()));
  }
  result.steps = adam.steps();
  return result;
}

}  // namespace semstack
