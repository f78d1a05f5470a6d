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

#ifndef SEMSTACK_DSR_HPP_
#define SEMSTACK_DSR_HPP_

// Two-tower semantic retrieval: a query tower and an item tower, each an
// embedding bag + ReLU stack + L2 normalization, trained jointly with a
// margin hinge loss over (query, positive item, negative item) triplets.

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "semstack/datagen.hpp"
#include "semstack/features.hpp"
#include "semstack/nn.hpp"

namespace semstack {

struct DsrArchitecture {
  std::uint32_t query_buckets = 1u << 16;
  std::uint32_t item_buckets = 1u << 16;
  std::uint32_t embedding_dim = 64;
  std::uint32_t item_numeric_dim = 4;
  // Hidden ReLU widths followed by the linear output width d.
  std::vector<std::uint32_t> widths = {256, 128, 64};

  nn::TowerSpec query_spec() const;
  nn::TowerSpec item_spec() const;
};

class TwoTowerModel {
 public:
  TwoTowerModel() = default;
  explicit TwoTowerModel(const DsrArchitecture& arch);
  // Adopts existing towers (e.g. from a checkpoint) after checking that both
  // normalize and agree on the output dimension.
  TwoTowerModel(nn::Tower<double> query, nn::Tower<double> item);

  void initialize(std::uint64_t seed);

  nn::Tower<double>& query_tower() { return query_; }
  const nn::Tower<double>& query_tower() const { return query_; }
  nn::Tower<double>& item_tower() { return item_; }
  const nn::Tower<double>& item_tower() const { return item_; }
  std::uint32_t output_dim() const { return query_.spec().output_dim(); }

 private:
  nn::Tower<double> query_;
  nn::Tower<double> item_;
};

nn::TowerInput query_tower_input(const QueryFeatures& q);
nn::TowerInput item_tower_input(const ItemFeatures& s);

Eigen::VectorXd query_embed(const TwoTowerModel& model, const QueryFeatures& q);
Eigen::VectorXd item_embed(const TwoTowerModel& model, const ItemFeatures& s);

// max(0, margin - (q.p - q.n))
double triplet_hinge_loss(const Eigen::Ref<const Eigen::VectorXd>& qv,
                          const Eigen::Ref<const Eigen::VectorXd>& pv,
                          const Eigen::Ref<const Eigen::VectorXd>& nv, double margin);

// Summed hinge loss over a batch. With `accumulate_grads`, gradients are added
// to both towers (the item tower receives contributions from positives and
// negatives).
double triplet_batch_loss(TwoTowerModel& model, std::span<const TripletExample> batch,
                          double margin, bool accumulate_grads);

struct DsrTrainConfig {
  double margin = 0.1;
  std::size_t epochs = 5;
  std::size_t batch_size = 256;
  nn::AdamHyper adam;
  std::uint64_t seed = 17;
  DsrArchitecture arch;
};

struct DsrTrainResult {
  TwoTowerModel model;
  std::vector<double> history;  // mean per-triplet loss of each epoch
  std::int64_t steps = 0;
};

DsrTrainResult train_dsr(std::span<const TripletExample> triplets, const DsrTrainConfig& config);

}  // namespace semstack

#endif  // SEMSTACK_DSR_HPP_
