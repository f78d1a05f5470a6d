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

#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "semstack/nn.hpp"
#include "test_util.hpp"

namespace semstack::nn {
namespace {

using semstack::testing::random_normal;
using semstack::testing::random_tokens;

TEST(EmbedSumPool, Examples) {
  EmbeddingTable<double> t(4, 2);
  t.weights.row(1) << 1, 2;
  t.weights.row(2) << 3, -1;
  const std::vector<std::uint32_t> both = {1, 2};
  EXPECT_EQ(embed_sum_pool(t, both), Eigen::Vector2d(4, 1));
  EXPECT_EQ(embed_sum_pool(t, std::span<const std::uint32_t>()), Eigen::Vector2d(0, 0));
  const std::vector<std::uint32_t> twice = {1, 1};
  EXPECT_EQ(embed_sum_pool(t, twice), Eigen::Vector2d(2, 4));
}

TEST(EmbedSumPool, OutOfRange) {
  EmbeddingTable<double> t(4, 2);
  const std::vector<std::uint32_t> bad = {4};
  try {
    embed_sum_pool(t, bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kOutOfRange);
  }
}

TEST(EmbedSumPool, LinearInTable) {
  std::mt19937_64 rng(5);
  EmbeddingTable<double> a(32, 6), b(32, 6), mix(32, 6);
  for (Eigen::Index r = 0; r < 32; ++r) {
    a.weights.row(r) = random_normal(rng, 6).transpose();
    b.weights.row(r) = random_normal(rng, 6).transpose();
  }
  const double alpha = 0.7, beta = -1.3;
  mix.weights = alpha * a.weights + beta * b.weights;
  for (int trial = 0; trial < 100; ++trial) {
    const auto ids = random_tokens(rng, 32, 0, 12).ids;
    const Eigen::VectorXd lhs = embed_sum_pool(mix, ids);
    const Eigen::VectorXd rhs = alpha * embed_sum_pool(a, ids) + beta * embed_sum_pool(b, ids);
    EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(DenseForward, Examples) {
  DenseLayer<double> id(2, 2, Activation::kRelu);
  id.weight.setIdentity();
  EXPECT_EQ(dense_forward<double>(id, Eigen::Vector2d(-1, 2)), Eigen::Vector2d(0, 2));

  DenseLayer<double> bias_only(3, 2, Activation::kIdentity);
  bias_only.bias << 0.25, -4;
  EXPECT_EQ(dense_forward<double>(bias_only, Eigen::Vector3d(9, 9, 9)), Eigen::Vector2d(0.25, -4));

  DenseLayer<double> row(2, 1, Activation::kIdentity);
  row.weight << 1, 1;
  row.bias << 0.5;
  EXPECT_EQ(dense_forward<double>(row, Eigen::Vector2d(1, 2))[0], 3.5);
}

TEST(DenseForward, ShapeMismatch) {
  DenseLayer<double> layer(3, 2, Activation::kRelu);
  try {
    dense_forward<double>(layer, Eigen::Vector2d(1, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShape);
  }
}

TEST(L2Normalize, Examples) {
  bool flag = true;
  const Eigen::VectorXd v = l2_normalize<double>(Eigen::Vector2d(3, 4), &flag);
  EXPECT_FALSE(flag);
  EXPECT_NEAR(v[0], 0.6, 1e-15);
  EXPECT_NEAR(v[1], 0.8, 1e-15);

  const Eigen::VectorXd u = Eigen::Vector3d(2, -1, 2) / 3.0;
  EXPECT_LT((l2_normalize<double>(u) - u).cwiseAbs().maxCoeff(), 4e-16);

  const Eigen::VectorXd e1 = l2_normalize<double>(Eigen::Vector2d(0, 0), &flag);
  EXPECT_TRUE(flag);
  EXPECT_EQ(e1, Eigen::Vector2d(1, 0));
}

TEST(L2Normalize, UnitNormOnRandomInputs) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> scale(-12, 12);
  for (int i = 0; i < 1000; ++i) {
    const Eigen::VectorXd v = random_normal(rng, 16) * std::pow(10.0, scale(rng));
    EXPECT_NEAR(l2_normalize<double>(v).norm(), 1.0, 1e-6);
  }
}

// Scalar objective sum_j <w_j, tower(x_j)> with fixed random readout weights.
struct Probe {
  std::vector<TowerInput> batch;
  std::vector<std::vector<std::uint32_t>> storage;
  Eigen::MatrixXd readout;
};

Probe make_probe(std::mt19937_64& rng, const TowerSpec& spec, int n) {
  Probe p;
  p.storage.reserve(static_cast<std::size_t>(n) * spec.field_buckets.size());
  for (int j = 0; j < n; ++j) {
    TowerInput in;
    for (auto buckets : spec.field_buckets) {
      p.storage.push_back(random_tokens(rng, buckets, 1, 4).ids);
      in.fields.emplace_back(p.storage.back());
    }
    in.numeric = random_normal(rng, spec.numeric_dim);
    p.batch.push_back(std::move(in));
  }
  p.readout = random_normal(rng, spec.output_dim() * n).reshaped(spec.output_dim(), n);
  return p;
}

double probe_loss(const Tower<double>& t, const Probe& p) {
  return t.forward(p.batch, nullptr).cwiseProduct(p.readout).sum();
}

void probe_backward(Tower<double>& t, const Probe& p, double* min_kink = nullptr) {
  t.zero_grad();
  TowerTape<double> tape;
  t.forward(p.batch, &tape);
  if (min_kink) *min_kink = tape.min_abs_relu_preactivation();
  t.backward(tape, p.readout);
}

TEST(Backward, LinearChainClosedForm) {
  Tower<double> t(TowerSpec{{}, 0, 3, {2}, false});
  std::mt19937_64 rng(1);
  t.initialize(rng);
  const Eigen::Vector3d x(0.5, -1.0, 2.0);
  const Eigen::Vector2d y(0.3, -0.7);
  std::vector<TowerInput> batch(1);
  batch[0].numeric = x;
  TowerTape<double> tape;
  const Eigen::MatrixXd out = t.forward(batch, &tape);
  const auto& w = t.layers()[0].weight;
  const Eigen::MatrixXd upstream = 2.0 * (out.col(0) - y);
  const Eigen::MatrixXd dx = t.backward(tape, upstream);
  const Eigen::VectorXd expected = 2.0 * w.transpose() * (w * x - y);
  EXPECT_LT((dx.col(0) - expected).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((t.layers()[0].grad_weight - upstream * x.transpose()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
  const TowerSpec spec{{32, 16}, 4, 2, {8, 3}, true};
  Tower<double> t(spec);
  std::mt19937_64 rng(2);
  t.initialize(rng);
  Probe p = make_probe(rng, spec, 5);
  p.readout.setZero();
  probe_backward(t, p);
  for (const auto& block : t.parameters()) {
    for (Eigen::Index i = 0; i < block.size; ++i) ASSERT_EQ(block.grad[i], 0.0) << block.name;
  }
}

TEST(Backward, RequiresRecordedForward) {
  Tower<double> t(TowerSpec{{}, 0, 2, {2}, false});
  TowerTape<double> empty;
  try {
    t.backward(empty, Eigen::MatrixXd::Zero(2, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kState);
  }
}

TEST(GradCheck, LinearModelIsExact) {
  Tower<double> t(TowerSpec{{}, 0, 4, {3}, false});
  std::mt19937_64 rng(4);
  t.initialize(rng);
  const Probe p = make_probe(rng, t.spec(), 6);
  probe_backward(t, p);
  const auto params = t.parameters();
  const auto r = grad_check<double>(params, [&] { return probe_loss(t, p); });
  EXPECT_LT(r.max_relative_error, 1e-8);
  EXPECT_EQ(r.checked, 4u * 3 + 3);
}

TEST(GradCheck, TwoLayerReluTowerAwayFromKinks) {
  const TowerSpec spec{{64}, 8, 3, {8, 8}, true};
  std::mt19937_64 rng(6);
  int checked = 0;
  for (int attempt = 0; attempt < 50 && checked < 3; ++attempt) {
    Tower<double> t(spec);
    t.initialize(rng);
    const Probe p = make_probe(rng, spec, 4);
    double kink = 0;
    probe_backward(t, p, &kink);
    if (kink < 1e-3) continue;
    const auto params = t.parameters();
    const auto r = grad_check<double>(params, [&] { return probe_loss(t, p); });
    EXPECT_LT(r.max_relative_error, 1e-4) << r.worst_block << "[" << r.worst_index << "]";
    ++checked;
  }
  EXPECT_EQ(checked, 3);
}

TEST(GradCheck, DetectsCorruptedGradient) {
  const TowerSpec spec{{}, 0, 4, {8, 2}, false};
  Tower<double> t(spec);
  std::mt19937_64 rng(9);
  t.initialize(rng);
  const Probe p = make_probe(rng, spec, 4);
  probe_backward(t, p);
  t.layers()[1].grad_weight *= 1.1;
  const auto params = t.parameters();
  const auto r = grad_check<double>(params, [&] { return probe_loss(t, p); });
  EXPECT_GT(r.max_relative_error, 1e-2);
}

TEST(Adam, FirstStepOracle) {
  double theta = 0.0, g = 1.0, m = 0.0, v = 0.0;
  adam_update<double>({&theta, 1}, {&g, 1}, {&m, 1}, {&v, 1}, AdamHyper{}, 1);
  EXPECT_NEAR(theta, -0.0009999999900000003, 1e-18);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  const TowerSpec spec{{16}, 4, 2, {4, 2}, false};
  Tower<double> t(spec);
  std::mt19937_64 rng(10);
  t.initialize(rng);
  const Tower<double> before = t;
  t.zero_grad();
  for (auto& layer : t.layers()) {
    layer.grad_weight.setZero();
    layer.grad_bias.setZero();
  }
  Adam<double> adam({&t}, AdamHyper{});
  adam.step();
  for (std::size_t l = 0; l < t.layers().size(); ++l) {
    EXPECT_EQ(t.layers()[l].weight, before.layers()[l].weight);
    EXPECT_EQ(t.layers()[l].bias, before.layers()[l].bias);
  }
  EXPECT_EQ(t.tables()[0].weights, before.tables()[0].weights);
}

TEST(Adam, UntouchedEmbeddingRowsBitIdentical) {
  const TowerSpec spec{{64}, 4, 0, {4, 2}, false};
  Tower<double> t(spec);
  std::mt19937_64 rng(12);
  t.initialize(rng);
  const auto before = t.tables()[0].weights;
  std::vector<std::uint32_t> ids = {3, 7, 7};
  std::vector<TowerInput> batch(1);
  batch[0].fields = {ids};
  batch[0].numeric = Eigen::VectorXd(0);
  TowerTape<double> tape;
  t.forward(batch, &tape);
  t.backward(tape, Eigen::MatrixXd::Ones(2, 1));
  Adam<double> adam({&t}, AdamHyper{});
  adam.step();
  const auto& after = t.tables()[0].weights;
  for (Eigen::Index r = 0; r < 64; ++r) {
    const bool touched = r == 3 || r == 7;
    const bool same = std::memcmp(after.row(r).data(), before.row(r).data(), 4 * sizeof(double)) == 0;
    EXPECT_EQ(same, !touched) << "row " << r;
  }
}

TEST(Adam, RejectsNonFiniteGradient) {
  Tower<double> t(TowerSpec{{}, 0, 2, {2}, false});
  std::mt19937_64 rng(13);
  t.initialize(rng);
  const auto before = t.layers()[0].weight;
  t.layers()[0].grad_weight(0, 0) = std::nan("");
  Adam<double> adam({&t}, AdamHyper{});
  try {
    adam.step();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNumeric);
  }
  EXPECT_EQ(t.layers()[0].weight, before);
  EXPECT_EQ(adam.steps(), 0);
}

TEST(Adam, DeterministicSteps) {
  const TowerSpec spec{{32}, 4, 2, {6, 3}, true};
  auto run = [&] {
    std::mt19937_64 rng(14);
    Tower<double> t(spec);
    t.initialize(rng);
    const Probe p = make_probe(rng, spec, 8);
    Adam<double> adam({&t}, AdamHyper{});
    for (int s = 0; s < 5; ++s) {
      probe_backward(t, p);
      adam.step();
    }
    return t;
  };
  const Tower<double> a = run(), b = run();
  for (std::size_t l = 0; l < a.layers().size(); ++l) {
    EXPECT_EQ(a.layers()[l].weight, b.layers()[l].weight);
  }
  EXPECT_EQ(a.tables()[0].weights, b.tables()[0].weights);
}

}  // namespace
}  // namespace semstack::nn
