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

#ifndef SEMSTACK_NN_HPP_
#define SEMSTACK_NN_HPP_

// Minimal neural toolkit for the two tower topologies used here: sum-pooled
// embedding bags feeding a dense stack, optionally L2-normalized at the output.
// Everything is templated on the scalar so training and gradient checks run in
// double while the same code can be instantiated in float.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "semstack/status.hpp"

namespace semstack::nn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

inline constexpr double kNormEpsilon = 1e-12;

enum class Activation : std::uint8_t { kIdentity = 0, kRelu = 1 };

template <typename Scalar>
struct EmbeddingTable {
  RowMatrix<Scalar> weights;
  // Gradient storage is dense but only rows listed in `touched` are nonzero.
  RowMatrix<Scalar> grad;
  std::vector<std::uint32_t> touched;
  std::vector<std::uint8_t> is_touched;

  EmbeddingTable() = default;
  EmbeddingTable(Eigen::Index rows, Eigen::Index dim)
      : weights(RowMatrix<Scalar>::Zero(rows, dim)) {}

  Eigen::Index rows() const { return weights.rows(); }
  Eigen::Index dim() const { return weights.cols(); }

  void ensure_grad() {
    if (grad.rows() != weights.rows() || grad.cols() != weights.cols()) {
      grad = RowMatrix<Scalar>::Zero(weights.rows(), weights.cols());
      is_touched.assign(static_cast<std::size_t>(weights.rows()), 0);
      touched.clear();
    }
  }

  template <typename Derived>
  void accumulate(std::uint32_t row, const Eigen::MatrixBase<Derived>& g) {
    ensure_grad();
    grad.row(row) += g.transpose();
    if (!is_touched[row]) {
      is_touched[row] = 1;
      touched.push_back(row);
    }
  }

  void zero_grad() {
    for (std::uint32_t r : touched) {
      grad.row(r).setZero();
      is_touched[r] = 0;
    }
    touched.clear();
  }
};

template <typename Scalar>
void check_ids(const EmbeddingTable<Scalar>& table, std::span<const std::uint32_t> ids) {
  for (std::uint32_t id : ids) {
    if (static_cast<Eigen::Index>(id) >= table.rows()) {
      throw Error(ErrorCode::kOutOfRange, "embedding id " + std::to_string(id) +
                                              " outside table of " +
                                              std::to_string(table.rows()) + " rows");
    }
  }
}

// Sum of the referenced rows; repeats count each time, empty ids give zeros.
template <typename Scalar>
Vector<Scalar> embed_sum_pool(const EmbeddingTable<Scalar>& table,
                              std::span<const std::uint32_t> ids) {
  check_ids(table, ids);
  Vector<Scalar> out = Vector<Scalar>::Zero(table.dim());
  for (std::uint32_t id : ids) out += table.weights.row(id).transpose();
  return out;
}

template <typename Scalar>
struct DenseLayer {
  Matrix<Scalar> weight;  // out x in
  Vector<Scalar> bias;
  Activation activation = Activation::kRelu;
  Matrix<Scalar> grad_weight;
  Vector<Scalar> grad_bias;

  DenseLayer() = default;
  DenseLayer(Eigen::Index in, Eigen::Index out, Activation act)
      : weight(Matrix<Scalar>::Zero(out, in)),
        bias(Vector<Scalar>::Zero(out)),
        activation(act),
        grad_weight(Matrix<Scalar>::Zero(out, in)),
        grad_bias(Vector<Scalar>::Zero(out)) {}

  Eigen::Index in_dim() const { return weight.cols(); }
  Eigen::Index out_dim() const { return weight.rows(); }
};

template <typename Derived>
auto relu(const Eigen::MatrixBase<Derived>& x) {
  return x.cwiseMax(typename Derived::Scalar(0));
}

template <typename Scalar>
Vector<Scalar> dense_forward(const DenseLayer<Scalar>& layer,
                             const Eigen::Ref<const Vector<Scalar>>& x) {
  require(x.size() == layer.in_dim(), ErrorCode::kShape,
          "dense layer expects input of " + std::to_string(layer.in_dim()) + ", got " +
              std::to_string(x.size()));
  Vector<Scalar> z = layer.weight * x + layer.bias;
  if (layer.activation == Activation::kRelu) return relu(z);
  return z;
}

// v / |v|_2. Below kNormEpsilon the result is e1 and `degenerate` is set, so a
// cold input with no tokens still produces a servable unit vector.
template <typename Scalar>
Vector<Scalar> l2_normalize(const Eigen::Ref<const Vector<Scalar>>& v,
                            bool* degenerate = nullptr) {
  const Scalar norm = v.norm();
  if (!(norm >= Scalar(kNormEpsilon))) {
    if (degenerate) *degenerate = true;
    Vector<Scalar> e1 = Vector<Scalar>::Zero(v.size());
    if (v.size() > 0) e1[0] = Scalar(1);
    return e1;
  }
  if (degenerate) *degenerate = false;
  return v / norm;
}

// Architecture of one tower: one embedding bag per token field, concatenated
// with a numeric block, then a dense stack. Every layer but the last is ReLU;
// the last is linear.
struct TowerSpec {
  std::vector<std::uint32_t> field_buckets;
  std::uint32_t embedding_dim = 0;
  std::uint32_t numeric_dim = 0;
  std::vector<std::uint32_t> widths;
  bool normalize_output = false;

  std::uint32_t input_dim() const {
    return static_cast<std::uint32_t>(field_buckets.size()) * embedding_dim + numeric_dim;
  }
  std::uint32_t output_dim() const { return widths.empty() ? 0 : widths.back(); }
  bool operator==(const TowerSpec&) const = default;
};

struct TowerInput {
  std::vector<std::span<const std::uint32_t>> fields;
  Eigen::VectorXd numeric;
};

// Activations recorded by a forward pass; backward() refuses an empty tape.
// The tape references the id spans of its inputs, which must outlive it.
template <typename Scalar>
struct TowerTape {
  bool recorded = false;
  std::vector<std::vector<std::span<const std::uint32_t>>> field_ids;
  std::vector<Matrix<Scalar>> activations;  // [0] is the tower input
  std::vector<Matrix<Scalar>> preactivations;
  Vector<Scalar> norms;
  std::vector<std::uint8_t> degenerate;
  Matrix<Scalar> output;

  double min_abs_relu_preactivation() const {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l + 1 < preactivations.size(); ++l) {
      best = std::min(best, static_cast<double>(preactivations[l].cwiseAbs().minCoeff()));
    }
    return best;
  }
};

template <typename Scalar>
struct ParamBlock {
  std::string name;
  Scalar* value = nullptr;
  Scalar* grad = nullptr;
  Eigen::Index size = 0;
};

template <typename Scalar>
class Tower {
 public:
  Tower() = default;

  explicit Tower(TowerSpec spec) : spec_(std::move(spec)) {
    require(!spec_.widths.empty(), ErrorCode::kConfig, "tower needs at least one layer");
    for (std::uint32_t buckets : spec_.field_buckets) {
      tables_.emplace_back(buckets, spec_.embedding_dim);
    }
    Eigen::Index in = spec_.input_dim();
    for (std::size_t l = 0; l < spec_.widths.size(); ++l) {
      const bool last = l + 1 == spec_.widths.size();
      layers_.emplace_back(in, spec_.widths[l], last ? Activation::kIdentity : Activation::kRelu);
      in = spec_.widths[l];
    }
  }

  // Dense weights uniform in +-sqrt(6/(in+out)), biases zero, embeddings N(0, 0.01).
  void initialize(std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 0.01);
    for (auto& table : tables_) {
      for (Eigen::Index r = 0; r < table.rows(); ++r) {
        for (Eigen::Index c = 0; c < table.dim(); ++c) {
          table.weights(r, c) = static_cast<Scalar>(normal(rng));
        }
      }
    }
    for (auto& layer : layers_) {
      const double limit = std::sqrt(6.0 / static_cast<double>(layer.in_dim() + layer.out_dim()));
      std::uniform_real_distribution<double> uniform(-limit, limit);
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
          layer.weight(r, c) = static_cast<Scalar>(uniform(rng));
        }
      }
      layer.bias.setZero();
    }
  }

  const TowerSpec& spec() const { return spec_; }
  std::vector<EmbeddingTable<Scalar>>& tables() { return tables_; }
  const std::vector<EmbeddingTable<Scalar>>& tables() const { return tables_; }
  std::vector<DenseLayer<Scalar>>& layers() { return layers_; }
  const std::vector<DenseLayer<Scalar>>& layers() const { return layers_; }

  // Columns of the result are per-example outputs. Pass a tape to enable backward().
  Matrix<Scalar> forward(std::span<const TowerInput> batch, TowerTape<Scalar>* tape) const {
    const Eigen::Index n = static_cast<Eigen::Index>(batch.size());
    Matrix<Scalar> x(spec_.input_dim(), n);
    for (Eigen::Index j = 0; j < n; ++j) x.col(j) = assemble_input(batch[j]);

    std::vector<Matrix<Scalar>> pre;
    std::vector<Matrix<Scalar>> act;
    act.push_back(std::move(x));
    for (const auto& layer : layers_) {
      Matrix<Scalar> z = layer.weight * act.back();
      z.colwise() += layer.bias;
      Matrix<Scalar> a = layer.activation == Activation::kRelu ? Matrix<Scalar>(relu(z)) : z;
      pre.push_back(std::move(z));
      act.push_back(std::move(a));
    }

    Matrix<Scalar> out = act.back();
    Vector<Scalar> norms;
    std::vector<std::uint8_t> degenerate;
    if (spec_.normalize_output) {
      norms.resize(n);
      degenerate.assign(static_cast<std::size_t>(n), 0);
      for (Eigen::Index j = 0; j < n; ++j) {
        bool flag = false;
        norms[j] = out.col(j).norm();
        out.col(j) = l2_normalize<Scalar>(out.col(j), &flag);
        degenerate[j] = flag;
      }
    }
    if (tape) {
      tape->recorded = true;
      tape->field_ids.clear();
      for (const auto& in : batch) tape->field_ids.push_back(in.fields);
      tape->activations = std::move(act);
      tape->preactivations = std::move(pre);
      tape->norms = std::move(norms);
      tape->degenerate = std::move(degenerate);
      tape->output = out;
    }
    return out;
  }

  // Single-example inference path used for serving and indexing.
  Vector<Scalar> infer(const TowerInput& input) const {
    Vector<Scalar> h = assemble_input(input);
    for (const auto& layer : layers_) h = dense_forward<Scalar>(layer, h);
    if (spec_.normalize_output) return l2_normalize<Scalar>(h);
    return h;
  }

  // Reverse pass. Accumulates parameter gradients (call zero_grad() between
  // steps) and returns the gradient with respect to the tower input.
  Matrix<Scalar> backward(const TowerTape<Scalar>& tape, const Matrix<Scalar>& d_output) {
    require(tape.recorded, ErrorCode::kState, "backward called without a recorded forward pass");
    const Eigen::Index n = tape.output.cols();
    require(d_output.rows() == tape.output.rows() && d_output.cols() == n, ErrorCode::kShape,
            "upstream gradient shape does not match the recorded output");

    Matrix<Scalar> d = d_output;
    if (spec_.normalize_output) {
      // d/dv (v/|v|) = (I - y y^T) / |v|
      for (Eigen::Index j = 0; j < n; ++j) {
        if (tape.degenerate[j]) {
          d.col(j).setZero();
          continue;
        }
        const auto y = tape.output.col(j);
        const Scalar proj = y.dot(d.col(j));
        d.col(j) = (d.col(j) - y * proj) / tape.norms[j];
      }
    }
    for (std::size_t l = layers_.size(); l-- > 0;) {
      auto& layer = layers_[l];
      if (layer.activation == Activation::kRelu) {
        d = d.cwiseProduct(
            tape.preactivations[l].unaryExpr([](Scalar z) { return z > Scalar(0) ? Scalar(1) : Scalar(0); }));
      }
      layer.grad_weight.noalias() += d * tape.activations[l].transpose();
      layer.grad_bias += d.rowwise().sum();
      d = layer.weight.transpose() * d;
    }

    const Eigen::Index e = spec_.embedding_dim;
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto& fields = tape.field_ids[static_cast<std::size_t>(j)];
      for (std::size_t f = 0; f < fields.size(); ++f) {
        const auto g = d.col(j).segment(static_cast<Eigen::Index>(f) * e, e);
        for (std::uint32_t id : fields[f]) tables_[f].accumulate(id, g);
      }
    }
    return d;
  }

  void zero_grad() {
    for (auto& table : tables_) table.zero_grad();
    for (auto& layer : layers_) {
      layer.grad_weight.setZero();
      layer.grad_bias.setZero();
    }
  }

  // Flat views over every trainable array, in checkpoint order.
  std::vector<ParamBlock<Scalar>> parameters() {
    std::vector<ParamBlock<Scalar>> out;
    for (std::size_t f = 0; f < tables_.size(); ++f) {
      auto& t = tables_[f];
      t.ensure_grad();
      out.push_back({"embedding" + std::to_string(f), t.weights.data(), t.grad.data(), t.weights.size()});
    }
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      auto& layer = layers_[l];
      out.push_back({"dense" + std::to_string(l) + ".weight", layer.weight.data(),
                     layer.grad_weight.data(), layer.weight.size()});
      out.push_back({"dense" + std::to_string(l) + ".bias", layer.bias.data(),
                     layer.grad_bias.data(), layer.bias.size()});
    }
    return out;
  }

 private:
  Vector<Scalar> assemble_input(const TowerInput& input) const {
    require(input.fields.size() == tables_.size(), ErrorCode::kShape,
            "tower expects " + std::to_string(tables_.size()) + " token fields, got " +
                std::to_string(input.fields.size()));
    require(input.numeric.size() == spec_.numeric_dim, ErrorCode::kShape,
            "tower expects " + std::to_string(spec_.numeric_dim) + " numeric features, got " +
                std::to_string(input.numeric.size()));
    Vector<Scalar> x(spec_.input_dim());
    const Eigen::Index e = spec_.embedding_dim;
    for (std::size_t f = 0; f < tables_.size(); ++f) {
      x.segment(static_cast<Eigen::Index>(f) * e, e) = embed_sum_pool(tables_[f], input.fields[f]);
    }
    x.tail(spec_.numeric_dim) = input.numeric.cast<Scalar>();
    return x;
  }

  TowerSpec spec_;
  std::vector<EmbeddingTable<Scalar>> tables_;
  std::vector<DenseLayer<Scalar>> layers_;
};

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// One bias-corrected Adam update of a contiguous block; `step` is 1-based.
template <typename Scalar>
void adam_update(std::span<Scalar> param, std::span<const Scalar> grad, std::span<Scalar> m,
                 std::span<Scalar> v, const AdamHyper& hyper, std::int64_t step) {
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  const auto n = static_cast<Eigen::Index>(param.size());
  Eigen::Map<Array> p(param.data(), n);
  Eigen::Map<const Array> g(grad.data(), n);
  Eigen::Map<Array> mm(m.data(), n);
  Eigen::Map<Array> vv(v.data(), n);
  const Scalar b1 = static_cast<Scalar>(hyper.beta1);
  const Scalar b2 = static_cast<Scalar>(hyper.beta2);
  const Scalar c1 = Scalar(1) - static_cast<Scalar>(std::pow(hyper.beta1, static_cast<double>(step)));
  const Scalar c2 = Scalar(1) - static_cast<Scalar>(std::pow(hyper.beta2, static_cast<double>(step)));
  mm = b1 * mm + (Scalar(1) - b1) * g;
  vv = b2 * vv + (Scalar(1) - b2) * g.square();
  p -= static_cast<Scalar>(hyper.lr) * (mm / c1) /
       ((vv / c2).sqrt() + static_cast<Scalar>(hyper.epsilon));
}

template <typename Scalar>
bool gradients_finite(const Tower<Scalar>& tower) {
  for (const auto& layer : tower.layers()) {
    if (!layer.grad_weight.allFinite() || !layer.grad_bias.allFinite()) return false;
  }
  for (const auto& table : tower.tables()) {
    for (std::uint32_t r : table.touched) {
      if (!table.grad.row(r).allFinite()) return false;
    }
  }
  return true;
}

// Adam over one or more towers sharing a step counter. Embedding rows are
// updated lazily: only rows touched since the last zero_grad() move.
template <typename Scalar>
class Adam {
 public:
  Adam(std::vector<Tower<Scalar>*> towers, AdamHyper hyper)
      : towers_(std::move(towers)), hyper_(hyper) {
    for (auto* tower : towers_) {
      TowerMoments moments;
      for (const auto& table : tower->tables()) {
        moments.table_m.push_back(RowMatrix<Scalar>::Zero(table.rows(), table.dim()));
        moments.table_v.push_back(RowMatrix<Scalar>::Zero(table.rows(), table.dim()));
      }
      for (const auto& layer : tower->layers()) {
        moments.weight_m.push_back(Matrix<Scalar>::Zero(layer.out_dim(), layer.in_dim()));
        moments.weight_v.push_back(Matrix<Scalar>::Zero(layer.out_dim(), layer.in_dim()));
        moments.bias_m.push_back(Vector<Scalar>::Zero(layer.out_dim()));
        moments.bias_v.push_back(Vector<Scalar>::Zero(layer.out_dim()));
      }
      moments_.push_back(std::move(moments));
    }
  }

  // Rejects the whole step, leaving every parameter untouched, if any
  // gradient is non-finite.
  void step() {
    for (auto* tower : towers_) {
      require(gradients_finite(*tower), ErrorCode::kNumeric,
              "non-finite gradient; optimizer step rejected");
    }
    ++t_;
    for (std::size_t k = 0; k < towers_.size(); ++k) {
      auto& tower = *towers_[k];
      auto& mo = moments_[k];
      for (std::size_t f = 0; f < tower.tables().size(); ++f) {
        auto& table = tower.tables()[f];
        auto touched = table.touched;
        std::sort(touched.begin(), touched.end());
        const auto d = static_cast<std::size_t>(table.dim());
        for (std::uint32_t r : touched) {
          adam_update<Scalar>({table.weights.row(r).data(), d}, {table.grad.row(r).data(), d},
                              {mo.table_m[f].row(r).data(), d}, {mo.table_v[f].row(r).data(), d},
                              hyper_, t_);
        }
      }
      for (std::size_t l = 0; l < tower.layers().size(); ++l) {
        auto& layer = tower.layers()[l];
        const auto wn = static_cast<std::size_t>(layer.weight.size());
        const auto bn = static_cast<std::size_t>(layer.bias.size());
        adam_update<Scalar>({layer.weight.data(), wn}, {layer.grad_weight.data(), wn},
                            {mo.weight_m[l].data(), wn}, {mo.weight_v[l].data(), wn}, hyper_, t_);
        adam_update<Scalar>({layer.bias.data(), bn}, {layer.grad_bias.data(), bn},
                            {mo.bias_m[l].data(), bn}, {mo.bias_v[l].data(), bn}, hyper_, t_);
      }
    }
  }

  std::int64_t steps() const { return t_; }

 private:
  struct TowerMoments {
    std::vector<RowMatrix<Scalar>> table_m, table_v;
    std::vector<Matrix<Scalar>> weight_m, weight_v;
    std::vector<Vector<Scalar>> bias_m, bias_v;
  };

  std::vector<Tower<Scalar>*> towers_;
  AdamHyper hyper_;
  std::vector<TowerMoments> moments_;
  std::int64_t t_ = 0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_block;
  Eigen::Index worst_index = -1;
  std::size_t checked = 0;
};

// Central differences over every coordinate of `params`, compared against the
// analytic gradients already stored in each block. Relative error is
// |a - n| / max(|a|, |n|, 1e-6). The floor sits well above central-difference
// round-off (about 1e-12 at eps = 1e-4), which would otherwise dominate the
// ratio for coordinates whose true gradient is exactly zero.
template <typename Scalar>
GradCheckReport grad_check(std::span<const ParamBlock<Scalar>> params,
                           const std::function<double()>& loss, double eps = 1e-4) {
  GradCheckReport report;
  for (const auto& block : params) {
    for (Eigen::Index i = 0; i < block.size; ++i) {
      Scalar& theta = block.value[i];
      const Scalar saved = theta;
      theta = saved + static_cast<Scalar>(eps);
      const double up = loss();
      theta = saved - static_cast<Scalar>(eps);
      const double down = loss();
      theta = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = static_cast<double>(block.grad[i]);
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      const double rel = std::abs(analytic - numeric) / denom;
      ++report.checked;
      if (rel > report.max_relative_error) {
        report.max_relative_error = rel;
        report.worst_block = block.name;
        report.worst_index = i;
      }
    }
  }
  return report;
}

}  // namespace semstack::nn

#endif  // SEMSTACK_NN_HPP_
