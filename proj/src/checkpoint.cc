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

#include "semstack/checkpoint.hpp"

#include "semstack/binary_io.hpp"
#include "semstack/status.hpp"

namespace semstack {
namespace {

constexpr std::string_view kDsrMagic = "DSRM";
constexpr std::string_view kDprMagic = "DPRM";
constexpr std::uint32_t kMaxDim = 1u << 24;

void put_spec(ByteWriter& w, const nn::TowerSpec& spec) {
  w.put_u32(static_cast<std::uint32_t>(spec.field_buckets.size()));
  for (auto b : spec.field_buckets) w.put_u32(b);
  w.put_u32(spec.embedding_dim);
  w.put_u32(spec.numeric_dim);
  w.put_u32(static_cast<std::uint32_t>(spec.widths.size()));
  std::uint32_t in = spec.input_dim();
  for (std::size_t l = 0; l < spec.widths.size(); ++l) {
    const bool last = l + 1 == spec.widths.size();
    w.put_u32(in);
    w.put_u32(spec.widths[l]);
    w.put_u8(static_cast<std::uint8_t>(last ? nn::Activation::kIdentity : nn::Activation::kRelu));
    in = spec.widths[l];
  }
  w.put_u8(spec.normalize_output ? 1 : 0);
}

std::uint32_t get_dim(ByteReader& r, const char* what) {
  const std::size_t at = r.offset();
  const std::uint32_t v = r.get_u32();
  if (v == 0 || v > kMaxDim) {
    throw Error(ErrorCode::kFormat, std::string("checkpoint: implausible ") + what + " " +
                                        std::to_string(v) + " at offset " + std::to_string(at));
  }
  return v;
}

nn::TowerSpec get_spec(ByteReader& r) {
  nn::TowerSpec spec;
  const std::uint32_t n_fields = r.get_u32();
  require(n_fields <= 16, ErrorCode::kFormat, "checkpoint: implausible field count");
  for (std::uint32_t f = 0; f < n_fields; ++f) spec.field_buckets.push_back(get_dim(r, "bucket count"));
  spec.embedding_dim = get_dim(r, "embedding dim");
  spec.numeric_dim = r.get_u32();
  require(spec.numeric_dim <= kMaxDim, ErrorCode::kFormat, "checkpoint: implausible numeric dim");
  const std::uint32_t n_layers = r.get_u32();
  require(n_layers >= 1 && n_layers <= 64, ErrorCode::kFormat, "checkpoint: implausible layer count");
  std::uint32_t expected_in = spec.input_dim();
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    const std::size_t at = r.offset();
    const std::uint32_t in = r.get_u32();
    const std::uint32_t out = get_dim(r, "layer width");
    const auto act = static_cast<nn::Activation>(r.get_u8());
    const bool last = l + 1 == n_layers;
    const auto want = last ? nn::Activation::kIdentity : nn::Activation::kRelu;
    if (in != expected_in || act != want) {
      throw Error(ErrorCode::kValidation,
                  "checkpoint: layer " + std::to_string(l) + " descriptor at offset " +
                      std::to_string(at) + " is incompatible with the tower topology");
    }
    spec.widths.push_back(out);
    expected_in = out;
  }
  spec.normalize_output = r.get_u8() != 0;
  return spec;
}

template <typename Derived>
void put_params(ByteWriter& w, const Eigen::DenseBase<Derived>& m) {
  // Row-major traversal regardless of storage order.
  std::vector<float> row(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = static_cast<float>(m(r, c));
    w.put_f32s(row);
  }
}

template <typename Derived>
void get_params(ByteReader& r, Eigen::DenseBase<Derived>& m) {
  std::vector<float> row(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    r.get_f32s(row);
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(i, c) = static_cast<double>(row[static_cast<std::size_t>(c)]);
  }
}

void put_tower(ByteWriter& w, const nn::Tower<double>& tower) {
  for (const auto& t : tower.tables()) put_params(w, t.weights);
  for (const auto& layer : tower.layers()) {
    put_params(w, layer.weight);
    put_params(w, layer.bias.transpose());
  }
}

nn::Tower<double> get_tower(ByteReader& r, const nn::TowerSpec& spec) {
  nn::Tower<double> tower(spec);
  for (auto& t : tower.tables()) get_params(r, t.weights);
  for (auto& layer : tower.layers()) {
    get_params(r, layer.weight);
    Eigen::RowVectorXd bias(layer.bias.size());
    get_params(r, bias);
    layer.bias = bias.transpose();
  }
  return tower;
}

std::uint64_t param_count(const nn::TowerSpec& spec) {
  std::uint64_t n = 0;
  for (auto b : spec.field_buckets) n += std::uint64_t{b} * spec.embedding_dim;
  std::uint64_t in = spec.input_dim();
  for (auto width : spec.widths) {
    n += in * width + width;
    in = width;
  }
  return n;
}

void expect_param_bytes(const ByteReader& r, std::uint64_t floats) {
  if (r.remaining() != floats * 4) {
    throw Error(ErrorCode::kValidation,
                "checkpoint: descriptor declares " + std::to_string(floats) +
                    " parameters but " + std::to_string(r.remaining()) +
                    " bytes follow at offset " + std::to_string(r.offset()));
  }
}

void expect_consumed(const ByteReader& r) {
  if (r.remaining() != 0) {
    throw Error(ErrorCode::kFormat, "checkpoint: " + std::to_string(r.remaining()) +
                                        " unexpected bytes at offset " + std::to_string(r.offset()));
  }
}

}  // namespace

std::vector<std::uint8_t> encode_dsr_checkpoint(const TwoTowerModel& model) {
  ByteWriter w;
  w.put_magic(kDsrMagic);
  w.put_u32(kCheckpointVersion);
  w.put_u32(2);
  put_spec(w, model.query_tower().spec());
  put_spec(w, model.item_tower().spec());
  put_tower(w, model.query_tower());
  put_tower(w, model.item_tower());
  w.seal();
  return w.release();
}

TwoTowerModel decode_dsr_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r = open_sealed(bytes, kDsrMagic, kCheckpointVersion, "DSR checkpoint");
  require(r.get_u32() == 2, ErrorCode::kValidation, "DSR checkpoint: expected two towers");
  const auto query_spec = get_spec(r);
  const auto item_spec = get_spec(r);
  require(query_spec.field_buckets.size() == 1 && query_spec.numeric_dim == 0 &&
              item_spec.field_buckets.size() == 1,
          ErrorCode::kValidation, "DSR checkpoint: unexpected tower inputs");
  expect_param_bytes(r, param_count(query_spec) + param_count(item_spec));
  auto query = get_tower(r, query_spec);
  auto item = get_tower(r, item_spec);
  expect_consumed(r);
  return TwoTowerModel(std::move(query), std::move(item));
}

std::vector<std::uint8_t> encode_dpr_checkpoint(const PairwiseModel& model) {
  ByteWriter w;
  w.put_magic(kDprMagic);
  w.put_u32(kCheckpointVersion);
  w.put_u32(1);
  put_spec(w, model.tower().spec());
  put_tower(w, model.tower());
  w.seal();
  return w.release();
}

PairwiseModel decode_dpr_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r = open_sealed(bytes, kDprMagic, kCheckpointVersion, "DPR checkpoint");
  require(r.get_u32() == 1, ErrorCode::kValidation, "DPR checkpoint: expected one shared tower");
  const auto spec = get_spec(r);
  expect_param_bytes(r, param_count(spec));
  auto tower = get_tower(r, spec);
  expect_consumed(r);
  return PairwiseModel(std::move(tower));
}

void save_checkpoint(const TwoTowerModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, encode_dsr_checkpoint(model));
}

void save_checkpoint(const PairwiseModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, encode_dpr_checkpoint(model));
}

TwoTowerModel load_dsr_checkpoint(const std::filesystem::path& path) {
  return decode_dsr_checkpoint(read_file_bytes(path));
}

PairwiseModel load_dpr_checkpoint(const std::filesystem::path& path) {
  return decode_dpr_checkpoint(read_file_bytes(path));
}

}  // namespace semstack
