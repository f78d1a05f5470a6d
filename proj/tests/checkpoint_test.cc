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

#include <random>
#include <string>

#include "semstack/binary_io.hpp"
#include "semstack/checkpoint.hpp"
#include "test_util.hpp"

namespace semstack {
namespace {

using testing::random_item;
using testing::random_query;
using testing::random_user;

ErrorCode error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kIo;
}

TEST(DsrCheckpoint, RoundTripWithinDowncastTolerance) {
  testing::TempDir dir("ckpt");
  TwoTowerModel m(testing::small_dsr_arch());
  m.initialize(3);
  save_checkpoint(m, dir / "a.ckpt");
  const TwoTowerModel back = load_dsr_checkpoint(dir / "a.ckpt");
  std::mt19937_64 rng(4);
  for (int i = 0; i < 100; ++i) {
    const auto q = random_query(rng, 64);
    const Eigen::VectorXd a = query_embed(m, q), b = query_embed(back, q);
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_NEAR(b.norm(), 1.0, 1e-6);
    const auto s = random_item(rng, 1, 64, 3);
    EXPECT_LT((item_embed(m, s) - item_embed(back, s)).cwiseAbs().maxCoeff(), 1e-6);
  }
  save_checkpoint(back, dir / "b.ckpt");
  EXPECT_EQ(read_file_bytes(dir / "a.ckpt"), read_file_bytes(dir / "b.ckpt"));
  const auto bytes = read_file_bytes(dir / "a.ckpt");
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "DSRM");
  EXPECT_EQ(bytes[4], kCheckpointVersion);
}

TEST(DprCheckpoint, RoundTripWithinDowncastTolerance) {
  testing::TempDir dir("ckpt");
  PairwiseModel m(testing::small_dpr_arch());
  m.initialize(5);
  save_checkpoint(m, dir / "a.ckpt");
  const PairwiseModel back = load_dpr_checkpoint(dir / "a.ckpt");
  std::mt19937_64 rng(6);
  for (int i = 0; i < 100; ++i) {
    const auto u = random_user(rng, 64, 2);
    const auto q = random_query(rng, 64);
    const auto s = random_item(rng, 1, 64, 3);
    EXPECT_NEAR(tower_logit(m, u, q, s), tower_logit(back, u, q, s), 1e-6);
  }
  save_checkpoint(back, dir / "b.ckpt");
  EXPECT_EQ(read_file_bytes(dir / "a.ckpt"), read_file_bytes(dir / "b.ckpt"));
  const auto bytes = read_file_bytes(dir / "a.ckpt");
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "DPRM");
}

TEST(Checkpoint, RejectsDamageAndWrongKind) {
  TwoTowerModel dsr(testing::small_dsr_arch());
  dsr.initialize(1);
  PairwiseModel dpr(testing::small_dpr_arch());
  dpr.initialize(1);
  const auto dsr_bytes = encode_dsr_checkpoint(dsr);
  const auto dpr_bytes = encode_dpr_checkpoint(dpr);

  EXPECT_EQ(error_of([&] { decode_dpr_checkpoint(dsr_bytes); }), ErrorCode::kFormat);
  EXPECT_EQ(error_of([&] { decode_dsr_checkpoint(dpr_bytes); }), ErrorCode::kFormat);

  for (std::size_t at : {std::size_t{12}, dsr_bytes.size() / 3, dsr_bytes.size() - 10}) {
    auto flipped = dsr_bytes;
    flipped[at] ^= 0x40;
    EXPECT_EQ(error_of([&] { decode_dsr_checkpoint(flipped); }), ErrorCode::kChecksum) << at;
  }
  auto truncated = dpr_bytes;
  truncated.resize(truncated.size() / 2);
  EXPECT_EQ(error_of([&] { decode_dpr_checkpoint(truncated); }), ErrorCode::kChecksum);
  auto version = dpr_bytes;
  version[4] = kCheckpointVersion + 1;
  EXPECT_EQ(error_of([&] { decode_dpr_checkpoint(version); }), ErrorCode::kUnsupportedVersion);
  EXPECT_EQ(error_of([&] { load_dsr_checkpoint("/nonexistent/semstack.ckpt"); }), ErrorCode::kIo);
}

TEST(Checkpoint, DowncastKeepsUnitNorm) {
  TwoTowerModel m(testing::small_dsr_arch());
  m.initialize(9);
  const TwoTowerModel back = decode_dsr_checkpoint(encode_dsr_checkpoint(m));
  std::mt19937_64 rng(10);
  for (int i = 0; i < 200; ++i) {
    const Eigen::VectorXf v = query_embed(back, random_query(rng, 64)).cast<float>();
    EXPECT_NEAR(v.cast<double>().norm(), 1.0, 1e-3);
  }
}

}  // namespace
}  // namespace semstack
