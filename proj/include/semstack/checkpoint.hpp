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

#ifndef SEMSTACK_CHECKPOINT_HPP_
#define SEMSTACK_CHECKPOINT_HPP_

// Binary checkpoints: 4-byte magic ("DSRM" or "DPRM"), u32 version, an
// architecture descriptor, parameters as little-endian binary32 in tower
// order (embedding tables row-major, then each layer's weight row-major and
// bias), and a CRC-64 trailer. Parameters are trained in double and rounded
// to float on save; loading widens them back without further loss.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "semstack/dpr.hpp"
#include "semstack/dsr.hpp"

namespace semstack {

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_dsr_checkpoint(const TwoTowerModel& model);
TwoTowerModel decode_dsr_checkpoint(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_dpr_checkpoint(const PairwiseModel& model);
PairwiseModel decode_dpr_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const TwoTowerModel& model, const std::filesystem::path& path);
void save_checkpoint(const PairwiseModel& model, const std::filesystem::path& path);
TwoTowerModel load_dsr_checkpoint(const std::filesystem::path& path);
PairwiseModel load_dpr_checkpoint(const std::filesystem::path& path);

}  // namespace semstack

#endif  // SEMSTACK_CHECKPOINT_HPP_
