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


#ifndef SEMSTACK_TESTS_ARTIFACT_FIXTURE_HPP_
#define SEMSTACK_TESTS_ARTIFACT_FIXTURE_HPP_

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "semstack/binary_io.hpp"
#include "semstack/checkpoint.hpp"
#include "semstack/datagen.hpp"
#include "semstack/serving.hpp"
#include "test_util.hpp"

namespace semstack::testing {

inline constexpr std::uint32_t kFixtureBuckets = 256;

inline FeatureConfig fixture_feature_config() {
  FeatureConfig c = default_feature_config(4);
  c.query_buckets = kFixtureBuckets;
  c.item_buckets = kFixtureBuckets;
  c.user_buckets = kFixtureBuckets;
  return c;
}

inline FeatureStats fixture_feature_stats(const FeatureConfig& c) {
  auto unit_stats = [](const std::vector<NumericTransform>& ts) {
    NumericStats s;
    s.transforms = ts;
    s.mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ts.size()));
    s.stddev = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(ts.size()));
    s.constant.assign(ts.size(), false);
    return s;
  };
  return FeatureStats{unit_stats(c.item_transforms), unit_stats(c.user_transforms)};
}

struct FixtureOptions {
  std::uint64_t seed = 1;
  std::size_t n_items = 300;
  std::uint32_t dsr_dim = 8;
  // Nonzero: write an index of this dimension regardless of the towers.
  std::uint32_t index_dim_override = 0;
};

inline std::string fixture_title(std::uint64_t id) {
  static const char* kWords[] = {"red", "blue", "shoe", "lamp", "desk", "soft", "oak", "steel"};
  return std::string(kWords[id % 8]) + " " + kWords[(id / 8) % 8] + " " + kWords[(id / 64) % 8];
}

inline std::vector<double> fixture_numeric(std::uint64_t id) {
  return {10.0 + static_cast<double>(id % 17), 0.1 * static_cast<double>(id % 5),
          0.01 * static_cast<double>(id % 7), static_cast<double>(id % 100)};
}

// Writes a complete, self-consistent artifact directory and its manifest.
inline std::string write_fixture_artifacts(const std::filesystem::path& dir, const FixtureOptions& o) {
  std::filesystem::create_directories(dir);
  const FeatureConfig fc = fixture_feature_config();
  const FeatureStats stats = fixture_feature_stats(fc);
  write_file_atomic(dir / ArtifactFileNames::kFeatureConfig, feature_config_to_json(fc));
  write_file_atomic(dir / ArtifactFileNames::kFeatureStats, feature_stats_to_json(stats));
  const Featurizer featurizer(fc, stats);

  DsrArchitecture da;
  da.query_buckets = da.item_buckets = kFixtureBuckets;
  da.embedding_dim = 8;
  da.item_numeric_dim = 4;
  da.widths = {16, o.dsr_dim};
  TwoTowerModel dsr(da);
  dsr.initialize(o.seed);
  save_checkpoint(dsr, dir / ArtifactFileNames::kDsrCheckpoint);
  const TwoTowerModel served = load_dsr_checkpoint(dir / ArtifactFileNames::kDsrCheckpoint);

  DprArchitecture pa;
  pa.query_buckets = pa.item_buckets = pa.user_buckets = kFixtureBuckets;
  pa.embedding_dim = 4;
  pa.relu_widths = {16, 8, 4};
  PairwiseModel dpr(pa);
  dpr.initialize(o.seed + 1000);
  save_checkpoint(dpr, dir / ArtifactFileNames::kDprCheckpoint);

  const std::uint32_t dim = o.index_dim_override ? o.index_dim_override : o.dsr_dim;
  std::vector<std::uint64_t> ids;
  RowMatrixXf vectors(static_cast<Eigen::Index>(o.n_items), dim);
  std::mt19937_64 rng(o.seed);
  for (std::size_t i = 0; i < o.n_items; ++i) {
    const std::uint64_t id = 100 + i;
    ids.push_back(id);
    Eigen::VectorXd v = dim == o.dsr_dim
                            ? item_embed(served, featurizer.item(id, fixture_title(id), fixture_numeric(id)))
                            : random_unit(rng, dim);
    vectors.row(static_cast<Eigen::Index>(i)) = v.cast<float>().transpose();
  }
  save_index(build_exact(ids, vectors), dir / ArtifactFileNames::kIndex);
  const auto hash = write_artifact_manifest(dir);
  return hash.value_or("");
}

}  // namespace semstack::testing

#endif  // SEMSTACK_TESTS_ARTIFACT_FIXTURE_HPP_
