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

#ifndef SEMSTACK_FEATURES_HPP_
#define SEMSTACK_FEATURES_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace semstack {

// U+2581 LOWER ONE EIGHTH BLOCK, used to join adjacent unigrams.
inline constexpr std::string_view kBigramJoiner = "\xE2\x96\x81";

struct TokenList {
  std::vector<std::string> unigrams;
  std::vector<std::string> bigrams;
};

struct HashedFeatures {
  std::vector<std::uint32_t> ids;
  std::uint32_t num_buckets = 0;
};

enum class NumericTransform { kZScore, kLog1pZScore };

std::string_view transform_name(NumericTransform t);
NumericTransform parse_transform(std::string_view name);

struct NumericFeatures {
  Eigen::VectorXd values;
};

struct QueryFeatures {
  HashedFeatures tokens;
};

struct ItemFeatures {
  std::uint64_t item_id = 0;
  HashedFeatures tokens;
  NumericFeatures numeric;
};

struct UserContext {
  HashedFeatures action_tokens;
  NumericFeatures numeric;
};

std::uint64_t fnv1a64(std::string_view bytes);

// Whitespace split plus ASCII lowercasing; multibyte UTF-8 passes through.
TokenList tokenize(std::string_view text);

// Unigrams first, then bigrams; duplicates kept so sum pooling weights repeats.
HashedFeatures hash_tokens(const TokenList& tokens, std::uint32_t num_buckets);

// Per-dimension standardization fitted on the training split only.
struct NumericStats {
  std::vector<NumericTransform> transforms;
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;
  std::vector<bool> constant;

  std::size_t dim() const { return transforms.size(); }
};

// rows: one raw observation per row, columns = dimensions.
NumericStats fit_numeric_stats(const Eigen::MatrixXd& rows,
                               std::vector<NumericTransform> transforms);

NumericFeatures normalize_numeric(std::span<const double> raw,
                                  const NumericStats& stats);

// Bucket sizes per token field and the numeric schema of items and users.
struct FeatureConfig {
  std::uint32_t query_buckets = 1u << 16;
  std::uint32_t item_buckets = 1u << 16;
  std::uint32_t user_buckets = 1u << 16;
  std::vector<NumericTransform> item_transforms;
  std::vector<NumericTransform> user_transforms;

  std::size_t item_numeric_dim() const { return item_transforms.size(); }
  std::size_t user_numeric_dim() const { return user_transforms.size(); }
  void validate() const;
};

std::string feature_config_to_json(const FeatureConfig& config);
FeatureConfig feature_config_from_json(std::string_view text);

struct FeatureStats {
  NumericStats item;
  NumericStats user;
};

std::string feature_stats_to_json(const FeatureStats& stats);
FeatureStats feature_stats_from_json(std::string_view text);

// The one place raw text and attributes become model inputs.
class Featurizer {
 public:
  Featurizer() = default;
  Featurizer(FeatureConfig config, FeatureStats stats);

  QueryFeatures query(std::string_view text) const;
  ItemFeatures item(std::uint64_t item_id, std::string_view title,
                    std::span<const double> raw_numeric) const;
  UserContext user(std::string_view action_text,
                   std::span<const double> raw_numeric) const;

  const FeatureConfig& config() const { return config_; }
  const FeatureStats& stats() const { return stats_; }

 private:
  FeatureConfig config_;
  FeatureStats stats_;
};

}  // namespace semstack

#endif  // SEMSTACK_FEATURES_HPP_
