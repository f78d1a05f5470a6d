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

#include "semstack/features.hpp"

#include <bit>
#include <cmath>

#include "json.hpp"
#include "semstack/status.hpp"

namespace semstack {
namespace {

using nlohmann::json;

constexpr int kSchemaVersion = 1;

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

char ascii_lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

json stats_to_json(const NumericStats& s) {
  json j;
  json transforms = json::array();
  for (auto t : s.transforms) transforms.push_back(std::string(transform_name(t)));
  j["transforms"] = transforms;
  j["mean"] = std::vector<double>(s.mean.data(), s.mean.data() + s.mean.size());
  j["stddev"] = std::vector<double>(s.stddev.data(), s.stddev.data() + s.stddev.size());
  std::vector<bool> constant = s.constant;
  j["constant"] = constant;
  return j;
}

NumericStats stats_from_json(const json& j) {
  NumericStats s;
  for (const auto& t : j.at("transforms")) {
    s.transforms.push_back(parse_transform(t.get<std::string>()));
  }
  const auto mean = j.at("mean").get<std::vector<double>>();
  const auto stddev = j.at("stddev").get<std::vector<double>>();
  s.constant = j.at("constant").get<std::vector<bool>>();
  require(mean.size() == s.dim() && stddev.size() == s.dim() &&
              s.constant.size() == s.dim(),
          ErrorCode::kShape, "numeric stats arrays disagree in length");
  s.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), mean.size());
  s.stddev = Eigen::Map<const Eigen::VectorXd>(stddev.data(), stddev.size());
  return s;
}

json transforms_to_json(const std::vector<NumericTransform>& ts) {
  json out = json::array();
  for (auto t : ts) out.push_back(std::string(transform_name(t)));
  return out;
}

std::vector<NumericTransform> transforms_from_json(const json& j) {
  std::vector<NumericTransform> out;
  for (const auto& t : j) out.push_back(parse_transform(t.get<std::string>()));
  return out;
}

json parse_versioned(std::string_view text, const char* what) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kFormat, std::string(what) + ": " + e.what());
  }
  const int version = j.value("schema_version", -1);
  if (version != kSchemaVersion) {
    throw Error(ErrorCode::kUnsupportedVersion,
                std::string(what) + ": unsupported schema_version " +
                    std::to_string(version));
  }
  return j;
}

}  // namespace

std::string_view transform_name(NumericTransform t) {
  return t == NumericTransform::kZScore ? "zscore" : "log1p_zscore";
}

NumericTransform parse_transform(std::string_view name) {
  if (name == "zscore") return NumericTransform::kZScore;
  if (name == "log1p_zscore") return NumericTransform::kLog1pZScore;
  throw Error(ErrorCode::kConfig, "unknown numeric transform \"" + std::string(name) + "\"");
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (char c : bytes) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

TokenList tokenize(std::string_view text) {
  TokenList out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) {
      std::string token(text.substr(start, i - start));
      for (char& c : token) c = ascii_lower(c);
      out.unigrams.push_back(std::move(token));
    }
  }
  for (std::size_t k = 0; k + 1 < out.unigrams.size(); ++k) {
    std::string bigram = out.unigrams[k];
    bigram += kBigramJoiner;
    bigram += out.unigrams[k + 1];
    out.bigrams.push_back(std::move(bigram));
  }
  return out;
}

HashedFeatures hash_tokens(const TokenList& tokens, std::uint32_t num_buckets) {
  require(num_buckets >= 2 && std::has_single_bit(num_buckets), ErrorCode::kConfig,
          "num_buckets must be a power of two >= 2, got " + std::to_string(num_buckets));
  HashedFeatures out;
  out.num_buckets = num_buckets;
  out.ids.reserve(tokens.unigrams.size() + tokens.bigrams.size());
  const std::uint64_t mask = num_buckets - 1;
  for (const auto& t : tokens.unigrams) out.ids.push_back(static_cast<std::uint32_t>(fnv1a64(t) & mask));
  for (const auto& t : tokens.bigrams) out.ids.push_back(static_cast<std::uint32_t>(fnv1a64(t) & mask));
  return out;
}

NumericStats fit_numeric_stats(const Eigen::MatrixXd& rows,
                               std::vector<NumericTransform> transforms) {
  require(static_cast<std::size_t>(rows.cols()) == transforms.size(), ErrorCode::kShape,
          "numeric stats: " + std::to_string(rows.cols()) + " columns but " +
              std::to_string(transforms.size()) + " transforms");
  require(rows.rows() > 0, ErrorCode::kConfig, "numeric stats: empty training split");
  NumericStats stats;
  stats.transforms = std::move(transforms);
  const Eigen::Index dim = rows.cols();
  stats.mean.resize(dim);
  stats.stddev.resize(dim);
  stats.constant.assign(dim, false);
  for (Eigen::Index d = 0; d < dim; ++d) {
    Eigen::VectorXd col = rows.col(d);
    if (stats.transforms[d] == NumericTransform::kLog1pZScore) {
      col = col.unaryExpr([](double x) { return std::log1p(x); });
    }
    require(col.allFinite(), ErrorCode::kNumeric,
            "numeric stats: non-finite value in dimension " + std::to_string(d));
    const double mean = col.mean();
    const double var = (col.array() - mean).square().mean();
    const double sd = std::sqrt(var);
    stats.mean[d] = mean;
    stats.stddev[d] = sd;
    stats.constant[d] = sd <= 1e-12 * std::max(1.0, std::abs(mean));
  }
  return stats;
}

NumericFeatures normalize_numeric(std::span<const double> raw, const NumericStats& stats) {
  require(raw.size() == stats.dim(), ErrorCode::kShape,
          "numeric features: expected " + std::to_string(stats.dim()) + " values, got " +
              std::to_string(raw.size()));
  NumericFeatures out;
  out.values.resize(static_cast<Eigen::Index>(raw.size()));
  for (std::size_t d = 0; d < raw.size(); ++d) {
    double x = raw[d];
    if (stats.transforms[d] == NumericTransform::kLog1pZScore) x = std::log1p(x);
    require(std::isfinite(x), ErrorCode::kNumeric,
            "numeric features: non-finite value in dimension " + std::to_string(d));
    out.values[d] = stats.constant[d] ? 0.0 : (x - stats.mean[d]) / stats.stddev[d];
  }
  return out;
}

void FeatureConfig::validate() const {
  for (auto [name, buckets] : {std::pair{"query_buckets", query_buckets},
                               std::pair{"item_buckets", item_buckets},
                               std::pair{"user_buckets", user_buckets}}) {
    require(buckets >= 2 && std::has_single_bit(buckets), ErrorCode::kConfig,
            std::string(name) + " must be a power of two >= 2");
  }
}

std::string feature_config_to_json(const FeatureConfig& config) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["query_buckets"] = config.query_buckets;
  j["item_buckets"] = config.item_buckets;
  j["user_buckets"] = config.user_buckets;
  j["item_numeric_dim"] = config.item_numeric_dim();
  j["user_numeric_dim"] = config.user_numeric_dim();
  j["item_transforms"] = transforms_to_json(config.item_transforms);
  j["user_transforms"] = transforms_to_json(config.user_transforms);
  return j.dump(2) + "\n";
}

FeatureConfig feature_config_from_json(std::string_view text) {
  const json j = parse_versioned(text, "feature config");
  FeatureConfig c;
  try {
    c.query_buckets = j.at("query_buckets").get<std::uint32_t>();
    c.item_buckets = j.at("item_buckets").get<std::uint32_t>();
    c.user_buckets = j.at("user_buckets").get<std::uint32_t>();
    c.item_transforms = transforms_from_json(j.at("item_transforms"));
    c.user_transforms = transforms_from_json(j.at("user_transforms"));
    require(j.at("item_numeric_dim").get<std::size_t>() == c.item_numeric_dim() &&
                j.at("user_numeric_dim").get<std::size_t>() == c.user_numeric_dim(),
            ErrorCode::kConfig, "feature config: numeric_dim disagrees with transform list");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("feature config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string feature_stats_to_json(const FeatureStats& stats) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["item"] = stats_to_json(stats.item);
  j["user"] = stats_to_json(stats.user);
  return j.dump(2) + "\n";
}

FeatureStats feature_stats_from_json(std::string_view text) {
  const json j = parse_versioned(text, "feature stats");
  try {
    return FeatureStats{stats_from_json(j.at("item")), stats_from_json(j.at("user"))};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("feature stats: ") + e.what());
  }
}

Featurizer::Featurizer(FeatureConfig config, FeatureStats stats)
    : config_(std::move(config)), stats_(std::move(stats)) {
  config_.validate();
  require(stats_.item.dim() == config_.item_numeric_dim() &&
              stats_.user.dim() == config_.user_numeric_dim(),
          ErrorCode::kConfig, "feature stats do not match the feature config's numeric_dim");
  require(stats_.item.transforms == config_.item_transforms &&
              stats_.user.transforms == config_.user_transforms,
          ErrorCode::kConfig, "feature stats transforms disagree with feature config");
}

QueryFeatures Featurizer::query(std::string_view text) const {
  return QueryFeatures{hash_tokens(tokenize(text), config_.query_buckets)};
}

ItemFeatures Featurizer::item(std::uint64_t item_id, std::string_view title,
                              std::span<const double> raw_numeric) const {
  return ItemFeatures{item_id, hash_tokens(tokenize(title), config_.item_buckets),
                      normalize_numeric(raw_numeric, stats_.item)};
}

UserContext Featurizer::user(std::string_view action_text,
                             std::span<const double> raw_numeric) const {
  return UserContext{hash_tokens(tokenize(action_text), config_.user_buckets),
                     normalize_numeric(raw_numeric, stats_.user)};
}

}  // namespace semstack
