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

#include "semstack/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include "semstack/binary_io.hpp"
#include "semstack/checkpoint.hpp"
#include "semstack/features.hpp"
#include "semstack/status.hpp"

namespace semstack {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string variant_name(IndexVariant v) { return v == IndexVariant::kExact ? "exact" : "ivf"; }

std::string display_name(const fs::path& dir, const fs::path& p) {
  const fs::path rel = p.lexically_relative(dir);
  if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
  return p.filename().generic_string();
}

std::string file_hash(const fs::path& p) { return content_hash_hex(read_file_bytes(p)); }

// Inputs and outputs are listed by name relative to the working directory.
class RunManifest {
 public:
  RunManifest(const RunContext& ctx, std::string subcommand)
      : ctx_(ctx), subcommand_(std::move(subcommand)) {}

  void config(json c) { config_ = std::move(c); }
  void input(const fs::path& p) { inputs_[display_name(ctx_.dir, p)] = file_hash(p); }
  void output(const fs::path& p) { outputs_[display_name(ctx_.dir, p)] = file_hash(p); }
  // Timing reports change between runs by nature; they are listed, not hashed.
  void timing_output(const fs::path& p) { outputs_[display_name(ctx_.dir, p)] = "timing"; }

  void write() const {
    json doc = {{"schema_version", kManifestSchemaVersion},
                {"subcommand", subcommand_},
                {"seed", ctx_.seed},
                {"deterministic", ctx_.deterministic},
                {"config", config_},
                {"inputs", inputs_},
                {"outputs", outputs_}};
    const fs::path dir = ctx_.dir / WorkFiles::kManifestDir;
    fs::create_directories(dir);
    write_file_atomic(dir / (subcommand_ + ".json"), doc.dump(2) + "\n");
  }

 private:
  const RunContext& ctx_;
  std::string subcommand_;
  json config_ = json::object();
  json inputs_ = json::object();
  json outputs_ = json::object();
};

fs::path write_report(const RunContext& ctx, const std::string& name, const json& report) {
  const fs::path dir = ctx.dir / WorkFiles::kReportDir;
  fs::create_directories(dir);
  const fs::path path = dir / (name + ".json");
  write_file_atomic(path, report.dump(2) + "\n");
  return path;
}

json adam_json(const nn::AdamHyper& a) {
  return {{"lr", a.lr}, {"beta1", a.beta1}, {"beta2", a.beta2}, {"epsilon", a.epsilon}};
}

Featurizer load_featurizer(const fs::path& dir) {
  return Featurizer(feature_config_from_json(read_file_text(dir / ArtifactFileNames::kFeatureConfig)),
                    feature_stats_from_json(read_file_text(dir / ArtifactFileNames::kFeatureStats)));
}

void add_featurizer_inputs(RunManifest& m, const fs::path& dir) {
  m.input(dir / ArtifactFileNames::kFeatureConfig);
  m.input(dir / ArtifactFileNames::kFeatureStats);
}

void refresh_artifact_manifest(const fs::path& dir) {
  if (auto hash = write_artifact_manifest(dir)) {
    std::cout << "artifact set " << *hash << " ready in " << dir.string() << "\n";
  }
}

RowMatrixXf embed_catalog(const TwoTowerModel& model, const SyntheticCatalog& catalog,
                          const Featurizer& featurizer, std::vector<std::uint64_t>* ids) {
  RowMatrixXf out(static_cast<Eigen::Index>(catalog.items.size()), model.output_dim());
  ids->clear();
  ids->reserve(catalog.items.size());
  for (std::size_t i = 0; i < catalog.items.size(); ++i) {
    const CatalogItem& item = catalog.items[i];
    out.row(static_cast<Eigen::Index>(i)) =
        item_embed(model, featurize_item(featurizer, item)).cast<float>().transpose();
    ids->push_back(item.item_id);
  }
  return out;
}

EmbeddingIndex build_variant(IndexVariant variant, std::span<const std::uint64_t> ids,
                             const RowMatrixXf& vectors, const IvfParams& params) {
  return variant == IndexVariant::kExact ? build_exact(ids, vectors) : build_ivf(ids, vectors, params);
}

struct RecallSummary {
  double mean = 0;
  std::size_t queries = 0;
};

RecallSummary mean_recall(const EmbeddingIndex& index, const TwoTowerModel& model,
                          const Featurizer& featurizer, const std::vector<SessionLog>& sessions,
                          const std::vector<std::unordered_set<std::uint64_t>>& relevant,
                          std::size_t k, std::uint32_t nprobe) {
  RecallSummary out;
  double sum = 0;
  std::vector<std::uint64_t> ids;
  for (const SessionLog& s : sessions) {
    const SearchResult hits = index.search(query_embed(model, featurizer.query(s.query)), k, nprobe);
    ids.clear();
    for (const SearchHit& h : hits) ids.push_back(h.item_id);
    if (auto r = recall_at_k(ids, relevant[s.query_cluster], k, RecallDenominator::kCappedAtK)) {
      sum += *r;
      ++out.queries;
    }
  }
  require(out.queries > 0, ErrorCode::kUndefinedMetric, "no held-out query has relevant items");
  out.mean = sum / static_cast<double>(out.queries);
  return out;
}

std::vector<std::uint64_t> rank_ids(std::vector<ScoredItem> items) {
  std::stable_sort(items.begin(), items.end(), [](const ScoredItem& a, const ScoredItem& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.item_id < b.item_id;
  });
  std::vector<std::uint64_t> ids;
  ids.reserve(items.size());
  for (const ScoredItem& it : items) ids.push_back(it.item_id);
  return ids;
}

json ranking_summary(const std::vector<ScoredSession>& sessions, std::size_t ndcg_k) {
  const SessionAucReport auc = session_auc(sessions);
  double ndcg_sum = 0;
  std::size_t ndcg_n = 0;
  for (const ScoredSession& s : sessions) {
    std::unordered_set<std::uint64_t> positives;
    for (const ScoredItem& it : s.items)
      if (it.ordered) positives.insert(it.item_id);
    if (positives.empty()) continue;
    ndcg_sum += ndcg_at_k(rank_ids(s.items), positives, ndcg_k);
    ++ndcg_n;
  }
  return {{"session_auc", auc.mean_auc},
          {"auc_sessions", auc.defined_sessions},
          {"auc_excluded_sessions", auc.excluded_sessions},
          {"ndcg", ndcg_n ? ndcg_sum / static_cast<double>(ndcg_n) : 0.0},
          {"ndcg_sessions", ndcg_n}};
}

}  // namespace

std::uint64_t stage_seed(std::uint64_t seed, std::string_view stage) {
  return splitmix64(seed ^ splitmix64(fnv1a64(stage)));
}

RandomRecallBaseline random_recall_baseline(std::size_t n, std::size_t relevant, std::size_t k) {
  require(n > 0 && relevant > 0 && relevant <= n && k > 0, ErrorCode::kConfig,
          "random recall baseline needs 0 < relevant <= n and k > 0");
  const double N = static_cast<double>(n);
  const double K = static_cast<double>(relevant);
  const double draws = static_cast<double>(std::min(k, n));
  const double denom = static_cast<double>(std::min(k, relevant));
  const double p = K / N;
  const double var = n > 1 ? draws * p * (1 - p) * (N - draws) / (N - 1) : 0.0;
  return {draws * p / denom, std::sqrt(var) / denom};
}

RowMatrixXf clustered_unit_vectors(std::size_t n, std::uint32_t dim, std::size_t n_centers,
                                   double spread, std::uint64_t seed) {
  require(dim > 0 && n_centers > 0, ErrorCode::kConfig, "need dim > 0 and at least one center");
  std::mt19937_64 rng(splitmix64(seed));
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd centers(dim, static_cast<Eigen::Index>(n_centers));
  for (Eigen::Index c = 0; c < centers.cols(); ++c) {
    for (Eigen::Index j = 0; j < centers.rows(); ++j) centers(j, c) = normal(rng);
    centers.col(c).normalize();
  }
  std::uniform_int_distribution<std::size_t> pick(0, n_centers - 1);
  const double scale = spread / std::sqrt(static_cast<double>(dim));
  RowMatrixXf out(static_cast<Eigen::Index>(n), dim);
  Eigen::VectorXd v(dim);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Index c = static_cast<Eigen::Index>(pick(rng));
    for (Eigen::Index j = 0; j < v.size(); ++j) v(j) = centers(j, c) + scale * normal(rng);
    out.row(static_cast<Eigen::Index>(i)) = (v / v.norm()).cast<float>().transpose();
  }
  return out;
}

json run_datagen(const RunContext& ctx, const DatagenOptions& o) {
  require(o.heldout_fraction > 0 && o.heldout_fraction < 1, ErrorCode::kConfig,
          "heldout fraction must lie in (0, 1)");
  fs::create_directories(ctx.dir);
  const SyntheticCatalog catalog = generate_catalog(o.catalog, stage_seed(ctx.seed, "catalog"));
  std::vector<SessionLog> all = generate_sessions(catalog, o.sessions, stage_seed(ctx.seed, "sessions"));
  const std::size_t n_heldout = static_cast<std::size_t>(
      std::llround(static_cast<double>(all.size()) * o.heldout_fraction));
  std::vector<SessionLog> heldout(all.end() - static_cast<std::ptrdiff_t>(n_heldout), all.end());
  all.resize(all.size() - n_heldout);
  const std::vector<SessionLog>& train = all;

  FeatureConfig fc = default_feature_config(o.catalog.numeric_dim);
  fc.query_buckets = fc.item_buckets = fc.user_buckets = o.buckets;
  fc.validate();
  const FeatureStats stats = fit_feature_stats(fc, catalog, train);
  const TripletSet triplets = make_triplets(train, catalog, o.triplets, stage_seed(ctx.seed, "triplets"));
  const std::vector<PairRecord> pairs = make_pairs(train, o.pairs);

  const fs::path& d = ctx.dir;
  write_file_atomic(d / ArtifactFileNames::kFeatureConfig, feature_config_to_json(fc));
  write_file_atomic(d / ArtifactFileNames::kFeatureStats, feature_stats_to_json(stats));
  write_catalog(d / WorkFiles::kCatalog, catalog);
  write_sessions(d / WorkFiles::kTrainSessions, d / WorkFiles::kTrainUtility, train);
  write_sessions(d / WorkFiles::kHeldoutSessions, d / WorkFiles::kHeldoutUtility, heldout);
  write_triplets(d / WorkFiles::kTriplets, triplets.records);
  write_pairs(d / WorkFiles::kPairs, pairs);

  std::size_t presented = 0, clicks = 0, orders = 0, hard = 0;
  for (const SessionLog& s : train) {
    for (const PresentedItem& p : s.presented) {
      ++presented;
      clicks += p.clicked;
      orders += p.ordered;
    }
  }
  for (const TripletRecord& t : triplets.records)
    if (catalog.at(t.negative_id).cluster == t.query_cluster) ++hard;

  json report = {
      {"schema_version", kManifestSchemaVersion},
      {"items", catalog.items.size()},
      {"clusters", catalog.n_clusters()},
      {"train_sessions", train.size()},
      {"heldout_sessions", heldout.size()},
      {"click_rate", presented ? static_cast<double>(clicks) / static_cast<double>(presented) : 0.0},
      {"order_rate", presented ? static_cast<double>(orders) / static_cast<double>(presented) : 0.0},
      {"triplets", triplets.records.size()},
      {"same_cluster_negative_fraction",
       triplets.records.empty() ? 0.0
                                : static_cast<double>(hard) / static_cast<double>(triplets.records.size())},
      {"sessions_without_clicks", triplets.sessions_without_clicks},
      {"hard_negative_fallbacks", triplets.hard_fallbacks},
      {"pairs", pairs.size()}};
  const fs::path report_path = write_report(ctx, "datagen", report);

  RunManifest m(ctx, "datagen");
  const CatalogConfig& c = o.catalog;
  const SessionConfig& s = o.sessions;
  m.config({{"catalog",
             {{"n_items", c.n_items}, {"n_clusters", c.n_clusters}, {"latent_dim", c.latent_dim},
              {"numeric_dim", c.numeric_dim}, {"cluster_pool_size", c.cluster_pool_size},
              {"shared_pool_size", c.shared_pool_size}, {"latent_noise", c.latent_noise}}},
            {"sessions",
             {{"n_sessions", s.n_sessions}, {"presented_per_session", s.presented_per_session},
              {"in_cluster_fraction", s.in_cluster_fraction}, {"history_items", s.history_items},
              {"noise_scale", s.noise_scale}, {"first_session_id", s.first_session_id},
              {"utility",
               {{"attribute", s.utility.attribute}, {"price_match", s.utility.price_match},
                {"relevance", s.utility.relevance}, {"position", s.utility.position},
                {"click_bias", s.utility.click_bias}, {"order_bias", s.utility.order_bias}}}}},
            {"heldout_fraction", o.heldout_fraction},
            {"triplets",
             {{"negatives_per_positive", o.triplets.negatives_per_positive},
              {"hard_negative_prob", o.triplets.hard_negative_prob}}},
            {"include_click_pairs", o.pairs.include_click_pairs},
            {"buckets", o.buckets}});
  for (const char* f : {ArtifactFileNames::kFeatureConfig, ArtifactFileNames::kFeatureStats,
                        WorkFiles::kCatalog, WorkFiles::kTrainSessions, WorkFiles::kTrainUtility,
                        WorkFiles::kHeldoutSessions, WorkFiles::kHeldoutUtility, WorkFiles::kTriplets,
                        WorkFiles::kPairs}) {
    m.output(d / f);
  }
  m.output(report_path);
  m.write();
  return report;
}

json run_train_dsr(const RunContext& ctx, const TrainDsrOptions& o) {
  const fs::path triplet_path = o.triplets.empty() ? ctx.dir / WorkFiles::kTriplets : o.triplets;
  const std::vector<TripletRecord> records = read_triplets(triplet_path);
  const SyntheticCatalog catalog = read_catalog(ctx.dir / WorkFiles::kCatalog);
  const Featurizer featurizer = load_featurizer(ctx.dir);
  require(!records.empty(), ErrorCode::kValidation, "no triplets to train on");

  DsrTrainConfig cfg = o.train;
  cfg.seed = stage_seed(ctx.seed, "train-dsr");
  cfg.arch.query_buckets = featurizer.config().query_buckets;
  cfg.arch.item_buckets = featurizer.config().item_buckets;
  cfg.arch.item_numeric_dim = static_cast<std::uint32_t>(featurizer.config().item_numeric_dim());

  const auto start = std::chrono::steady_clock::now();
  const std::vector<TripletExample> examples = featurize_triplets(records, catalog, featurizer);
  const DsrTrainResult result = train_dsr(examples, cfg);
  std::cout << "train-dsr: " << result.steps << " steps in " << seconds_since(start) << " s\n";

  const fs::path ckpt = ctx.dir / ArtifactFileNames::kDsrCheckpoint;
  save_checkpoint(result.model, ckpt);
  json report = {{"schema_version", kManifestSchemaVersion},
                 {"triplets", records.size()},
                 {"steps", result.steps},
                 {"loss_history", result.history}};
  const fs::path report_path = write_report(ctx, "train-dsr", report);
  refresh_artifact_manifest(ctx.dir);

  RunManifest m(ctx, "train-dsr");
  m.config({{"margin", cfg.margin},
            {"epochs", cfg.epochs},
            {"batch_size", cfg.batch_size},
            {"adam", adam_json(cfg.adam)},
            {"train_seed", cfg.seed},
            {"embedding_dim", cfg.arch.embedding_dim},
            {"widths", cfg.arch.widths},
            {"buckets", {cfg.arch.query_buckets, cfg.arch.item_buckets}},
            {"item_numeric_dim", cfg.arch.item_numeric_dim}});
  m.input(triplet_path);
  m.input(ctx.dir / WorkFiles::kCatalog);
  add_featurizer_inputs(m, ctx.dir);
  m.output(ckpt);
  m.output(report_path);
  m.write();
  return report;
}

json run_train_dpr(const RunContext& ctx, const TrainDprOptions& o) {
  const fs::path pair_path = o.pairs.empty() ? ctx.dir / WorkFiles::kPairs : o.pairs;
  const std::vector<PairRecord> records = read_pairs(pair_path);
  const SyntheticCatalog catalog = read_catalog(ctx.dir / WorkFiles::kCatalog);
  const Featurizer featurizer = load_featurizer(ctx.dir);
  require(!records.empty(), ErrorCode::kValidation, "no pairs to train on");

  DprTrainConfig cfg = o.train;
  cfg.seed = stage_seed(ctx.seed, "train-dpr");
  const FeatureConfig& fc = featurizer.config();
  cfg.arch.query_buckets = fc.query_buckets;
  cfg.arch.item_buckets = fc.item_buckets;
  cfg.arch.user_buckets = fc.user_buckets;
  cfg.arch.item_numeric_dim = static_cast<std::uint32_t>(fc.item_numeric_dim());
  cfg.arch.user_numeric_dim = static_cast<std::uint32_t>(fc.user_numeric_dim());

  const auto start = std::chrono::steady_clock::now();
  const std::vector<PairExample> examples = featurize_pairs(records, catalog, featurizer);
  const DprTrainResult result = train_dpr(examples, cfg);
  std::cout << "train-dpr: " << result.steps << " steps in " << seconds_since(start) << " s\n";

  const fs::path ckpt = ctx.dir / ArtifactFileNames::kDprCheckpoint;
  save_checkpoint(result.model, ckpt);
  json report = {{"schema_version", kManifestSchemaVersion},
                 {"pairs", records.size()},
                 {"steps", result.steps},
                 {"loss_history", result.history}};
  const fs::path report_path = write_report(ctx, "train-dpr", report);
  refresh_artifact_manifest(ctx.dir);

  RunManifest m(ctx, "train-dpr");
  m.config({{"epochs", cfg.epochs},
            {"batch_size", cfg.batch_size},
            {"adam", adam_json(cfg.adam)},
            {"train_seed", cfg.seed},
            {"embedding_dim", cfg.arch.embedding_dim},
            {"relu_widths", cfg.arch.relu_widths},
            {"buckets", {cfg.arch.query_buckets, cfg.arch.item_buckets, cfg.arch.user_buckets}},
            {"numeric_dims", {cfg.arch.item_numeric_dim, cfg.arch.user_numeric_dim}}});
  m.input(pair_path);
  m.input(ctx.dir / WorkFiles::kCatalog);
  add_featurizer_inputs(m, ctx.dir);
  m.output(ckpt);
  m.output(report_path);
  m.write();
  return report;
}

json run_build_index(const RunContext& ctx, const BuildIndexOptions& o) {
  const TwoTowerModel model = load_dsr_checkpoint(ctx.dir / ArtifactFileNames::kDsrCheckpoint);
  const SyntheticCatalog catalog = read_catalog(ctx.dir / WorkFiles::kCatalog);
  const Featurizer featurizer = load_featurizer(ctx.dir);

  IvfParams params = o.ivf;
  params.seed = stage_seed(ctx.seed, "build-index");
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::uint64_t> ids;
  const RowMatrixXf vectors = embed_catalog(model, catalog, featurizer, &ids);
  const EmbeddingIndex index = build_variant(o.variant, ids, vectors, params);
  std::cout << "build-index: " << index.size() << " items in " << seconds_since(start) << " s\n";

  const fs::path out = ctx.dir / ArtifactFileNames::kIndex;
  save_index(index, out);
  json report = {{"schema_version", kManifestSchemaVersion},
                 {"items", index.size()},
                 {"dim", index.dim()},
                 {"variant", variant_name(index.variant())},
                 {"n_clusters", index.n_clusters()}};
  refresh_artifact_manifest(ctx.dir);

  RunManifest m(ctx, "build-index");
  m.config({{"variant", variant_name(o.variant)},
            {"n_clusters", params.n_clusters},
            {"kmeans_iters", params.kmeans_iters},
            {"kmeans_seed", params.seed}});
  m.input(ctx.dir / ArtifactFileNames::kDsrCheckpoint);
  m.input(ctx.dir / WorkFiles::kCatalog);
  add_featurizer_inputs(m, ctx.dir);
  m.output(out);
  m.write();
  return report;
}

json run_eval_retrieval(const RunContext& ctx, const EvalRetrievalOptions& o) {
  const TwoTowerModel model = load_dsr_checkpoint(ctx.dir / ArtifactFileNames::kDsrCheckpoint);
  const EmbeddingIndex index = load_index(ctx.dir / ArtifactFileNames::kIndex);
  const SyntheticCatalog catalog = read_catalog(ctx.dir / WorkFiles::kCatalog);
  const Featurizer featurizer = load_featurizer(ctx.dir);
  const std::vector<SessionLog> sessions = read_sessions(ctx.dir / WorkFiles::kHeldoutSessions);
  require(!sessions.empty(), ErrorCode::kValidation, "no held-out sessions");
  require(o.k >= 1, ErrorCode::kConfig, "k must be >= 1");

  std::vector<std::unordered_set<std::uint64_t>> relevant(catalog.n_clusters());
  for (const CatalogItem& it : catalog.items) relevant[it.cluster].insert(it.item_id);

  const RecallSummary trained = mean_recall(index, model, featurizer, sessions, relevant, o.k, o.nprobe);

  // Same architecture, fresh weights, exact search over its own embeddings.
  TwoTowerModel untrained(nn::Tower<double>(model.query_tower().spec()),
                          nn::Tower<double>(model.item_tower().spec()));
  untrained.initialize(stage_seed(ctx.seed, "untrained"));
  std::vector<std::uint64_t> ids;
  const RowMatrixXf raw = embed_catalog(untrained, catalog, featurizer, &ids);
  const EmbeddingIndex untrained_index = build_exact(ids, raw);
  const RecallSummary baseline =
      mean_recall(untrained_index, untrained, featurizer, sessions, relevant, o.k, 0);

  // Hypergeometric expectation for a uniform retriever, averaged over queries.
  double rand_mean = 0, rand_var = 0;
  std::unordered_set<std::uint32_t> query_clusters;
  for (const SessionLog& s : sessions) {
    const RandomRecallBaseline b = random_recall_baseline(catalog.items.size(), relevant[s.query_cluster].size(), o.k);
    rand_mean += b.mean;
    rand_var += b.stddev * b.stddev;
    query_clusters.insert(s.query_cluster);
  }
  const double nq = static_cast<double>(sessions.size());
  rand_mean /= nq;
  // Queries sharing a cluster share their relevant set, so clusters are the
  // independent units when scaling the spread of the mean.
  const double rand_sd = std::sqrt(rand_var / nq) / std::sqrt(static_cast<double>(query_clusters.size()));

  json cases = json::array();
  for (std::size_t i = 0; i < std::min(o.sample_cases, sessions.size()); ++i) {
    const SessionLog& s = sessions[i];
    const SearchResult hits = index.search(query_embed(model, featurizer.query(s.query)), o.sample_top, o.nprobe);
    json items = json::array();
    for (const SearchHit& h : hits) {
      const CatalogItem& it = catalog.at(h.item_id);
      items.push_back({{"item_id", h.item_id}, {"title", it.title}, {"cluster", it.cluster}, {"score", h.score}});
    }
    cases.push_back({{"query", s.query}, {"query_cluster", s.query_cluster}, {"top_items", items}});
  }

  json report = {{"schema_version", kManifestSchemaVersion},
                 {"k", o.k},
                 {"recall_denominator", "min(k, |relevant|)"},
                 {"queries", trained.queries},
                 {"index_variant", variant_name(index.variant())},
                 {"nprobe", o.nprobe ? o.nprobe : default_nprobe(index.n_clusters())},
                 {"trained_recall", trained.mean},
                 {"untrained_recall", baseline.mean},
                 {"random_recall_mean", rand_mean},
                 {"random_recall_sd", rand_sd},
                 {"sample_cases", cases}};
  const fs::path report_path = write_report(ctx, "eval-retrieval", report);

  RunManifest m(ctx, "eval-retrieval");
  m.config({{"k", o.k}, {"nprobe", o.nprobe}, {"sample_cases", o.sample_cases}, {"sample_top", o.sample_top}});
  m.input(ctx.dir / ArtifactFileNames::kDsrCheckpoint);
  m.input(ctx.dir / ArtifactFileNames::kIndex);
  m.input(ctx.dir / WorkFiles::kCatalog);
  m.input(ctx.dir / WorkFiles::kHeldoutSessions);
  add_featurizer_inputs(m, ctx.dir);
  m.output(report_path);
  m.write();
  return report;
}

json run_eval_ranking(const RunContext& ctx, const EvalRankingOptions& o) {
  const PairwiseModel model = load_dpr_checkpoint(ctx.dir / ArtifactFileNames::kDprCheckpoint);
  const SyntheticCatalog catalog = read_catalog(ctx.dir / WorkFiles::kCatalog);
  const Featurizer featurizer = load_featurizer(ctx.dir);
  const std::vector<SessionLog> sessions =
      read_sessions(ctx.dir / WorkFiles::kHeldoutSessions, ctx.dir / WorkFiles::kHeldoutUtility);

  std::unordered_map<std::uint64_t, ItemFeatures> item_cache;
  auto item_features = [&](std::uint64_t id) -> const ItemFeatures& {
    auto it = item_cache.find(id);
    if (it == item_cache.end()) it = item_cache.emplace(id, featurize_item(featurizer, catalog.at(id))).first;
    return it->second;
  };

  std::mt19937_64 rng(stage_seed(ctx.seed, "random-scores"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<ScoredSession> by_model, by_oracle, by_random;
  for (const SessionLog& s : sessions) {
    const UserContext user = featurizer.user(s.user.actions, s.user.numeric);
    const QueryFeatures query = featurizer.query(s.query);
    ScoredSession m{s.session_id, {}}, u{s.session_id, {}}, r{s.session_id, {}};
    for (const PresentedItem& p : s.presented) {
      m.items.push_back({p.item_id, tower_logit(model, user, query, item_features(p.item_id)), p.ordered});
      u.items.push_back({p.item_id, p.planted_utility, p.ordered});
      r.items.push_back({p.item_id, unit(rng), p.ordered});
    }
    by_model.push_back(std::move(m));
    by_oracle.push_back(std::move(u));
    by_random.push_back(std::move(r));
  }

  json report = {{"schema_version", kManifestSchemaVersion},
                 {"sessions", sessions.size()},
                 {"ndcg_k", o.ndcg_k},
                 {"model", ranking_summary(by_model, o.ndcg_k)},
                 {"oracle", ranking_summary(by_oracle, o.ndcg_k)},
                 {"random", ranking_summary(by_random, o.ndcg_k)}};
  const fs::path report_path = write_report(ctx, "eval-ranking", report);

  RunManifest m(ctx, "eval-ranking");
  m.config({{"ndcg_k", o.ndcg_k}, {"random_seed", stage_seed(ctx.seed, "random-scores")}});
  m.input(ctx.dir / ArtifactFileNames::kDprCheckpoint);
  m.input(ctx.dir / WorkFiles::kCatalog);
  m.input(ctx.dir / WorkFiles::kHeldoutSessions);
  m.input(ctx.dir / WorkFiles::kHeldoutUtility);
  add_featurizer_inputs(m, ctx.dir);
  m.output(report_path);
  m.write();
  return report;
}

json run_bench(const RunContext& ctx, const BenchOptions& o) {
  IvfParams params = o.ivf;
  params.seed = stage_seed(ctx.seed, "bench-index");
  RunManifest m(ctx, "bench");

  EmbeddingIndex index;
  Eigen::MatrixXd queries;
  double build_seconds = 0;
  if (o.synthetic_items > 0) {
    const std::size_t centers = std::max<std::size_t>(1, default_ivf_clusters(o.synthetic_items));
    const RowMatrixXf vectors =
        clustered_unit_vectors(o.synthetic_items, o.synthetic_dim, centers, 0.5, stage_seed(ctx.seed, "bench-items"));
    std::vector<std::uint64_t> ids(o.synthetic_items);
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
    const auto start = std::chrono::steady_clock::now();
    index = build_variant(o.variant, ids, vectors, params);
    build_seconds = seconds_since(start);
    const RowMatrixXf q = clustered_unit_vectors(std::max<std::size_t>(1, o.synthetic_queries), o.synthetic_dim,
                                                 centers, 0.5, stage_seed(ctx.seed, "bench-queries"));
    queries = q.cast<double>();
  } else {
    const TwoTowerModel model = load_dsr_checkpoint(ctx.dir / ArtifactFileNames::kDsrCheckpoint);
    const SyntheticCatalog catalog = read_catalog(ctx.dir / WorkFiles::kCatalog);
    const Featurizer featurizer = load_featurizer(ctx.dir);
    const std::vector<SessionLog> sessions = read_sessions(ctx.dir / WorkFiles::kHeldoutSessions);
    require(!sessions.empty(), ErrorCode::kValidation, "no held-out queries to benchmark");
    // Indexing time covers embedding the catalog plus building the index.
    const auto start = std::chrono::steady_clock::now();
    std::vector<std::uint64_t> ids;
    const RowMatrixXf vectors = embed_catalog(model, catalog, featurizer, &ids);
    index = build_variant(o.variant, ids, vectors, params);
    build_seconds = seconds_since(start);
    queries.resize(static_cast<Eigen::Index>(sessions.size()), model.output_dim());
    for (std::size_t i = 0; i < sessions.size(); ++i)
      queries.row(static_cast<Eigen::Index>(i)) = query_embed(model, featurizer.query(sessions[i].query)).transpose();
    m.input(ctx.dir / ArtifactFileNames::kDsrCheckpoint);
    m.input(ctx.dir / WorkFiles::kCatalog);
    m.input(ctx.dir / WorkFiles::kHeldoutSessions);
    add_featurizer_inputs(m, ctx.dir);
  }

  const BenchReport report = bench_search(index, queries, o.bench, build_seconds);
  const std::string text = bench_report_to_json(report);
  const fs::path dir = ctx.dir / WorkFiles::kReportDir;
  fs::create_directories(dir);
  const fs::path report_path = dir / "bench.json";
  write_file_atomic(report_path, text);

  std::vector<std::size_t> conc = o.bench.concurrency;
  m.config({{"k", o.bench.k},
            {"nprobe", o.bench.nprobe},
            {"concurrency", conc},
            {"min_timed_queries", o.bench.min_timed_queries},
            {"warmup_queries", o.bench.warmup_queries},
            {"synthetic_items", o.synthetic_items},
            {"synthetic_dim", o.synthetic_dim},
            {"synthetic_queries", o.synthetic_queries},
            {"variant", variant_name(o.variant)},
            {"kmeans_seed", params.seed}});
  m.timing_output(report_path);
  m.write();
  return json::parse(text);
}

void run_serve(const ServeOptions& o) {
  require(!o.artifacts.empty(), ErrorCode::kConfig, "no artifact directory given");
  std::shared_ptr<const ArtifactSet> set = load_artifact_set(o.artifacts);
  Service service(o.service);
  const std::string hash = service.hot_swap(std::move(set));
  std::cout << "serving artifact set " << hash << " on " << o.host << ":" << o.port << std::endl;
  service.listen(o.host, o.port);
}

}  // namespace semstack
