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

// semstack: data generation, training, indexing, evaluation, benchmarking
// and serving from one binary. Run `semstack <subcommand> --help`.

#include <cstdlib>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "semstack/pipeline.hpp"
#include "semstack/status.hpp"

namespace {

using semstack::IndexVariant;

// Exit codes: 0 success, 2 usage, 10 + ErrorCode for library errors.
constexpr int kUsageExit = 2;
constexpr int kErrorExitBase = 10;

const std::map<std::string, IndexVariant> kVariants = {{"exact", IndexVariant::kExact},
                                                       {"ivf", IndexVariant::kIvf}};

void add_context(CLI::App* cmd, semstack::RunContext& ctx) {
  cmd->add_option("--dir", ctx.dir, "Working directory for inputs and outputs");
  cmd->add_option("--seed", ctx.seed, "Master seed; every stage derives its own stream");
  cmd->add_flag("--deterministic,!--no-deterministic", ctx.deterministic,
                "Record the run as deterministic in its manifest");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semstack: two-tower semantic retrieval and pairwise re-ranking"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  semstack::RunContext ctx;

  semstack::DatagenOptions gen;
  CLI::App* datagen = app.add_subcommand("datagen", "Generate catalog, sessions, triplets and pairs");
  add_context(datagen, ctx);
  datagen->add_option("--items", gen.catalog.n_items, "Catalog size");
  datagen->add_option("--clusters", gen.catalog.n_clusters, "Number of latent topic clusters");
  datagen->add_option("--latent-dim", gen.catalog.latent_dim, "Latent topic dimension");
  datagen->add_option("--numeric-dim", gen.catalog.numeric_dim, "Numeric attributes per item");
  datagen->add_option("--latent-noise", gen.catalog.latent_noise, "Spread of item latents around their centroid");
  datagen->add_option("--sessions", gen.sessions.n_sessions, "Search sessions to simulate");
  datagen->add_option("--presented", gen.sessions.presented_per_session, "Items shown per session");
  datagen->add_option("--in-cluster-fraction", gen.sessions.in_cluster_fraction,
                      "Share of presented items from the query cluster");
  datagen->add_option("--history-items", gen.sessions.history_items, "Past items whose titles form the user actions");
  datagen->add_option("--queries-per-cluster", gen.sessions.queries_per_cluster,
                      "Distinct queries per cluster (0: fresh query per session)");
  datagen->add_option("--users", gen.sessions.n_users, "Returning users (0: fresh user per session)");
  datagen->add_option("--noise-scale", gen.sessions.noise_scale, "Utility noise of the click model");
  datagen->add_option("--attribute-weights", gen.sessions.utility.attribute,
                      "Utility weight per standardized item attribute");
  datagen->add_option("--price-match-weight", gen.sessions.utility.price_match,
                      "Utility penalty per unit of price/purchasing-power mismatch");
  datagen->add_option("--relevance-weight", gen.sessions.utility.relevance,
                      "Utility weight of latent query-item relevance");
  datagen->add_option("--position-weight", gen.sessions.utility.position, "Click penalty per log2(1+position)");
  datagen->add_option("--click-bias", gen.sessions.utility.click_bias, "Click logit offset");
  datagen->add_option("--order-bias", gen.sessions.utility.order_bias, "Order logit offset given a click");
  datagen->add_option("--heldout-fraction", gen.heldout_fraction, "Trailing share of sessions held out");
  datagen->add_option("--negatives-per-positive", gen.triplets.negatives_per_positive,
                      "Triplets emitted per clicked item");
  datagen->add_option("--hard-negative-prob", gen.triplets.hard_negative_prob,
                      "Probability of a same-cluster unclicked negative");
  datagen->add_flag("--click-pairs", gen.pairs.include_click_pairs,
                    "Also emit clicked-over-unclicked pairs");
  datagen->add_option("--buckets", gen.buckets, "Hash buckets per token field (power of two)");

  semstack::TrainDsrOptions dsr;
  CLI::App* train_dsr = app.add_subcommand("train-dsr", "Train the two-tower retrieval model");
  add_context(train_dsr, ctx);
  train_dsr->add_option("--triplets", dsr.triplets, "Triplet file (default <dir>/triplets.jsonl)");
  train_dsr->add_option("--epochs", dsr.train.epochs, "Passes over the triplets");
  train_dsr->add_option("--batch-size", dsr.train.batch_size, "Triplets per step");
  train_dsr->add_option("--lr", dsr.train.adam.lr, "Adam learning rate");
  train_dsr->add_option("--margin", dsr.train.margin, "Hinge margin");
  train_dsr->add_option("--embedding-dim", dsr.train.arch.embedding_dim, "Token embedding width");
  train_dsr->add_option("--widths", dsr.train.arch.widths, "Layer widths; the last is the output dim");

  semstack::TrainDprOptions dpr;
  CLI::App* train_dpr = app.add_subcommand("train-dpr", "Train the pairwise re-ranking model");
  add_context(train_dpr, ctx);
  train_dpr->add_option("--pairs", dpr.pairs, "Pair file (default <dir>/pairs.jsonl)");
  train_dpr->add_option("--epochs", dpr.train.epochs, "Passes over the pairs");
  train_dpr->add_option("--batch-size", dpr.train.batch_size, "Pairs per step");
  train_dpr->add_option("--lr", dpr.train.adam.lr, "Adam learning rate");
  train_dpr->add_option("--embedding-dim", dpr.train.arch.embedding_dim, "Token embedding width");
  train_dpr->add_option("--relu-widths", dpr.train.arch.relu_widths, "Widths of the three ReLU layers")
      ->expected(3);

  semstack::BuildIndexOptions idx;
  CLI::App* build_index = app.add_subcommand("build-index", "Embed the catalog and build the index");
  add_context(build_index, ctx);
  build_index->add_option("--variant", idx.variant, "Index variant")
      ->transform(CLI::CheckedTransformer(kVariants, CLI::ignore_case));
  build_index->add_option("--n-clusters", idx.ivf.n_clusters, "IVF cells (0: ceil(sqrt(N)))");
  build_index->add_option("--kmeans-iters", idx.ivf.kmeans_iters, "k-means iterations");

  semstack::EvalRetrievalOptions er;
  CLI::App* eval_retrieval = app.add_subcommand("eval-retrieval", "Recall@K on held-out queries");
  add_context(eval_retrieval, ctx);
  eval_retrieval->add_option("--k", er.k, "Retrieved items per query");
  eval_retrieval->add_option("--nprobe", er.nprobe, "IVF cells probed (0: index default)");
  eval_retrieval->add_option("--sample-cases", er.sample_cases, "Example queries in the report");

  semstack::EvalRankingOptions ek;
  CLI::App* eval_ranking = app.add_subcommand("eval-ranking", "Session AUC and NDCG on held-out sessions");
  add_context(eval_ranking, ctx);
  eval_ranking->add_option("--ndcg-k", ek.ndcg_k, "Cutoff for NDCG");

  semstack::BenchOptions bo;
  CLI::App* bench = app.add_subcommand("bench", "Index build time, search latency and QPS");
  add_context(bench, ctx);
  bench->add_option("--k", bo.bench.k, "Neighbors per query");
  bench->add_option("--nprobe", bo.bench.nprobe, "IVF cells probed (0: index default)");
  bench->add_option("--concurrency", bo.bench.concurrency, "Thread counts for the QPS sweep");
  bench->add_option("--min-timed-queries", bo.bench.min_timed_queries, "Timed queries per measurement");
  bench->add_option("--warmup", bo.bench.warmup_queries, "Untimed warmup queries");
  bench->add_option("--synthetic-items", bo.synthetic_items,
                    "Benchmark this many synthetic vectors (0: use the working directory)");
  bench->add_option("--dim", bo.synthetic_dim, "Synthetic vector dimension");
  bench->add_option("--queries", bo.synthetic_queries, "Distinct synthetic queries");
  bench->add_option("--variant", bo.variant, "Index variant")
      ->transform(CLI::CheckedTransformer(kVariants, CLI::ignore_case));

  semstack::ServeOptions so;
  CLI::App* serve = app.add_subcommand("serve", "Serve /search, /rerank, /healthz and /metrics over HTTP");
  serve->add_option("--host", so.host, "Bind address");
  serve->add_option("--port", so.port, "TCP port");
  serve->add_option("--artifacts", so.artifacts,
                    "Artifact directory with artifacts.json (SEMSTACK_ARTIFACTS overrides)");
  serve->add_option("--nprobe-default", so.service.nprobe_default, "nprobe when a request omits it (0: index default)");
  serve->add_option("--max-k", so.service.max_k, "Largest k a request may ask for");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error[usage]: " << e.what() << "\n";
    return kUsageExit;
  }

  try {
    if (*datagen) {
      semstack::run_datagen(ctx, gen);
    } else if (*train_dsr) {
      semstack::run_train_dsr(ctx, dsr);
    } else if (*train_dpr) {
      semstack::run_train_dpr(ctx, dpr);
    } else if (*build_index) {
      semstack::run_build_index(ctx, idx);
    } else if (*eval_retrieval) {
      std::cout << semstack::run_eval_retrieval(ctx, er).dump(2) << "\n";
    } else if (*eval_ranking) {
      std::cout << semstack::run_eval_ranking(ctx, ek).dump(2) << "\n";
    } else if (*bench) {
      std::cout << semstack::run_bench(ctx, bo).dump(2) << "\n";
    } else if (*serve) {
      if (const char* env = std::getenv("SEMSTACK_ARTIFACTS"); env != nullptr && *env != '\0') {
        so.artifacts = env;
      }
      semstack::run_serve(so);
    }
  } catch (const semstack::Error& e) {
    std::cerr << "error[" << semstack::error_code_name(e.code()) << "]: " << e.what() << "\n";
    return kErrorExitBase + static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
