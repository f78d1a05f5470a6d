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

#ifndef SEMSTACK_INDEX_HPP_
#define SEMSTACK_INDEX_HPP_

// Top-K dot-product retrieval over unit-norm item embeddings, either by
// exhaustive scan or through an inverted file (spherical k-means cells).
// Vectors are stored in single precision; dot products accumulate in double.
//
// On-disk layout (little-endian):
//   "EIDX" | u32 version | u8 variant | u32 dim | u64 count
//   | u64 ids[count] | f32 vectors[count * dim] (row-major)
//   [ivf: u32 n_clusters | f32 centroids[n_clusters * dim]
//         | n_clusters x (u32 length | u32 offsets[length])]
//   | u64 CRC-64 of everything before it

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace semstack {

using RowMatrixXf = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr std::uint32_t kIndexVersion = 1;
inline constexpr double kUnitNormTolerance = 1e-3;

enum class IndexVariant : std::uint8_t { kExact = 0, kIvf = 1 };

struct SearchHit {
  std::uint64_t item_id = 0;
  double score = 0;
  bool operator==(const SearchHit&) const = default;
};

// Descending score, ties by ascending item id.
using SearchResult = std::vector<SearchHit>;

struct IvfParams {
  std::uint32_t n_clusters = 0;
  std::uint32_t kmeans_iters = 20;
  std::uint64_t seed = 1;
};

class EmbeddingIndex {
 public:
  EmbeddingIndex() = default;

  static EmbeddingIndex build_exact(std::span<const std::uint64_t> ids, const RowMatrixXf& vectors);
  static EmbeddingIndex build_ivf(std::span<const std::uint64_t> ids, const RowMatrixXf& vectors,
                                  const IvfParams& params);

  IndexVariant variant() const { return variant_; }
  std::uint32_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  std::uint32_t n_clusters() const { return static_cast<std::uint32_t>(postings_.size()); }
  const std::vector<std::uint64_t>& ids() const { return ids_; }
  const RowMatrixXf& vectors() const { return vectors_; }
  const RowMatrixXf& centroids() const { return centroids_; }
  const std::vector<std::vector<std::uint32_t>>& postings() const { return postings_; }

  // nprobe is ignored by exact indexes and clamped to [1, n_clusters] for IVF.
  SearchResult search(const Eigen::Ref<const Eigen::VectorXd>& query, std::size_t k,
                      std::uint32_t nprobe) const;

  std::vector<std::uint8_t> encode() const;
  static EmbeddingIndex decode(std::span<const std::uint8_t> bytes);

 private:
  void validate() const;

  IndexVariant variant_ = IndexVariant::kExact;
  std::uint32_t dim_ = 0;
  std::vector<std::uint64_t> ids_;
  RowMatrixXf vectors_;
  RowMatrixXf centroids_;
  std::vector<std::vector<std::uint32_t>> postings_;
};

inline EmbeddingIndex build_exact(std::span<const std::uint64_t> ids, const RowMatrixXf& vectors) {
  return EmbeddingIndex::build_exact(ids, vectors);
}

inline EmbeddingIndex build_ivf(std::span<const std::uint64_t> ids, const RowMatrixXf& vectors,
                                const IvfParams& params) {
  return EmbeddingIndex::build_ivf(ids, vectors, params);
}

inline SearchResult search(const EmbeddingIndex& index, const Eigen::Ref<const Eigen::VectorXd>& query,
                           std::size_t k, std::uint32_t nprobe = 0) {
  return index.search(query, k, nprobe);
}

// max(8, n_clusters / 16), clamped to n_clusters.
std::uint32_t default_nprobe(std::uint32_t n_clusters);

// ceil(sqrt(n)), at least 1.
std::uint32_t default_ivf_clusters(std::size_t n);

// Double-accumulated dot product of a stored row with a query.
double row_dot(const float* row, const double* query, std::size_t dim);

void save_index(const EmbeddingIndex& index, const std::filesystem::path& path);
EmbeddingIndex load_index(const std::filesystem::path& path);

}  // namespace semstack

#endif  // SEMSTACK_INDEX_HPP_
