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

#include "semstack/index.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "semstack/binary_io.hpp"
#include "semstack/status.hpp"

namespace semstack {
namespace {

constexpr std::string_view kIndexMagic = "EIDX";
constexpr Eigen::Index kAssignChunk = 4096;

struct Candidate {
  double score;
  std::uint64_t id;
};

bool better(const Candidate& a, const Candidate& b) {
  return a.score > b.score || (a.score == b.score && a.id < b.id);
}

// Bounded max-heap on "worse", so the front is the current K-th best.
class TopK {
 public:
  explicit TopK(std::size_t k) : k_(k) { heap_.reserve(k); }

  void offer(double score, std::uint64_t id) {
    const Candidate c{score, id};
    if (heap_.size() < k_) {
      heap_.push_back(c);
      std::push_heap(heap_.begin(), heap_.end(), better);
    } else if (better(c, heap_.front())) {
      std::pop_heap(heap_.begin(), heap_.end(), better);
      heap_.back() = c;
      std::push_heap(heap_.begin(), heap_.end(), better);
    }
  }

  SearchResult finish() {
    std::sort_heap(heap_.begin(), heap_.end(), better);
    SearchResult out;
    out.reserve(heap_.size());
    for (const auto& c : heap_) out.push_back({c.id, c.score});
    return out;
  }

 private:
  std::size_t k_;
  std::vector<Candidate> heap_;
};

void check_inputs(std::span<const std::uint64_t> ids, const RowMatrixXf& vectors) {
  require(static_cast<Eigen::Index>(ids.size()) == vectors.rows(), ErrorCode::kShape,
          "index: " + std::to_string(ids.size()) + " ids for " + std::to_string(vectors.rows()) +
              " vectors");
  std::vector<std::uint64_t> sorted(ids.begin(), ids.end());
  std::sort(sorted.begin(), sorted.end());
  auto dup = std::adjacent_find(sorted.begin(), sorted.end());
  require(dup == sorted.end(), ErrorCode::kValidation,
          dup == sorted.end() ? "" : "index: duplicate item id " + std::to_string(*dup));
  for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
    const double norm = vectors.row(i).cast<double>().norm();
    require(std::abs(norm - 1.0) <= kUnitNormTolerance, ErrorCode::kValidation,
            "index: vector " + std::to_string(i) + " (id " + std::to_string(ids[i]) +
                ") has norm " + std::to_string(norm) + ", expected unit norm");
  }
}

// Nearest centroid by dot product for every row; ties go to the lower cell.
void assign(const RowMatrixXf& x, const RowMatrixXf& centroids, std::vector<std::uint32_t>& cell,
            std::vector<float>& best) {
  const Eigen::Index n = x.rows();
  cell.assign(static_cast<std::size_t>(n), 0);
  best.assign(static_cast<std::size_t>(n), 0.f);
  RowMatrixXf scores;
  for (Eigen::Index start = 0; start < n; start += kAssignChunk) {
    const Eigen::Index len = std::min(kAssignChunk, n - start);
    scores.noalias() = x.middleRows(start, len) * centroids.transpose();
    for (Eigen::Index r = 0; r < len; ++r) {
      Eigen::Index arg = 0;
      float top = scores(r, 0);
      for (Eigen::Index c = 1; c < scores.cols(); ++c) {
        if (scores(r, c) > top) {
          top = scores(r, c);
          arg = c;
        }
      }
      cell[static_cast<std::size_t>(start + r)] = static_cast<std::uint32_t>(arg);
      best[static_cast<std::size_t>(start + r)] = top;
    }
  }
}

RowMatrixXf spherical_kmeans(const RowMatrixXf& x, const IvfParams& params) {
  const auto n = static_cast<std::size_t>(x.rows());
  const std::uint32_t k = params.n_clusters;
  std::mt19937_64 rng(params.seed);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  RowMatrixXf centroids(k, x.cols());
  for (std::uint32_t c = 0; c < k; ++c) {
    const std::size_t j = std::uniform_int_distribution<std::size_t>(c, n - 1)(rng);
    std::swap(perm[c], perm[j]);
    centroids.row(c) = x.row(static_cast<Eigen::Index>(perm[c]));
  }

  std::vector<std::uint32_t> cell;
  std::vector<float> best;
  Eigen::MatrixXd sums(k, x.cols());
  std::vector<std::size_t> counts(k);
  for (std::uint32_t iter = 0; iter < params.kmeans_iters; ++iter) {
    assign(x, centroids, cell, best);
    sums.setZero();
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.row(cell[i]) += x.row(static_cast<Eigen::Index>(i)).cast<double>();
      ++counts[cell[i]];
    }
    std::vector<std::uint32_t> empty;
    for (std::uint32_t c = 0; c < k; ++c) {
      const double norm = sums.row(c).norm();
      if (counts[c] == 0 || norm < 1e-12) {
        empty.push_back(c);
      } else {
        centroids.row(c) = (sums.row(c) / norm).cast<float>();
      }
    }
    if (!empty.empty()) {
      // Reseed from the points farthest from their current centroid.
      std::vector<std::size_t> far(n);
      std::iota(far.begin(), far.end(), 0);
      std::partial_sort(far.begin(), far.begin() + static_cast<std::ptrdiff_t>(std::min(n, empty.size())),
                        far.end(), [&](std::size_t a, std::size_t b) {
                          return best[a] < best[b] || (best[a] == best[b] && a < b);
                        });
      for (std::size_t e = 0; e < empty.size() && e < n; ++e) {
        centroids.row(empty[e]) = x.row(static_cast<Eigen::Index>(far[e]));
      }
    }
  }
  return centroids;
}

}  // namespace

double row_dot(const float* row, const double* query, std::size_t dim) {
  double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 8 <= dim; i += 8) {
    for (std::size_t l = 0; l < 8; ++l) acc[l] += static_cast<double>(row[i + l]) * query[i + l];
  }
  double tail = 0;
  for (; i < dim; ++i) tail += static_cast<double>(row[i]) * query[i];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

std::uint32_t default_nprobe(std::uint32_t n_clusters) {
  return std::min(n_clusters, std::max<std::uint32_t>(8, n_clusters / 16));
}

std::uint32_t default_ivf_clusters(std::size_t n) {
  auto c = static_cast<std::uint32_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  return std::max<std::uint32_t>(1, c);
}

EmbeddingIndex EmbeddingIndex::build_exact(std::span<const std::uint64_t> ids,
                                           const RowMatrixXf& vectors) {
  check_inputs(ids, vectors);
  EmbeddingIndex index;
  index.variant_ = IndexVariant::kExact;
  index.dim_ = static_cast<std::uint32_t>(vectors.cols());
  index.ids_.assign(ids.begin(), ids.end());
  index.vectors_ = vectors;
  return index;
}

EmbeddingIndex EmbeddingIndex::build_ivf(std::span<const std::uint64_t> ids,
                                         const RowMatrixXf& vectors, const IvfParams& params) {
  check_inputs(ids, vectors);
  IvfParams p = params;
  if (p.n_clusters == 0) p.n_clusters = default_ivf_clusters(ids.size());
  require(p.n_clusters <= ids.size(), ErrorCode::kConfig,
          "build_ivf: n_clusters " + std::to_string(p.n_clusters) + " exceeds " +
              std::to_string(ids.size()) + " items");

  EmbeddingIndex index;
  index.variant_ = IndexVariant::kIvf;
  index.dim_ = static_cast<std::uint32_t>(vectors.cols());
  index.ids_.assign(ids.begin(), ids.end());
  index.vectors_ = vectors;
  index.centroids_ = spherical_kmeans(vectors, p);
  std::vector<std::uint32_t> cell;
  std::vector<float> best;
  assign(vectors, index.centroids_, cell, best);
  index.postings_.assign(p.n_clusters, {});
  for (std::size_t i = 0; i < cell.size(); ++i) {
    index.postings_[cell[i]].push_back(static_cast<std::uint32_t>(i));
  }
  return index;
}

SearchResult EmbeddingIndex::search(const Eigen::Ref<const Eigen::VectorXd>& query, std::size_t k,
                                    std::uint32_t nprobe) const {
  require(k >= 1, ErrorCode::kValidation, "search: k must be >= 1");
  if (ids_.empty()) return {};
  require(query.size() == dim_, ErrorCode::kShape,
          "search: query has dimension " + std::to_string(query.size()) + ", index has " +
              std::to_string(dim_));
  require(std::abs(query.norm() - 1.0) <= kUnitNormTolerance, ErrorCode::kValidation,
          "search: query vector is not unit norm");
  Eigen::VectorXd q = query;
  TopK top(k);
  if (variant_ == IndexVariant::kExact) {
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      top.offer(row_dot(vectors_.row(static_cast<Eigen::Index>(i)).data(), q.data(), dim_), ids_[i]);
    }
    return top.finish();
  }

  const std::uint32_t cells = n_clusters();
  if (nprobe == 0) nprobe = default_nprobe(cells);
  nprobe = std::clamp<std::uint32_t>(nprobe, 1, cells);
  std::vector<Candidate> ranked(cells);
  for (std::uint32_t c = 0; c < cells; ++c) {
    ranked[c] = {row_dot(centroids_.row(c).data(), q.data(), dim_), c};
  }
  std::partial_sort(ranked.begin(), ranked.begin() + nprobe, ranked.end(), better);
  for (std::uint32_t p = 0; p < nprobe; ++p) {
    for (std::uint32_t offset : postings_[ranked[p].id]) {
      top.offer(row_dot(vectors_.row(offset).data(), q.data(), dim_), ids_[offset]);
    }
  }
  return top.finish();
}

void EmbeddingIndex::validate() const {
  check_inputs(ids_, vectors_);
  if (variant_ == IndexVariant::kExact) {
    require(postings_.empty(), ErrorCode::kValidation, "index: exact variant with posting lists");
    return;
  }
  require(centroids_.rows() == static_cast<Eigen::Index>(postings_.size()) &&
              centroids_.cols() == static_cast<Eigen::Index>(dim_),
          ErrorCode::kValidation, "index: centroid matrix disagrees with posting lists");
  std::vector<std::uint8_t> seen(ids_.size(), 0);
  for (const auto& list : postings_) {
    for (std::uint32_t offset : list) {
      require(offset < ids_.size() && !seen[offset], ErrorCode::kValidation,
              "index: posting lists do not partition the stored vectors");
      seen[offset] = 1;
    }
  }
  require(std::all_of(seen.begin(), seen.end(), [](std::uint8_t s) { return s != 0; }),
          ErrorCode::kValidation, "index: posting lists do not cover every stored vector");
}

std::vector<std::uint8_t> EmbeddingIndex::encode() const {
  ByteWriter w;
  w.put_magic(kIndexMagic);
  w.put_u32(kIndexVersion);
  w.put_u8(static_cast<std::uint8_t>(variant_));
  w.put_u32(dim_);
  w.put_u64(ids_.size());
  w.put_u64s(ids_);
  w.put_f32s({vectors_.data(), static_cast<std::size_t>(vectors_.size())});
  if (variant_ == IndexVariant::kIvf) {
    w.put_u32(n_clusters());
    w.put_f32s({centroids_.data(), static_cast<std::size_t>(centroids_.size())});
    for (const auto& list : postings_) {
      w.put_u32(static_cast<std::uint32_t>(list.size()));
      for (std::uint32_t offset : list) w.put_u32(offset);
    }
  }
  w.seal();
  return w.release();
}

EmbeddingIndex EmbeddingIndex::decode(std::span<const std::uint8_t> bytes) {
  ByteReader r = open_sealed(bytes, kIndexMagic, kIndexVersion, "index");
  EmbeddingIndex index;
  const std::size_t variant_at = r.offset();
  const std::uint8_t variant = r.get_u8();
  require(variant <= 1, ErrorCode::kFormat,
          "index: unknown variant " + std::to_string(variant) + " at offset " + std::to_string(variant_at));
  index.variant_ = static_cast<IndexVariant>(variant);
  index.dim_ = r.get_u32();
  const std::uint64_t count = r.get_u64();
  const std::uint64_t row_bytes = 8 + 4ULL * index.dim_;
  require(index.dim_ > 0 || count == 0, ErrorCode::kFormat, "index: zero dimension");
  require(count <= r.remaining() / std::max<std::uint64_t>(row_bytes, 1), ErrorCode::kFormat,
          "index: count " + std::to_string(count) + " exceeds file size at offset " +
              std::to_string(r.offset()));
  index.ids_.resize(count);
  r.get_u64s(index.ids_);
  index.vectors_.resize(static_cast<Eigen::Index>(count), index.dim_);
  r.get_f32s({index.vectors_.data(), static_cast<std::size_t>(index.vectors_.size())});
  if (index.variant_ == IndexVariant::kIvf) {
    const std::uint32_t cells = r.get_u32();
    require(cells >= 1 && cells <= count, ErrorCode::kFormat,
            "index: implausible cluster count " + std::to_string(cells));
    index.centroids_.resize(cells, index.dim_);
    r.get_f32s({index.centroids_.data(), static_cast<std::size_t>(index.centroids_.size())});
    index.postings_.resize(cells);
    for (auto& list : index.postings_) {
      const std::size_t at = r.offset();
      const std::uint32_t len = r.get_u32();
      require(len <= count, ErrorCode::kFormat,
              "index: posting list length " + std::to_string(len) + " at offset " + std::to_string(at));
      list.resize(len);
      for (auto& offset : list) offset = r.get_u32();
    }
  }
  require(r.remaining() == 0, ErrorCode::kFormat,
          "index: " + std::to_string(r.remaining()) + " trailing bytes at offset " +
              std::to_string(r.offset()));
  index.validate();
  return index;
}

void save_index(const EmbeddingIndex& index, const std::filesystem::path& path) {
  write_file_atomic(path, index.encode());
}

EmbeddingIndex load_index(const std::filesystem::path& path) {
  return EmbeddingIndex::decode(read_file_bytes(path));
}

}  // namespace semstack
