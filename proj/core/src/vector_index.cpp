// Copyright 2026-present the larag project
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

#include "larag/vector_index.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>
#include <thread>

#include "larag/errors.hpp"
#include "larag/tensor_io.hpp"

namespace larag {

namespace {

struct ScoredEntry {
  double similarity;
  std::uint64_t index;  // flat entry index; also the (seq_id, position) order
};

// Total order: similarity descending, then flat entry index ascending,
// which equals (seq_id, position) ascending because entries are laid out
// in sequence order.
inline bool better(const ScoredEntry& a, const ScoredEntry& b) {
  if (a.similarity != b.similarity) return a.similarity > b.similarity;
  return a.index < b.index;
}

std::vector<double> normalize_query(std::span<const float> query) {
  std::vector<double> q(query.size());
  double norm = l2_norm(query);
  if (norm == 0.0) {
    std::fill(q.begin(), q.end(), 0.0);
    return q;
  }
  for (std::size_t i = 0; i < query.size(); ++i) {
    q[i] = static_cast<double>(query[i]) / norm;
  }
  return q;
}

std::vector<Neighbor> select_top_k(std::vector<ScoredEntry>& scored, std::size_t k,
                                   const Datastore& datastore) {
  std::size_t take = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take),
                    scored.end(), better);
  std::vector<Neighbor> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    DatastoreEntry entry = datastore.entry(scored[i].index);
    out.push_back(Neighbor{entry.seq_id, entry.position, scored[i].similarity});
  }
  return out;
}

}  // namespace

std::size_t thread_cap() {
  if (const char* env = std::getenv("LA_RAG_THREADS")) {
    char* end = nullptr;
    long n = std::strtol(env, &end, 10);
    if (end != env && n >= 1) return static_cast<std::size_t>(n);
    return 1;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<std::size_t>(hw);
}

IvfParams IvfParams::defaults(std::uint64_t entry_count, std::uint64_t seed) {
  IvfParams p;
  p.n_clusters = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(entry_count)))));
  p.n_clusters = std::min<std::size_t>(p.n_clusters, entry_count);
  p.n_probe = std::max<std::size_t>(1, (p.n_clusters + 7) / 8);
  p.kmeans_seed = seed;
  p.kmeans_iters = 25;
  return p;
}

void IvfParams::validate(std::uint64_t entry_count) const {
  if (n_clusters < 1 || n_probe < 1 || n_probe > n_clusters || n_clusters > entry_count) {
    throw Error(ErrorCode::InvalidParams,
                "IVF params require 1 <= n_probe <= n_clusters <= entry_count");
  }
}

// ---------------------------------------------------------------------------
// ExactIndex

std::unique_ptr<ExactIndex> build_exact(std::shared_ptr<const Datastore> datastore) {
  if (!datastore || datastore->entry_count() == 0) {
    throw Error(ErrorCode::EmptyDatastore, "cannot index an empty datastore");
  }
  auto index = std::unique_ptr<ExactIndex>(new ExactIndex());
  index->datastore_ = std::move(datastore);
  return index;
}

std::size_t ExactIndex::dim() const { return datastore_->dim(); }
std::uint64_t ExactIndex::entry_count() const { return datastore_->entry_count(); }

std::vector<Neighbor> ExactIndex::search(std::span<const float> query, std::size_t k) const {
  if (query.size() != dim()) {
    throw Error(ErrorCode::DimensionMismatch, "query dimension does not match index");
  }
  if (k < 1) {
    throw Error(ErrorCode::InvalidParams, "k must be at least 1");
  }
  const std::uint64_t n = entry_count();
  std::vector<double> q = normalize_query(query);
  const RowMatrix& keys = datastore_->normalized_keys();

  std::vector<ScoredEntry> scored(n);
  auto score_range = [&](std::uint64_t begin, std::uint64_t end) {
    for (std::uint64_t i = begin; i < end; ++i) {
      scored[i] = ScoredEntry{dot_product(q, keys.row(i)), i};
    }
  };

  std::size_t threads = std::min<std::size_t>(thread_cap(), (n + 4095) / 4096);
  if (threads <= 1) {
    score_range(0, n);
  } else {
    std::vector<std::thread> workers;
    workers.reserve(threads);
    std::uint64_t chunk = (n + threads - 1) / threads;
    for (std::size_t w = 0; w < threads; ++w) {
      std::uint64_t begin = w * chunk;
      std::uint64_t end = std::min<std::uint64_t>(begin + chunk, n);
      if (begin >= end) break;
      workers.emplace_back(score_range, begin, end);
    }
    for (auto& t : workers) t.join();
  }

  return select_top_k(scored, k, *datastore_);
}

// ---------------------------------------------------------------------------
// IvfIndex

namespace {

// Cosine of a unit-norm key row against an arbitrary centroid.
double centroid_cosine(std::span<const float> key, std::span<const double> centroid) {
  double dot = 0.0;
  double norm_sq = 0.0;
  for (std::size_t i = 0; i < key.size(); ++i) {
    dot += static_cast<double>(key[i]) * centroid[i];
    norm_sq += centroid[i] * centroid[i];
  }
  if (norm_sq == 0.0) return 0.0;
  return dot / std::sqrt(norm_sq);
}

}  // namespace

std::unique_ptr<IvfIndex> build_ivf(std::shared_ptr<const Datastore> datastore,
                                    const IvfParams& params) {
  if (!datastore || datastore->entry_count() == 0) {
    throw Error(ErrorCode::EmptyDatastore, "cannot index an empty datastore");
  }
  params.validate(datastore->entry_count());

  const RowMatrix& keys = datastore->normalized_keys();
  const std::uint64_t n = keys.rows;
  const std::size_t d = keys.cols;
  const std::size_t nc = params.n_clusters;

  // Seeded init: shuffle entry ids, take the first n_clusters as seeds.
  std::mt19937_64 rng(params.kmeans_seed);
  std::vector<std::uint64_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::uint64_t i = n; i > 1; --i) {
    std::uint64_t j = rng() % i;
    std::swap(order[i - 1], order[j]);
  }

  std::vector<std::vector<double>> centroids(nc, std::vector<double>(d, 0.0));
  for (std::size_t c = 0; c < nc; ++c) {
    auto row = keys.row(order[c]);
    for (std::size_t i = 0; i < d; ++i) centroids[c][i] = static_cast<double>(row[i]);
  }

  std::vector<std::int32_t> assignments(n, 0);
  auto assign_all = [&]() {
    for (std::uint64_t e = 0; e < n; ++e) {
      auto key = keys.row(e);
      double best = centroid_cosine(key, centroids[0]);
      std::size_t best_c = 0;
      for (std::size_t c = 1; c < nc; ++c) {
        double cos = centroid_cosine(key, centroids[c]);
        if (cos > best) {
          best = cos;
          best_c = c;
        }
      }
      assignments[e] = static_cast<std::int32_t>(best_c);
    }
  };

  std::vector<std::uint64_t> sizes(nc, 0);
  auto count_sizes = [&]() {
    std::fill(sizes.begin(), sizes.end(), 0);
    for (std::uint64_t e = 0; e < n; ++e) sizes[static_cast<std::size_t>(assignments[e])] += 1;
  };

  for (std::size_t iter = 0; iter < params.kmeans_iters; ++iter) {
    assign_all();
    count_sizes();

    // Empty-cluster repair: reseed from the farthest member of the
    // largest cluster, lowest ids on ties.
    for (std::size_t c = 0; c < nc; ++c) {
      if (sizes[c] != 0) continue;
      std::size_t largest = static_cast<std::size_t>(
          std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
      if (sizes[largest] <= 1) continue;
      double worst_cos = 2.0;
      std::uint64_t worst_entry = 0;
      bool found = false;
      for (std::uint64_t e = 0; e < n; ++e) {
        if (assignments[e] != static_cast<std::int32_t>(largest)) continue;
        double cos = centroid_cosine(keys.row(e), centroids[largest]);
        if (!found || cos < worst_cos) {
          worst_cos = cos;
          worst_entry = e;
          found = true;
        }
      }
      assignments[worst_entry] = static_cast<std::int32_t>(c);
      sizes[largest] -= 1;
      sizes[c] += 1;
      auto row = keys.row(worst_entry);
      for (std::size_t i = 0; i < d; ++i) centroids[c][i] = static_cast<double>(row[i]);
    }

    // Mean update over assigned members.
    std::vector<std::vector<double>> sums(nc, std::vector<double>(d, 0.0));
    for (std::uint64_t e = 0; e < n; ++e) {
      auto key = keys.row(e);
      auto& sum = sums[static_cast<std::size_t>(assignments[e])];
      for (std::size_t i = 0; i < d; ++i) sum[i] += static_cast<double>(key[i]);
    }
    for (std::size_t c = 0; c < nc; ++c) {
      if (sizes[c] == 0) continue;
      for (std::size_t i = 0; i < d; ++i) {
        centroids[c][i] = sums[c][i] / static_cast<double>(sizes[c]);
      }
    }
  }

  auto index = std::unique_ptr<IvfIndex>(new IvfIndex());
  index->datastore_ = std::move(datastore);
  index->params_ = params;
  index->centroids_ = RowMatrix(nc, d);
  for (std::size_t c = 0; c < nc; ++c) {
    for (std::size_t i = 0; i < d; ++i) {
      index->centroids_.at(c, i) = static_cast<float>(centroids[c][i]);
    }
  }
  // Final assignment against the stored float32 centroids so that a
  // saved-and-reloaded index behaves identically.
  for (std::uint64_t e = 0; e < keys.rows; ++e) {
    auto key = keys.row(e);
    double best = cosine_similarity(key, index->centroids_.row(0));
    std::size_t best_c = 0;
    for (std::size_t c = 1; c < nc; ++c) {
      double cos = cosine_similarity(key, index->centroids_.row(c));
      if (cos > best) {
        best = cos;
        best_c = c;
      }
    }
    assignments[e] = static_cast<std::int32_t>(best_c);
  }
  index->assignments_ = std::move(assignments);
  index->rebuild_cells();
  return index;
}

void IvfIndex::rebuild_cells() {
  cells_.assign(centroids_.rows, {});
  for (std::uint64_t e = 0; e < assignments_.size(); ++e) {
    std::int32_t c = assignments_[e];
    if (c < 0 || static_cast<std::size_t>(c) >= cells_.size()) {
      throw Error(ErrorCode::CorruptFile, "IVF assignment references a missing cluster");
    }
    cells_[static_cast<std::size_t>(c)].push_back(static_cast<std::uint32_t>(e));
  }
}

std::size_t IvfIndex::dim() const { return datastore_->dim(); }
std::uint64_t IvfIndex::entry_count() const { return datastore_->entry_count(); }

std::vector<Neighbor> IvfIndex::search(std::span<const float> query, std::size_t k) const {
  return search_probes(query, k, params_.n_probe);
}

std::vector<Neighbor> IvfIndex::search_probes(std::span<const float> query, std::size_t k,
                                              std::size_t n_probe) const {
  if (query.size() != dim()) {
    throw Error(ErrorCode::DimensionMismatch, "query dimension does not match index");
  }
  if (k < 1 || n_probe < 1) {
    throw Error(ErrorCode::InvalidParams, "k and n_probe must be at least 1");
  }
  n_probe = std::min(n_probe, cells_.size());

  std::vector<double> q = normalize_query(query);

  // Rank cells by centroid cosine, ties by cluster id.
  std::vector<ScoredEntry> cell_scores(cells_.size());
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    auto centroid = centroids_.row(c);
    double norm = l2_norm(centroid);
    double cos = 0.0;
    if (norm != 0.0) {
      cos = dot_product(q, centroid) / norm;
    }
    cell_scores[c] = ScoredEntry{cos, c};
  }
  std::partial_sort(cell_scores.begin(),
                    cell_scores.begin() + static_cast<std::ptrdiff_t>(n_probe),
                    cell_scores.end(), better);

  const RowMatrix& keys = datastore_->normalized_keys();
  std::vector<ScoredEntry> scored;
  for (std::size_t p = 0; p < n_probe; ++p) {
    for (std::uint32_t e : cells_[static_cast<std::size_t>(cell_scores[p].index)]) {
      scored.push_back(ScoredEntry{dot_product(q, keys.row(e)), e});
    }
  }
  return select_top_k(scored, k, *datastore_);
}

void save_ivf(const IvfIndex& index, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  }
  write_tensor(out, matrix_to_tensor(index.centroids()));
  TensorData assignments;
  assignments.dtype = kDtypeInt32;
  assignments.dims = {index.assignments().size()};
  assignments.i32 = index.assignments();
  write_tensor(out, assignments);
}

std::unique_ptr<IvfIndex> load_ivf(std::shared_ptr<const Datastore> datastore,
                                   const std::filesystem::path& path) {
  if (!datastore || datastore->entry_count() == 0) {
    throw Error(ErrorCode::EmptyDatastore, "cannot attach an index to an empty datastore");
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  }
  TensorData centroid_tensor = read_tensor(in);
  TensorData assignment_tensor = read_tensor(in);
  if (assignment_tensor.dtype != kDtypeInt32 || assignment_tensor.dims.size() != 1) {
    throw Error(ErrorCode::CorruptFile, "ivf.bin assignment tensor malformed");
  }

  auto index = std::unique_ptr<IvfIndex>(new IvfIndex());
  index->datastore_ = std::move(datastore);
  index->centroids_ = tensor_to_matrix(centroid_tensor);
  index->assignments_ = std::move(assignment_tensor.i32);
  if (index->centroids_.cols != index->datastore_->dim() ||
      index->assignments_.size() != index->datastore_->entry_count()) {
    throw Error(ErrorCode::CorruptFile, "ivf.bin does not match the datastore");
  }
  index->params_.n_clusters = index->centroids_.rows;
  index->params_.n_probe = std::max<std::size_t>(1, (index->params_.n_clusters + 7) / 8);
  index->rebuild_cells();
  return index;
}

}  // namespace larag
