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

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "larag/datastore.hpp"
#include "larag/matrix.hpp"

namespace larag {

/// One kNN hit. Results are sorted by similarity descending, ties broken
/// by (seq_id, position) ascending.
struct Neighbor {
  std::uint64_t seq_id = 0;
  std::size_t position = 0;
  double similarity = 0.0;
};

struct IvfParams {
  std::size_t n_clusters = 0;
  std::size_t n_probe = 0;
  std::uint64_t kmeans_seed = 0;
  std::size_t kmeans_iters = 25;

  /// Default sizing: n_clusters = floor(sqrt(entries)), n_probe =
  /// ceil(n_clusters / 8), both at least 1.
  static IvfParams defaults(std::uint64_t entry_count, std::uint64_t seed = 0);

  void validate(std::uint64_t entry_count) const;
};

class SearchIndex {
 public:
  virtual ~SearchIndex() = default;

  /// Top-k cosine neighbors of `query`. A zero-norm query scores 0
  /// against everything.
  virtual std::vector<Neighbor> search(std::span<const float> query, std::size_t k) const = 0;

  virtual std::size_t dim() const = 0;
  virtual std::uint64_t entry_count() const = 0;
};

/// Exhaustive scan over all normalized keys; the oracle backend. Scans
/// are chunked over threads (capped by LA_RAG_THREADS) with results
/// identical to the sequential scan.
class ExactIndex : public SearchIndex {
 public:
  std::vector<Neighbor> search(std::span<const float> query, std::size_t k) const override;
  std::size_t dim() const override;
  std::uint64_t entry_count() const override;

  friend std::unique_ptr<ExactIndex> build_exact(std::shared_ptr<const Datastore> datastore);

 private:
  std::shared_ptr<const Datastore> datastore_;
};

/// Inverted-file index: spherical k-means cells over normalized keys,
/// probing the n_probe nearest cells at query time.
class IvfIndex : public SearchIndex {
 public:
  std::vector<Neighbor> search(std::span<const float> query, std::size_t k) const override;
  std::vector<Neighbor> search_probes(std::span<const float> query, std::size_t k,
                                      std::size_t n_probe) const;
  std::size_t dim() const override;
  std::uint64_t entry_count() const override;

  const IvfParams& params() const { return params_; }
  const RowMatrix& centroids() const { return centroids_; }
  const std::vector<std::int32_t>& assignments() const { return assignments_; }

  friend std::unique_ptr<IvfIndex> build_ivf(std::shared_ptr<const Datastore> datastore,
                                             const IvfParams& params);
  friend std::unique_ptr<IvfIndex> load_ivf(std::shared_ptr<const Datastore> datastore,
                                            const std::filesystem::path& path);

 private:
  void rebuild_cells();

  std::shared_ptr<const Datastore> datastore_;
  IvfParams params_;
  RowMatrix centroids_;                        // n_clusters x d
  std::vector<std::int32_t> assignments_;      // entry_count
  std::vector<std::vector<std::uint32_t>> cells_;
};

std::unique_ptr<ExactIndex> build_exact(std::shared_ptr<const Datastore> datastore);
std::unique_ptr<IvfIndex> build_ivf(std::shared_ptr<const Datastore> datastore,
                                    const IvfParams& params);

/// ivf.bin: a centroid tensor (float32) followed by an assignment tensor
/// (int32), both in the LARG record format.
void save_ivf(const IvfIndex& index, const std::filesystem::path& path);
std::unique_ptr<IvfIndex> load_ivf(std::shared_ptr<const Datastore> datastore,
                                   const std::filesystem::path& path);

/// Thread cap for internal parallelism: LA_RAG_THREADS when set, else
/// hardware concurrency, always at least 1.
std::size_t thread_cap();

}  // namespace larag
