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
#include <optional>
#include <unordered_set>
#include <vector>

#include "larag/datastore.hpp"
#include "larag/matrix.hpp"
#include "larag/vector_index.hpp"

namespace larag {

/// ASR N-best transcription hypotheses, best first. Hypothesis 0 is the
/// primary hypothesis the query embeddings are aligned to.
struct NBestList {
  std::string utterance_id;
  std::vector<std::vector<std::int32_t>> hypotheses;
  std::vector<double> scores;  // optional, parallel to hypotheses when present

  std::size_t size() const { return hypotheses.size(); }
  void validate() const;
};

/// Hypotheses token-aligned to hypothesis 0, one column per hypothesis-0
/// position. A cell is the list of hypothesis-h tokens at that column:
/// empty = gap, one = aligned token, several = insertions attached to the
/// following anchor (trailing insertions attach to the last column).
struct AlignedColumn {
  std::vector<std::vector<std::int32_t>> cells;  // size = hypothesis count

  /// True when every hypothesis has exactly one identical token here.
  bool unanimous() const;
};

struct AlignedNBest {
  std::size_t n_hypotheses = 0;
  std::vector<AlignedColumn> columns;  // one per hypothesis-0 token
};

/// Query positions that survived consensus pruning, with their embeddings.
struct PrunedQuery {
  std::vector<std::size_t> kept_positions;  // strictly increasing
  RowMatrix embeddings;                     // |kept| x d
};

/// A retrieved sequence with its grouped token-score sum. `score` is the
/// length-normalized group sum (raw / kept query tokens); `raw_score` is
/// the plain sum. `hit_count` counts contributing (query token, neighbor)
/// pairs; baseline retrievers report sequence-level pseudo-hits.
struct ExampleCandidate {
  std::uint64_t seq_id = 0;
  double score = 0.0;
  double raw_score = 0.0;
  std::size_t hit_count = 0;
};

/// Token-aligns every hypothesis to hypothesis 0 by minimum edit distance
/// over token ids (unit costs).
AlignedNBest align_nbest(const NBestList& nbest);

/// Drops query positions whose aligned column is unanimous across N >= 2
/// hypotheses; gaps, insertions, and disagreement keep a position. With
/// N = 1 nothing is pruned.
PrunedQuery prune_query(const RowMatrix& query_embeddings, const AlignedNBest& aligned);

/// Takes all positions, skipping consensus pruning.
PrunedQuery unpruned_query(const RowMatrix& query_embeddings);

struct RetrieveOptions {
  std::size_t k = 128;
  double threshold = 0.5;
  std::size_t max_examples = 4;
  std::unordered_set<std::uint64_t> exclude_seq_ids;  // leave-one-out
};

/// Token-level retrieval: per-token kNN, hits grouped by owning sequence,
/// group scores summed, thresholded on the normalized score, top-M
/// returned (normalized score descending, ties by seq_id). An empty query
/// returns no candidates.
std::vector<ExampleCandidate> retrieve(const Datastore& datastore, const SearchIndex& index,
                                       const PrunedQuery& pruned,
                                       const RetrieveOptions& options = {});

/// Baseline: uniform sample of M sequences without replacement.
std::vector<ExampleCandidate> retrieve_random(const Datastore& datastore, std::size_t count,
                                              std::uint64_t seed);

/// Baseline: rank sequences by cosine between mean query-token embedding
/// and mean sequence-token embedding.
std::vector<ExampleCandidate> retrieve_seq_embedding(const Datastore& datastore,
                                                     const RowMatrix& query_embeddings,
                                                     std::size_t count);

/// Baseline: rank sequences by token-level edit distance to hypothesis 0;
/// score = 1 - dist / max(len).
std::vector<ExampleCandidate> retrieve_text(const Datastore& datastore,
                                            const std::vector<std::int32_t>& hypothesis0,
                                            std::size_t count);

/// Unit-cost edit distance between token sequences.
std::size_t token_edit_distance(std::span<const std::int32_t> a, std::span<const std::int32_t> b);

}  // namespace larag
