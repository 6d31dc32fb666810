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

#include "larag/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "larag/errors.hpp"

namespace larag {

void NBestList::validate() const {
  if (hypotheses.empty()) {
    throw Error(ErrorCode::InvalidParams, "N-best list is empty");
  }
  if (!scores.empty() && scores.size() != hypotheses.size()) {
    throw Error(ErrorCode::LengthMismatch, "N-best scores do not match hypothesis count");
  }
}

bool AlignedColumn::unanimous() const {
  for (const auto& cell : cells) {
    if (cell.size() != 1 || cell[0] != cells[0][0]) return false;
  }
  return true;
}

std::size_t token_edit_distance(std::span<const std::int32_t> a,
                                std::span<const std::int32_t> b) {
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

namespace {

enum class EditOp : std::uint8_t { kDiagonal, kDeletion, kInsertion };

// Backtraced alignment of `hyp` against anchor `ref`; ops in forward
// order. Tie preference: diagonal, then deletion (ref advances alone),
// then insertion.
std::vector<EditOp> edit_alignment(std::span<const std::int32_t> ref,
                                   std::span<const std::int32_t> hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  std::vector<std::size_t> dp((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return dp[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      std::size_t sub = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      at(i, j) = std::min({sub, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }

  std::vector<EditOp> ops;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 &&
        at(i, j) == at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      ops.push_back(EditOp::kDiagonal);
      --i;
      --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ops.push_back(EditOp::kDeletion);
      --i;
    } else {
      ops.push_back(EditOp::kInsertion);
      --j;
    }
  }
  std::reverse(ops.begin(), ops.end());
  return ops;
}

}  // namespace

AlignedNBest align_nbest(const NBestList& nbest) {
  nbest.validate();
  const auto& anchor = nbest.hypotheses[0];

  AlignedNBest aligned;
  aligned.n_hypotheses = nbest.size();
  aligned.columns.resize(anchor.size());
  for (std::size_t c = 0; c < anchor.size(); ++c) {
    aligned.columns[c].cells.resize(nbest.size());
    aligned.columns[c].cells[0] = {anchor[c]};
  }

  for (std::size_t h = 1; h < nbest.size(); ++h) {
    const auto& hyp = nbest.hypotheses[h];
    if (anchor.empty()) continue;  // nothing to anchor to
    std::vector<EditOp> ops = edit_alignment(anchor, hyp);
    std::size_t i = 0, j = 0;
    std::vector<std::int32_t> pending;  // insertions awaiting their anchor
    for (EditOp op : ops) {
      switch (op) {
        case EditOp::kDiagonal:
          pending.push_back(hyp[j]);
          aligned.columns[i].cells[h] = std::move(pending);
          pending.clear();
          ++i;
          ++j;
          break;
        case EditOp::kDeletion:
          aligned.columns[i].cells[h] = std::move(pending);
          pending.clear();
          ++i;
          break;
        case EditOp::kInsertion:
          pending.push_back(hyp[j]);
          ++j;
          break;
      }
    }
    // Insertions past the last anchor position attach to the final column.
    if (!pending.empty()) {
      auto& last = aligned.columns.back().cells[h];
      last.insert(last.end(), pending.begin(), pending.end());
    }
  }
  return aligned;
}

PrunedQuery prune_query(const RowMatrix& query_embeddings, const AlignedNBest& aligned) {
  if (query_embeddings.rows != aligned.columns.size()) {
    throw Error(ErrorCode::LengthMismatch,
                "query has " + std::to_string(query_embeddings.rows) +
                    " token embeddings but hypothesis 0 has " +
                    std::to_string(aligned.columns.size()) + " tokens");
  }

  PrunedQuery pruned;
  for (std::size_t t = 0; t < aligned.columns.size(); ++t) {
    bool drop = aligned.n_hypotheses >= 2 && aligned.columns[t].unanimous();
    if (!drop) pruned.kept_positions.push_back(t);
  }
  pruned.embeddings = RowMatrix(pruned.kept_positions.size(), query_embeddings.cols);
  for (std::size_t r = 0; r < pruned.kept_positions.size(); ++r) {
    auto src = query_embeddings.row(pruned.kept_positions[r]);
    std::copy(src.begin(), src.end(), pruned.embeddings.row(r).begin());
  }
  return pruned;
}

PrunedQuery unpruned_query(const RowMatrix& query_embeddings) {
  PrunedQuery pruned;
  pruned.kept_positions.resize(query_embeddings.rows);
  std::iota(pruned.kept_positions.begin(), pruned.kept_positions.end(), std::size_t{0});
  pruned.embeddings = query_embeddings;
  return pruned;
}

std::vector<ExampleCandidate> retrieve(const Datastore& datastore, const SearchIndex& index,
                                       const PrunedQuery& pruned,
                                       const RetrieveOptions& options) {
  if (datastore.sequence_count() == 0) {
    throw Error(ErrorCode::EmptyDatastore, "retrieval needs a non-empty datastore");
  }
  if (pruned.kept_positions.empty()) {
    return {};
  }
  if (pruned.embeddings.cols != index.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "query embedding dim does not match index");
  }

  struct Group {
    double raw = 0.0;
    std::size_t hits = 0;
  };
  std::map<std::uint64_t, Group> groups;  // ordered: deterministic iteration

  for (std::size_t r = 0; r < pruned.embeddings.rows; ++r) {
    for (const Neighbor& nb : index.search(pruned.embeddings.row(r), options.k)) {
      if (options.exclude_seq_ids.contains(nb.seq_id)) continue;
      Group& g = groups[nb.seq_id];
      g.raw += nb.similarity;
      g.hits += 1;
    }
  }

  const double kept = static_cast<double>(pruned.kept_positions.size());
  std::vector<ExampleCandidate> candidates;
  candidates.reserve(groups.size());
  for (const auto& [seq_id, group] : groups) {
    double normalized = group.raw / kept;
    if (normalized < options.threshold) continue;
    candidates.push_back(ExampleCandidate{seq_id, normalized, group.raw, group.hits});
  }

  std::sort(candidates.begin(), candidates.end(),
            [](const ExampleCandidate& a, const ExampleCandidate& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.seq_id < b.seq_id;
            });
  if (candidates.size() > options.max_examples) {
    candidates.resize(options.max_examples);
  }
  return candidates;
}

std::vector<ExampleCandidate> retrieve_random(const Datastore& datastore, std::size_t count,
                                              std::uint64_t seed) {
  const std::uint64_t n = datastore.sequence_count();
  if (n < count) {
    throw Error(ErrorCode::InsufficientSequences,
                "asked for " + std::to_string(count) + " of " + std::to_string(n) +
                    " sequences");
  }
  std::vector<std::uint64_t> ids(n);
  std::iota(ids.begin(), ids.end(), std::uint64_t{0});
  std::mt19937_64 rng(seed);
  for (std::uint64_t i = n; i > 1; --i) {
    std::uint64_t j = rng() % i;
    std::swap(ids[i - 1], ids[j]);
  }
  std::vector<ExampleCandidate> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(ExampleCandidate{ids[i], 0.0, 0.0, 0});
  }
  return out;
}

namespace {

std::vector<double> mean_row(const RowMatrix& m) {
  std::vector<double> mean(m.cols, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols; ++c) mean[c] += static_cast<double>(row[c]);
  }
  for (double& x : mean) x /= static_cast<double>(m.rows);
  return mean;
}

double mean_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<ExampleCandidate> take_top(std::vector<ExampleCandidate>& ranked,
                                       std::size_t count) {
  std::sort(ranked.begin(), ranked.end(),
            [](const ExampleCandidate& a, const ExampleCandidate& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.seq_id < b.seq_id;
            });
  if (ranked.size() > count) ranked.resize(count);
  return ranked;
}

}  // namespace

std::vector<ExampleCandidate> retrieve_seq_embedding(const Datastore& datastore,
                                                     const RowMatrix& query_embeddings,
                                                     std::size_t count) {
  if (datastore.sequence_count() == 0) {
    throw Error(ErrorCode::EmptyDatastore, "retrieval needs a non-empty datastore");
  }
  if (query_embeddings.rows == 0) return {};
  if (query_embeddings.cols != datastore.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "query embedding dim does not match datastore");
  }

  std::vector<double> query_mean = mean_row(query_embeddings);
  std::vector<ExampleCandidate> ranked;
  ranked.reserve(datastore.sequence_count());
  for (const SequenceRecord& seq : datastore.sequences()) {
    double cos = mean_cosine(query_mean, mean_row(seq.embeddings));
    ranked.push_back(ExampleCandidate{seq.seq_id, cos, cos, 1});
  }
  return take_top(ranked, count);
}

std::vector<ExampleCandidate> retrieve_text(const Datastore& datastore,
                                            const std::vector<std::int32_t>& hypothesis0,
                                            std::size_t count) {
  if (datastore.sequence_count() == 0) {
    throw Error(ErrorCode::EmptyDatastore, "retrieval needs a non-empty datastore");
  }
  struct Scored {
    std::uint64_t seq_id;
    std::size_t dist;
    double score;
  };
  std::vector<Scored> ranked;
  ranked.reserve(datastore.sequence_count());
  for (const SequenceRecord& seq : datastore.sequences()) {
    std::size_t dist = token_edit_distance(hypothesis0, seq.tokens);
    std::size_t longest = std::max(hypothesis0.size(), seq.tokens.size());
    double score =
        longest == 0 ? 1.0 : 1.0 - static_cast<double>(dist) / static_cast<double>(longest);
    ranked.push_back(Scored{seq.seq_id, dist, score});
  }
  std::sort(ranked.begin(), ranked.end(), [](const Scored& a, const Scored& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    return a.seq_id < b.seq_id;
  });
  if (ranked.size() > count) ranked.resize(count);
  std::vector<ExampleCandidate> out;
  out.reserve(ranked.size());
  for (const Scored& s : ranked) {
    out.push_back(ExampleCandidate{s.seq_id, s.score, s.score, 1});
  }
  return out;
}

}  // namespace larag
