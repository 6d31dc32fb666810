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

// Test-only reference implementations. Everything here is brute force on
// purpose and independent of the library's search/alignment code paths.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <tuple>
#include <vector>

#include "larag/alignment.hpp"
#include "larag/datastore.hpp"
#include "larag/matrix.hpp"

namespace larag::test {

// ---------------------------------------------------------------------------
// Exhaustive CTC path enumeration

struct CtcEnumeration {
  bool feasible = false;
  double best_logprob = 0.0;
  std::vector<std::vector<std::size_t>> best_paths;  // all argmax state paths
};

inline void enumerate_ctc_paths(const LogPosteriorGrid& grid, const Transcript& transcript,
                                std::size_t t, std::size_t state, double acc,
                                std::vector<std::size_t>& states, CtcEnumeration& out) {
  const std::size_t T = grid.frames;
  const std::size_t L = transcript.tokens.size();
  const std::size_t S = 2 * L + 1;
  auto label = [&](std::size_t s) {
    return s % 2 == 0 ? grid.blank_id : transcript.tokens[s / 2];
  };
  double emission = static_cast<double>(grid.values.at(t, static_cast<std::size_t>(label(state))));
  double total = acc + emission;
  states.push_back(state);

  if (t + 1 == T) {
    if (state == S - 1 || state == S - 2) {
      if (!out.feasible || total > out.best_logprob) {
        out.feasible = true;
        out.best_logprob = total;
        out.best_paths.clear();
        out.best_paths.push_back(states);
      } else if (total == out.best_logprob) {
        out.best_paths.push_back(states);
      }
    }
  } else {
    enumerate_ctc_paths(grid, transcript, t + 1, state, total, states, out);
    if (state + 1 < S) {
      enumerate_ctc_paths(grid, transcript, t + 1, state + 1, total, states, out);
    }
    if (state + 2 < S && (state + 2) % 2 == 1 &&
        transcript.tokens[(state + 2) / 2] != transcript.tokens[state / 2]) {
      // skip: only from a token state over a blank to a distinct token
      enumerate_ctc_paths(grid, transcript, t + 1, state + 2, total, states, out);
    }
  }
  states.pop_back();
}

inline CtcEnumeration enumerate_ctc(const LogPosteriorGrid& grid, const Transcript& transcript) {
  CtcEnumeration out;
  std::vector<std::size_t> states;
  enumerate_ctc_paths(grid, transcript, 0, 0, 0.0, states, out);
  enumerate_ctc_paths(grid, transcript, 0, 1, 0.0, states, out);
  return out;
}

// Collapse a state path into tokens: merge repeats, drop blanks.
inline std::vector<std::int32_t> collapse_path(const std::vector<std::size_t>& states,
                                               const Transcript& transcript) {
  std::vector<std::int32_t> tokens;
  std::size_t prev_state = static_cast<std::size_t>(-1);
  for (std::size_t s : states) {
    if (s % 2 == 1 && s != prev_state) {
      tokens.push_back(transcript.tokens[s / 2]);
    }
    prev_state = s;
  }
  return tokens;
}

// ---------------------------------------------------------------------------
// Brute-force cosine scan

struct OracleHit {
  double similarity;
  std::uint64_t entry;
};

inline std::vector<OracleHit> brute_force_scan(const Datastore& datastore,
                                               std::span<const float> query) {
  double norm = 0.0;
  for (float x : query) norm += static_cast<double>(x) * static_cast<double>(x);
  norm = std::sqrt(norm);
  std::vector<double> q(query.size(), 0.0);
  if (norm != 0.0) {
    for (std::size_t i = 0; i < query.size(); ++i) {
      q[i] = static_cast<double>(query[i]) / norm;
    }
  }
  std::vector<OracleHit> hits;
  hits.reserve(datastore.entry_count());
  for (std::uint64_t e = 0; e < datastore.entry_count(); ++e) {
    auto key = datastore.normalized_key(e);
    double dot = 0.0;
    for (std::size_t i = 0; i < key.size(); ++i) dot += q[i] * static_cast<double>(key[i]);
    hits.push_back(OracleHit{dot, e});
  }
  std::sort(hits.begin(), hits.end(), [](const OracleHit& a, const OracleHit& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.entry < b.entry;
  });
  return hits;
}

inline std::vector<OracleHit> brute_force_topk(const Datastore& datastore,
                                               std::span<const float> query, std::size_t k) {
  std::vector<OracleHit> hits = brute_force_scan(datastore, query);
  if (hits.size() > k) hits.resize(k);
  return hits;
}

// Grouped Eq.-style scores: for each kept query token, every entry in its
// top-k contributes its cosine to the owning sequence's sum.
struct OracleGroup {
  double raw = 0.0;
  std::size_t hits = 0;
};

inline std::map<std::uint64_t, OracleGroup> brute_force_group_scores(
    const Datastore& datastore, const RowMatrix& kept_embeddings, std::size_t k) {
  std::map<std::uint64_t, OracleGroup> groups;
  for (std::size_t r = 0; r < kept_embeddings.rows; ++r) {
    for (const OracleHit& hit : brute_force_topk(datastore, kept_embeddings.row(r), k)) {
      DatastoreEntry entry = datastore.entry(hit.entry);
      OracleGroup& g = groups[entry.seq_id];
      g.raw += hit.similarity;
      g.hits += 1;
    }
  }
  return groups;
}

// ---------------------------------------------------------------------------
// Edit-distance oracles

template <typename Seq>
inline std::size_t levenshtein(const Seq& a, const Seq& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1), prev[j] + 1,
                         cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

// All (substitutions, insertions, deletions) splits that realize the
// minimum edit distance from `ref` to `hyp`.
inline std::set<std::tuple<std::size_t, std::size_t, std::size_t>> edit_decompositions(
    const std::u32string& ref, const std::u32string& hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  std::vector<std::vector<std::size_t>> dist(n + 1, std::vector<std::size_t>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) dist[i][0] = i;
  for (std::size_t j = 0; j <= m; ++j) dist[0][j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      dist[i][j] = std::min({dist[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1),
                             dist[i - 1][j] + 1, dist[i][j - 1] + 1});
    }
  }

  using Triple = std::tuple<std::size_t, std::size_t, std::size_t>;  // (S, I, D)
  std::vector<std::vector<std::set<Triple>>> sets(n + 1,
                                                  std::vector<std::set<Triple>>(m + 1));
  sets[0][0].insert({0, 0, 0});
  for (std::size_t j = 1; j <= m; ++j) sets[0][j].insert({0, j, 0});
  for (std::size_t i = 1; i <= n; ++i) sets[i][0].insert({0, 0, i});
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      std::size_t sub_cost = ref[i - 1] == hyp[j - 1] ? 0 : 1;
      if (dist[i][j] == dist[i - 1][j - 1] + sub_cost) {
        for (auto [s, ins, del] : sets[i - 1][j - 1]) {
          sets[i][j].insert({s + sub_cost, ins, del});
        }
      }
      if (dist[i][j] == dist[i - 1][j] + 1) {
        for (auto [s, ins, del] : sets[i - 1][j]) sets[i][j].insert({s, ins, del + 1});
      }
      if (dist[i][j] == dist[i][j - 1] + 1) {
        for (auto [s, ins, del] : sets[i][j - 1]) sets[i][j].insert({s, ins + 1, del});
      }
    }
  }
  return sets[n][m];
}

// ---------------------------------------------------------------------------
// Generators

inline LogPosteriorGrid random_grid(std::size_t frames, std::size_t vocab,
                                    std::mt19937_64& rng) {
  std::uniform_real_distribution<double> logits(-2.0, 2.0);
  LogPosteriorGrid grid;
  grid.frames = frames;
  grid.vocab_size = vocab;
  grid.blank_id = 0;
  grid.values = RowMatrix(frames, vocab);
  for (std::size_t t = 0; t < frames; ++t) {
    std::vector<double> row(vocab);
    double max_val = -1e300;
    for (std::size_t v = 0; v < vocab; ++v) {
      row[v] = logits(rng);
      max_val = std::max(max_val, row[v]);
    }
    double sum = 0.0;
    for (double x : row) sum += std::exp(x - max_val);
    double lse = max_val + std::log(sum);
    for (std::size_t v = 0; v < vocab; ++v) {
      grid.values.at(t, v) = static_cast<float>(row[v] - lse);
    }
  }
  return grid;
}

inline Transcript random_transcript(std::size_t length, std::size_t vocab,
                                    std::mt19937_64& rng) {
  std::uniform_int_distribution<std::int32_t> tokens(1, static_cast<std::int32_t>(vocab - 1));
  Transcript t;
  t.tokens.resize(length);
  for (auto& tok : t.tokens) tok = tokens(rng);
  return t;
}

inline RowMatrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                               double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  RowMatrix m(rows, cols);
  for (float& x : m.data) x = static_cast<float>(normal(rng));
  return m;
}

inline std::vector<CorpusItem> random_tokenized_corpus(std::size_t sequences,
                                                       std::size_t max_len, std::size_t dim,
                                                       std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> lengths(1, max_len);
  std::uniform_int_distribution<std::int32_t> tokens(1, 60);
  std::vector<CorpusItem> items;
  for (std::size_t s = 0; s < sequences; ++s) {
    CorpusItem item;
    item.utterance_id = "utt" + std::to_string(s);
    item.source_tag = s % 2 == 0 ? "corpusA" : "corpusB";
    item.tokenized = true;
    std::size_t len = lengths(rng);
    item.embeddings = random_matrix(len, dim, rng);
    item.tokens.resize(len);
    for (auto& tok : item.tokens) tok = tokens(rng);
    item.text = "utterance " + std::to_string(s);
    items.push_back(std::move(item));
  }
  return items;
}

}  // namespace larag::test
