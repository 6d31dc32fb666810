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
#include <string>
#include <vector>

#include "larag/datastore.hpp"
#include "larag/retrieval.hpp"

namespace larag {

struct CerReport {
  std::size_t substitutions = 0;
  std::size_t insertions = 0;
  std::size_t deletions = 0;
  std::size_t ref_length = 0;
  double cer = 0.0;
};

/// Character error rate over unicode scalar sequences; may exceed 1 when
/// insertions dominate. The (S, I, D) split is the canonical backtrace
/// decomposition (substitution preferred over deletion over insertion);
/// S + I + D always equals the edit distance.
CerReport cer(const std::u32string& hypothesis, const std::u32string& reference);

/// UTF-8 convenience overload.
CerReport cer_utf8(const std::string& hypothesis, const std::string& reference,
                   bool strip_whitespace = false);

/// Strict-ish UTF-8 decoding; malformed bytes decode to U+FFFD.
std::u32string decode_utf8(const std::string& text);

struct SynthCorpusParams {
  std::size_t n_base_sequences = 1;
  std::size_t tokens_per_sequence = 1;
  std::size_t dim = 2;
  std::size_t n_variants_per_base = 1;
  double noise_sigma = 0.0;  // expected noise-vector norm before renormalizing
  std::size_t vocab_size = 1;
  std::uint64_t seed = 0;

  // Hard-negative controls: distractor sequences copying `shared_tokens`
  // of their base's (embedding, token) pairs.
  std::size_t n_distractors_per_base = 0;
  std::size_t shared_tokens = 0;

  // Synthetic N-best lists attached to each query; with 1 hypothesis
  // pruning is vacuous.
  std::size_t n_best_hypotheses = 1;
  double nbest_disagree_prob = 0.0;

  void validate() const;
};

struct SynthQuery {
  std::string utterance_id;
  std::string text;
  RowMatrix embeddings;
  std::vector<std::int32_t> tokens;
  std::uint64_t ground_truth_seq_id = 0;
  NBestList nbest;
};

struct SynthCorpus {
  std::vector<CorpusItem> corpus;  // bases then distractors, pre-tokenized
  std::vector<SynthQuery> queries;
};

/// Deterministic planted-neighbor corpus: unit-norm token embeddings per
/// base, queries perturbed by per-token Gaussian noise and renormalized.
SynthCorpus synth_corpus(const SynthCorpusParams& params);

enum class RetrievalStrategy {
  kTokenLevel,
  kTokenLevelNoPrune,
  kRandom,
  kSeqEmbedding,
  kText,
};

RetrievalStrategy strategy_from_string(const std::string& name);
const char* strategy_name(RetrievalStrategy strategy);

struct StrategyResult {
  RetrievalStrategy strategy = RetrievalStrategy::kTokenLevel;
  std::size_t queries = 0;
  double recall_at_1 = 0.0;
  double recall_at_m = 0.0;
  double mean_rank = 0.0;  // misses count as M + 1
  double wall_ms = 0.0;
};

struct BenchmarkOptions {
  std::size_t k = 128;
  double threshold = 0.5;
  std::size_t max_examples = 4;
};

/// Runs each strategy over every query against a datastore built from
/// the corpus; recall is judged against the planted ground-truth base.
std::vector<StrategyResult> benchmark_retrieval(const SynthCorpus& corpus,
                                                const std::vector<RetrievalStrategy>& strategies,
                                                const BenchmarkOptions& options = {});

std::string format_benchmark_table(const std::vector<StrategyResult>& results);

}  // namespace larag
