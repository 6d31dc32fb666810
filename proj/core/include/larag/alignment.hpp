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
#include <string>
#include <vector>

#include "larag/matrix.hpp"

namespace larag {

/// Per-frame log-probabilities over a vocabulary that includes the CTC
/// blank. Rows must be normalized distributions in the log domain.
struct LogPosteriorGrid {
  std::size_t frames = 0;      // T
  std::size_t vocab_size = 0;  // V
  std::int32_t blank_id = 0;
  RowMatrix values;  // T x V, natural-log probabilities

  /// Checks the type invariants: each row's logsumexp within 1e-3 of 0,
  /// no NaN (negative infinity is fine), blank_id within the vocabulary.
  void validate() const;
};

struct HiddenStateMatrix {
  std::size_t frames = 0;
  std::size_t dim = 0;
  RowMatrix values;  // T x d

  void validate() const;
};

struct Transcript {
  std::vector<std::int32_t> tokens;  // length L >= 1, no blanks
  std::optional<std::string> text;

  void validate(const LogPosteriorGrid& grid) const;
};

/// Frame-synchronous path through the blank-expanded label sequence
/// z = [blank, y1, blank, ..., yL, blank]. states[t] indexes into z
/// (even = blank, odd = token state); emission_logprobs[t] is the
/// log-probability the path consumed at frame t.
struct FramePath {
  std::vector<std::size_t> states;
  std::vector<double> emission_logprobs;
};

struct TokenSpan {
  std::int32_t token_id = 0;
  std::size_t frame_start = 0;
  std::size_t frame_end = 0;  // exclusive
};

struct TokenAlignment {
  std::vector<TokenSpan> spans;  // exactly L, in transcript order
  double path_logprob = 0.0;
};

/// Max-probability CTC lattice, T x (2L+1), computed in double.
/// Unreachable cells hold -infinity.
struct Trellis {
  std::size_t frames = 0;
  std::size_t states = 0;  // 2L + 1
  std::vector<double> values;

  double at(std::size_t t, std::size_t s) const { return values[t * states + s]; }
  double& at(std::size_t t, std::size_t s) { return values[t * states + s]; }
};

enum class Pooling { kMean, kFirst, kMax };

Pooling pooling_from_string(const std::string& name);
const char* pooling_name(Pooling pooling);

/// Builds the forced-alignment trellis over the blank-expanded transcript.
/// Transitions are stay (s -> s), advance (s-1 -> s) and skip (s-2 -> s,
/// only when z_s is a token distinct from z_{s-2}). Throws
/// InfeasibleAlignment when T < L or no legal complete path exists.
Trellis build_trellis(const LogPosteriorGrid& grid, const Transcript& transcript);

/// Backtracks the best path from the better terminal state. Ties prefer
/// ending on the final token over the final blank, and prefer stay over
/// advance over skip among predecessors, so the result is deterministic.
FramePath best_path(const Trellis& trellis, const LogPosteriorGrid& grid,
                    const Transcript& transcript);

/// Collapses the path into one frame span per transcript token. Blank
/// frames belong to no span; a repeated token separated by blank yields
/// separate spans.
TokenAlignment token_spans(const FramePath& path, const Transcript& transcript);

/// Pools hidden-state rows over each token span into one embedding per
/// token; output is L x d.
RowMatrix extract_token_embeddings(const HiddenStateMatrix& hidden,
                                   const TokenAlignment& alignment,
                                   Pooling pooling);

/// Full tokenizer pass: trellis, backtrack, span collapse, pooling.
struct AlignedUtterance {
  TokenAlignment alignment;
  RowMatrix embeddings;  // L x d
};

AlignedUtterance align_and_embed(const LogPosteriorGrid& grid,
                                 const HiddenStateMatrix& hidden,
                                 const Transcript& transcript, Pooling pooling);

}  // namespace larag
