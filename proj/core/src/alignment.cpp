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

#include "larag/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "larag/errors.hpp"

namespace larag {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Label at expanded state s: even states are blank, odd states are tokens.
inline std::int32_t state_label(std::size_t s, const Transcript& transcript,
                                std::int32_t blank_id) {
  return (s % 2 == 0) ? blank_id : transcript.tokens[s / 2];
}

inline bool skip_allowed(std::size_t s, const Transcript& transcript) {
  // Skip lands only on token states and must not jump over the separating
  // blank between two equal tokens.
  if (s % 2 == 0 || s < 2) return false;
  return transcript.tokens[s / 2] != transcript.tokens[s / 2 - 1];
}

}  // namespace

void LogPosteriorGrid::validate() const {
  if (frames == 0 || vocab_size == 0) {
    throw Error(ErrorCode::InvalidParams, "log-posterior grid has no frames or vocab");
  }
  if (values.rows != frames || values.cols != vocab_size) {
    throw Error(ErrorCode::DimensionMismatch, "grid matrix shape does not match frames x vocab");
  }
  if (blank_id < 0 || static_cast<std::size_t>(blank_id) >= vocab_size) {
    throw Error(ErrorCode::InvalidParams, "blank_id outside vocabulary");
  }
  for (std::size_t t = 0; t < frames; ++t) {
    auto row = values.row(t);
    double max_val = kNegInf;
    for (float x : row) {
      if (std::isnan(x)) {
        throw Error(ErrorCode::InvalidParams, "grid contains NaN");
      }
      if (x > 0.0f && std::isinf(x)) {
        throw Error(ErrorCode::InvalidParams, "grid contains +inf");
      }
      max_val = std::max(max_val, static_cast<double>(x));
    }
    if (max_val == kNegInf) {
      throw Error(ErrorCode::InvalidParams, "grid row is all -inf");
    }
    double sum = 0.0;
    for (float x : row) {
      sum += std::exp(static_cast<double>(x) - max_val);
    }
    double lse = max_val + std::log(sum);
    if (std::abs(lse) > 1e-3) {
      throw Error(ErrorCode::InvalidParams,
                  "grid row " + std::to_string(t) + " is not a normalized distribution");
    }
  }
}

void HiddenStateMatrix::validate() const {
  if (values.rows != frames || values.cols != dim) {
    throw Error(ErrorCode::DimensionMismatch, "hidden-state matrix shape mismatch");
  }
  if (!all_finite(values.data)) {
    throw Error(ErrorCode::InvalidParams, "hidden states contain non-finite values");
  }
}

void Transcript::validate(const LogPosteriorGrid& grid) const {
  if (tokens.empty()) {
    throw Error(ErrorCode::InvalidParams, "transcript is empty");
  }
  for (std::int32_t tok : tokens) {
    if (tok == grid.blank_id) {
      throw Error(ErrorCode::InvalidParams, "transcript contains the blank token");
    }
    if (tok < 0 || static_cast<std::size_t>(tok) >= grid.vocab_size) {
      throw Error(ErrorCode::InvalidParams, "transcript token outside vocabulary");
    }
  }
}

Trellis build_trellis(const LogPosteriorGrid& grid, const Transcript& transcript) {
  grid.validate();
  transcript.validate(grid);

  const std::size_t T = grid.frames;
  const std::size_t L = transcript.tokens.size();
  if (T < L) {
    throw Error(ErrorCode::InfeasibleAlignment,
                "only " + std::to_string(T) + " frames for " + std::to_string(L) + " tokens");
  }

  const std::size_t S = 2 * L + 1;
  Trellis trellis;
  trellis.frames = T;
  trellis.states = S;
  trellis.values.assign(T * S, kNegInf);

  auto emission = [&](std::size_t t, std::size_t s) {
    return static_cast<double>(
        grid.values.at(t, static_cast<std::size_t>(state_label(s, transcript, grid.blank_id))));
  };

  // A path may start in the leading blank or the first token state.
  trellis.at(0, 0) = emission(0, 0);
  trellis.at(0, 1) = emission(0, 1);

  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t s = 0; s < S; ++s) {
      double best = trellis.at(t - 1, s);
      if (s >= 1) best = std::max(best, trellis.at(t - 1, s - 1));
      if (skip_allowed(s, transcript)) best = std::max(best, trellis.at(t - 1, s - 2));
      if (best == kNegInf) continue;
      trellis.at(t, s) = best + emission(t, s);
    }
  }

  if (trellis.at(T - 1, S - 1) == kNegInf && trellis.at(T - 1, S - 2) == kNegInf) {
    throw Error(ErrorCode::InfeasibleAlignment, "no legal complete path through the trellis");
  }
  return trellis;
}

FramePath best_path(const Trellis& trellis, const LogPosteriorGrid& grid,
                    const Transcript& transcript) {
  const std::size_t T = trellis.frames;
  const std::size_t S = trellis.states;

  double final_token = trellis.at(T - 1, S - 2);
  double final_blank = trellis.at(T - 1, S - 1);
  if (final_token == kNegInf && final_blank == kNegInf) {
    throw Error(ErrorCode::InfeasibleAlignment, "both terminal states are unreachable");
  }
  // Ties end on the final token, not the final blank.
  std::size_t state = (final_token >= final_blank) ? S - 2 : S - 1;

  FramePath path;
  path.states.assign(T, 0);
  path.emission_logprobs.assign(T, 0.0);

  for (std::size_t t = T - 1; t > 0; --t) {
    path.states[t] = state;
    // Predecessor preference on ties: stay, then advance, then skip.
    std::size_t best_pred = state;
    double best_val = trellis.at(t - 1, state);
    if (state >= 1 && trellis.at(t - 1, state - 1) > best_val) {
      best_val = trellis.at(t - 1, state - 1);
      best_pred = state - 1;
    }
    if (skip_allowed(state, transcript) && trellis.at(t - 1, state - 2) > best_val) {
      best_val = trellis.at(t - 1, state - 2);
      best_pred = state - 2;
    }
    state = best_pred;
  }
  path.states[0] = state;

  for (std::size_t t = 0; t < T; ++t) {
    std::int32_t label = state_label(path.states[t], transcript, grid.blank_id);
    path.emission_logprobs[t] =
        static_cast<double>(grid.values.at(t, static_cast<std::size_t>(label)));
  }
  return path;
}

TokenAlignment token_spans(const FramePath& path, const Transcript& transcript) {
  TokenAlignment alignment;
  alignment.spans.reserve(transcript.tokens.size());

  const std::size_t T = path.states.size();
  std::size_t t = 0;
  while (t < T) {
    std::size_t s = path.states[t];
    if (s % 2 == 0) {  // blank frame
      ++t;
      continue;
    }
    std::size_t start = t;
    while (t < T && path.states[t] == s) ++t;
    alignment.spans.push_back(TokenSpan{transcript.tokens[s / 2], start, t});
  }

  double logprob = 0.0;
  for (double e : path.emission_logprobs) logprob += e;
  alignment.path_logprob = logprob;

  if (alignment.spans.size() != transcript.tokens.size()) {
    throw Error(ErrorCode::InfeasibleAlignment,
                "path covers " + std::to_string(alignment.spans.size()) + " of " +
                    std::to_string(transcript.tokens.size()) + " tokens");
  }
  return alignment;
}

RowMatrix extract_token_embeddings(const HiddenStateMatrix& hidden,
                                   const TokenAlignment& alignment, Pooling pooling) {
  hidden.validate();
  for (const TokenSpan& span : alignment.spans) {
    if (span.frame_end > hidden.frames || span.frame_start >= span.frame_end) {
      throw Error(ErrorCode::DimensionMismatch,
                  "alignment span exceeds hidden-state frame count");
    }
  }

  RowMatrix out(alignment.spans.size(), hidden.dim);
  for (std::size_t i = 0; i < alignment.spans.size(); ++i) {
    const TokenSpan& span = alignment.spans[i];
    auto dst = out.row(i);
    switch (pooling) {
      case Pooling::kFirst: {
        auto src = hidden.values.row(span.frame_start);
        std::copy(src.begin(), src.end(), dst.begin());
        break;
      }
      case Pooling::kMax: {
        auto src = hidden.values.row(span.frame_start);
        std::copy(src.begin(), src.end(), dst.begin());
        for (std::size_t t = span.frame_start + 1; t < span.frame_end; ++t) {
          auto row = hidden.values.row(t);
          for (std::size_t c = 0; c < hidden.dim; ++c) {
            dst[c] = std::max(dst[c], row[c]);
          }
        }
        break;
      }
      case Pooling::kMean: {
        std::vector<double> acc(hidden.dim, 0.0);
        for (std::size_t t = span.frame_start; t < span.frame_end; ++t) {
          auto row = hidden.values.row(t);
          for (std::size_t c = 0; c < hidden.dim; ++c) {
            acc[c] += static_cast<double>(row[c]);
          }
        }
        double count = static_cast<double>(span.frame_end - span.frame_start);
        for (std::size_t c = 0; c < hidden.dim; ++c) {
          dst[c] = static_cast<float>(acc[c] / count);
        }
        break;
      }
    }
  }
  return out;
}

AlignedUtterance align_and_embed(const LogPosteriorGrid& grid,
                                 const HiddenStateMatrix& hidden,
                                 const Transcript& transcript, Pooling pooling) {
  if (hidden.frames != grid.frames) {
    throw Error(ErrorCode::DimensionMismatch,
                "hidden-state frames do not match grid frames");
  }
  Trellis trellis = build_trellis(grid, transcript);
  FramePath path = best_path(trellis, grid, transcript);
  AlignedUtterance result;
  result.alignment = token_spans(path, transcript);
  result.embeddings = extract_token_embeddings(hidden, result.alignment, pooling);
  return result;
}

Pooling pooling_from_string(const std::string& name) {
  if (name == "mean") return Pooling::kMean;
  if (name == "first") return Pooling::kFirst;
  if (name == "max") return Pooling::kMax;
  throw Error(ErrorCode::InvalidParams, "unknown pooling '" + name + "'");
}

const char* pooling_name(Pooling pooling) {
  switch (pooling) {
    case Pooling::kMean: return "mean";
    case Pooling::kFirst: return "first";
    case Pooling::kMax: return "max";
  }
  return "mean";
}

}  // namespace larag
