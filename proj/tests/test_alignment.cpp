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

#include <doctest.h>

#include <cmath>

#include "larag/alignment.hpp"
#include "larag/errors.hpp"
#include "support/oracles.hpp"

using namespace larag;

namespace {

// Rows built by log-softmax of given logits; per-row shifts cancel along
// any complete path, so path ordering matches the raw logits.
LogPosteriorGrid grid_from_logits(const std::vector<std::vector<double>>& logits,
                                  std::int32_t blank_id = 0) {
  LogPosteriorGrid grid;
  grid.frames = logits.size();
  grid.vocab_size = logits[0].size();
  grid.blank_id = blank_id;
  grid.values = RowMatrix(grid.frames, grid.vocab_size);
  for (std::size_t t = 0; t < grid.frames; ++t) {
    double max_val = *std::max_element(logits[t].begin(), logits[t].end());
    double sum = 0.0;
    for (double x : logits[t]) sum += std::exp(x - max_val);
    double lse = max_val + std::log(sum);
    for (std::size_t v = 0; v < grid.vocab_size; ++v) {
      grid.values.at(t, v) = static_cast<float>(logits[t][v] - lse);
    }
  }
  return grid;
}

FramePath path_from_states(std::vector<std::size_t> states) {
  FramePath path;
  path.states = std::move(states);
  path.emission_logprobs.assign(path.states.size(), 0.0);
  return path;
}

}  // namespace

TEST_CASE("trellis: single frame forced to the only emitting path") {
  // p(A) = e^-0.1 exactly, blank takes the remaining mass (~ -2.3).
  LogPosteriorGrid grid;
  grid.frames = 1;
  grid.vocab_size = 2;
  grid.blank_id = 0;
  grid.values = RowMatrix(1, 2);
  grid.values.at(0, 1) = -0.1f;
  grid.values.at(0, 0) = static_cast<float>(std::log(1.0 - std::exp(-0.1)));
  Transcript transcript{{1}, std::nullopt};

  Trellis trellis = build_trellis(grid, transcript);
  CHECK(trellis.states == 3);
  // The blank start exists in the lattice but is not a valid terminal.
  CHECK(trellis.at(0, 0) == doctest::Approx(-2.3).epsilon(0.05));
  double terminal = std::max(trellis.at(0, 1), trellis.at(0, 2));
  CHECK(terminal == doctest::Approx(-0.1).epsilon(1e-6));

  FramePath path = best_path(trellis, grid, transcript);
  REQUIRE(path.states.size() == 1);
  CHECK(path.states[0] == 1);
}

TEST_CASE("trellis: two uniform frames over {blank, A} score -2 ln 2") {
  const double half = std::log(0.5);
  LogPosteriorGrid grid = grid_from_logits({{half, half}, {half, half}});
  Transcript transcript{{1}, std::nullopt};

  Trellis trellis = build_trellis(grid, transcript);
  double terminal = std::max(trellis.at(1, 1), trellis.at(1, 2));
  CHECK(terminal == doctest::Approx(-2.0 * std::log(2.0)).epsilon(1e-9));

  // All three legal paths tie; the backtracked one must attain the max.
  FramePath path = best_path(trellis, grid, transcript);
  double total = 0.0;
  for (double e : path.emission_logprobs) total += e;
  CHECK(total == doctest::Approx(terminal).epsilon(1e-12));
}

TEST_CASE("trellis: T=4 V=3 L=2 matches exhaustive path enumeration") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    LogPosteriorGrid grid = test::random_grid(4, 3, rng);
    Transcript transcript = test::random_transcript(2, 3, rng);
    test::CtcEnumeration oracle = test::enumerate_ctc(grid, transcript);
    if (!oracle.feasible) {
      CHECK_THROWS_AS(build_trellis(grid, transcript), Error);
      continue;
    }
    Trellis trellis = build_trellis(grid, transcript);
    double terminal =
        std::max(trellis.at(3, trellis.states - 1), trellis.at(3, trellis.states - 2));
    CHECK(terminal == doctest::Approx(oracle.best_logprob).epsilon(1e-12));
  }
}

TEST_CASE("trellis: infeasible inputs raise InfeasibleAlignment") {
  std::mt19937_64 rng(3);
  LogPosteriorGrid grid = test::random_grid(1, 3, rng);
  Transcript two_tokens{{1, 2}, std::nullopt};
  CHECK_THROWS_WITH_AS(build_trellis(grid, two_tokens),
                       doctest::Contains("InfeasibleAlignment"), Error);

  // Repeated token needs a separating blank: T=2 cannot cover [A, A].
  LogPosteriorGrid grid2 = test::random_grid(2, 3, rng);
  Transcript repeated{{1, 1}, std::nullopt};
  CHECK_THROWS_WITH_AS(build_trellis(grid2, repeated),
                       doctest::Contains("InfeasibleAlignment"), Error);
}

TEST_CASE("best_path: weak middle frame ties resolve to a max path") {
  LogPosteriorGrid grid =
      grid_from_logits({{-0.2, -0.1}, {-0.2, -3.0}, {-0.2, -0.1}});
  Transcript transcript{{1}, std::nullopt};

  test::CtcEnumeration oracle = test::enumerate_ctc(grid, transcript);
  REQUIRE(oracle.feasible);

  Trellis trellis = build_trellis(grid, transcript);
  FramePath path = best_path(trellis, grid, transcript);
  double total = 0.0;
  for (double e : path.emission_logprobs) total += e;
  CHECK(total == doctest::Approx(oracle.best_logprob).epsilon(1e-12));
  CHECK(std::find(oracle.best_paths.begin(), oracle.best_paths.end(), path.states) !=
        oracle.best_paths.end());
}

TEST_CASE("best_path: unique oracle argmax is reproduced exactly") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> frames(1, 6);
  std::uniform_int_distribution<std::size_t> vocab(2, 4);
  std::uniform_int_distribution<std::size_t> lengths(1, 3);

  int checked = 0;
  for (int trial = 0; trial < 400 && checked < 120; ++trial) {
    std::size_t T = frames(rng);
    std::size_t V = vocab(rng);
    std::size_t L = std::min(lengths(rng), T);
    LogPosteriorGrid grid = test::random_grid(T, V, rng);
    Transcript transcript = test::random_transcript(L, V, rng);
    test::CtcEnumeration oracle = test::enumerate_ctc(grid, transcript);
    if (!oracle.feasible || oracle.best_paths.size() != 1) continue;

    Trellis trellis = build_trellis(grid, transcript);
    FramePath path = best_path(trellis, grid, transcript);
    CHECK(path.states == oracle.best_paths[0]);
    ++checked;
  }
  CHECK(checked > 50);
}

TEST_CASE("alignment properties: oracle equivalence, collapse, determinism") {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<std::size_t> frames(1, 6);
  std::uniform_int_distribution<std::size_t> vocab(2, 4);
  std::uniform_int_distribution<std::size_t> lengths(1, 3);

  for (int trial = 0; trial < 300; ++trial) {
    std::size_t T = frames(rng);
    std::size_t V = vocab(rng);
    std::size_t L = lengths(rng);
    LogPosteriorGrid grid = test::random_grid(T, V, rng);
    Transcript transcript = test::random_transcript(L, V, rng);
    test::CtcEnumeration oracle = test::enumerate_ctc(grid, transcript);

    if (T < L || !oracle.feasible) {
      CHECK_THROWS_AS(build_trellis(grid, transcript), Error);
      continue;
    }

    Trellis trellis = build_trellis(grid, transcript);
    FramePath path = best_path(trellis, grid, transcript);
    TokenAlignment alignment = token_spans(path, transcript);

    CHECK(alignment.path_logprob == doctest::Approx(oracle.best_logprob).epsilon(1e-12));
    CHECK(test::collapse_path(path.states, transcript) == transcript.tokens);

    // Spans strictly increasing and non-overlapping, one per token.
    REQUIRE(alignment.spans.size() == transcript.tokens.size());
    for (std::size_t i = 0; i < alignment.spans.size(); ++i) {
      CHECK(alignment.spans[i].frame_start < alignment.spans[i].frame_end);
      CHECK(alignment.spans[i].frame_end <= T);
      if (i > 0) CHECK(alignment.spans[i - 1].frame_end <= alignment.spans[i].frame_start);
      CHECK(alignment.spans[i].token_id == transcript.tokens[i]);
    }

    // Bit-identical on a second run.
    FramePath again = best_path(build_trellis(grid, transcript), grid, transcript);
    CHECK(again.states == path.states);
  }
}

TEST_CASE("token_spans: collapses labelled frames into per-token spans") {
  Transcript ab{{1, 2}, std::nullopt};
  TokenAlignment spans = token_spans(path_from_states({0, 1, 1, 2, 3}), ab);
  REQUIRE(spans.spans.size() == 2);
  CHECK(spans.spans[0].token_id == 1);
  CHECK(spans.spans[0].frame_start == 1);
  CHECK(spans.spans[0].frame_end == 3);
  CHECK(spans.spans[1].token_id == 2);
  CHECK(spans.spans[1].frame_start == 4);
  CHECK(spans.spans[1].frame_end == 5);

  Transcript a{{1}, std::nullopt};
  TokenAlignment single = token_spans(path_from_states({1}), a);
  REQUIRE(single.spans.size() == 1);
  CHECK(single.spans[0].frame_start == 0);
  CHECK(single.spans[0].frame_end == 1);

  // Repeats separated by the blank state produce distinct spans.
  Transcript aa{{1, 1}, std::nullopt};
  TokenAlignment repeats = token_spans(path_from_states({1, 2, 3}), aa);
  REQUIRE(repeats.spans.size() == 2);
  CHECK(repeats.spans[0].frame_start == 0);
  CHECK(repeats.spans[0].frame_end == 1);
  CHECK(repeats.spans[1].frame_start == 2);
  CHECK(repeats.spans[1].frame_end == 3);
}

TEST_CASE("extract_token_embeddings: pooling modes") {
  HiddenStateMatrix hidden;
  hidden.frames = 3;
  hidden.dim = 2;
  hidden.values = RowMatrix(3, 2);
  hidden.values.at(0, 0) = 1.0f;
  hidden.values.at(0, 1) = 5.0f;
  hidden.values.at(1, 0) = 3.0f;
  hidden.values.at(1, 1) = 1.0f;
  hidden.values.at(2, 0) = -2.0f;
  hidden.values.at(2, 1) = 8.0f;

  TokenAlignment alignment;
  alignment.spans = {TokenSpan{1, 0, 2}};

  RowMatrix mean = extract_token_embeddings(hidden, alignment, Pooling::kMean);
  CHECK(mean.at(0, 0) == doctest::Approx(2.0f));
  CHECK(mean.at(0, 1) == doctest::Approx(3.0f));

  RowMatrix first = extract_token_embeddings(hidden, alignment, Pooling::kFirst);
  CHECK(first.at(0, 0) == 1.0f);
  CHECK(first.at(0, 1) == 5.0f);

  RowMatrix maxed = extract_token_embeddings(hidden, alignment, Pooling::kMax);
  CHECK(maxed.at(0, 0) == 3.0f);
  CHECK(maxed.at(0, 1) == 5.0f);

  // Singleton spans return the row for any pooling.
  alignment.spans = {TokenSpan{1, 1, 2}};
  for (Pooling pooling : {Pooling::kMean, Pooling::kFirst, Pooling::kMax}) {
    RowMatrix out = extract_token_embeddings(hidden, alignment, pooling);
    CHECK(out.at(0, 0) == 3.0f);
    CHECK(out.at(0, 1) == 1.0f);
  }

  // Span past the hidden frames is a dimension error.
  alignment.spans = {TokenSpan{1, 2, 4}};
  CHECK_THROWS_WITH_AS(extract_token_embeddings(hidden, alignment, Pooling::kMean),
                       doctest::Contains("DimensionMismatch"), Error);
}

TEST_CASE("extract_token_embeddings: output shape is L x d") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::size_t T = 5, V = 3, L = 2, d = 7;
    LogPosteriorGrid grid = test::random_grid(T, V, rng);
    Transcript transcript = test::random_transcript(L, V, rng);
    test::CtcEnumeration oracle = test::enumerate_ctc(grid, transcript);
    if (!oracle.feasible) continue;
    HiddenStateMatrix hidden;
    hidden.frames = T;
    hidden.dim = d;
    hidden.values = test::random_matrix(T, d, rng);
    AlignedUtterance aligned = align_and_embed(grid, hidden, transcript, Pooling::kMean);
    CHECK(aligned.embeddings.rows == L);
    CHECK(aligned.embeddings.cols == d);
    CHECK(all_finite(aligned.embeddings.data));
  }
}

TEST_CASE("grid validation rejects malformed inputs") {
  std::mt19937_64 rng(9);
  LogPosteriorGrid grid = test::random_grid(2, 3, rng);
  Transcript transcript{{1}, std::nullopt};

  SUBCASE("unnormalized row") {
    grid.values.at(0, 0) = 0.5f;
    CHECK_THROWS_AS(build_trellis(grid, transcript), Error);
  }
  SUBCASE("NaN") {
    grid.values.at(1, 2) = std::nanf("");
    CHECK_THROWS_AS(build_trellis(grid, transcript), Error);
  }
  SUBCASE("blank out of range") {
    grid.blank_id = 5;
    CHECK_THROWS_AS(build_trellis(grid, transcript), Error);
  }
  SUBCASE("transcript containing blank") {
    Transcript bad{{0}, std::nullopt};
    CHECK_THROWS_AS(build_trellis(grid, bad), Error);
  }
  SUBCASE("transcript token outside vocabulary") {
    Transcript bad{{7}, std::nullopt};
    CHECK_THROWS_AS(build_trellis(grid, bad), Error);
  }
}
