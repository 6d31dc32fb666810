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
#include <string>
#include <vector>

#include "larag/datastore.hpp"
#include "larag/matrix.hpp"
#include "larag/retrieval.hpp"

namespace larag {

enum class Activation { kRelu, kGelu, kIdentity };

Activation activation_from_string(const std::string& name);
const char* activation_name(Activation activation);

/// Two stacked linear layers mapping speech embeddings into the LLM
/// token space: z = W2 * act(W1 * x + b1) + b2.
struct AdapterWeights {
  RowMatrix w1;            // h x d
  std::vector<float> b1;   // h
  RowMatrix w2;            // d_out x h
  std::vector<float> b2;   // d_out
  Activation activation = Activation::kRelu;

  std::size_t dim_in() const { return w1.cols; }
  std::size_t hidden() const { return w1.rows; }
  std::size_t dim_out() const { return w2.rows; }

  void validate() const;

  /// Seeded random weights for testing; never a substitute for trained
  /// weights.
  static AdapterWeights random(std::size_t dim_in, std::size_t hidden, std::size_t dim_out,
                               Activation activation, std::uint64_t seed);
};

inline constexpr std::size_t kDefaultAdapterHidden = 2048;

/// Row-wise adapter application; output is L x d_out.
RowMatrix adapter_forward(const AdapterWeights& weights, const RowMatrix& embeddings);

enum class SegmentKind { kExampleSpeech, kExampleText, kInputSpeech, kHypothesis };

const char* segment_kind_name(SegmentKind kind);

/// One prompt segment. Speech kinds carry a post-adapter embedding
/// matrix; text kinds carry token ids. ExampleSpeech(m) and
/// ExampleText(m) share the index of the retrieved sequence m.
struct PromptSegment {
  SegmentKind kind = SegmentKind::kInputSpeech;
  std::size_t index = 0;
  RowMatrix embeddings;
  std::vector<std::int32_t> tokens;

  bool operator==(const PromptSegment& other) const = default;
};

/// Ordered segment list: Z^0, Y^0, ..., Z^{M-1}, Y^{M-1}, X-hat,
/// Y-hat^0, ..., Y-hat^{N-1}; always 2M + 1 + N segments.
struct PromptLayout {
  std::vector<PromptSegment> segments;
  std::size_t example_count = 0;     // M
  std::size_t hypothesis_count = 0;  // N

  void validate() const;

  bool operator==(const PromptLayout& other) const = default;
};

/// Adapts every speech payload and lays the prompt out in order. M may
/// be zero when retrieval returned nothing.
PromptLayout assemble_prompt(const std::vector<const SequenceRecord*>& examples,
                             const AdapterWeights& adapter, const RowMatrix& input_embeddings,
                             const NBestList& nbest);

/// Writes <path> (JSON manifest) plus a sibling .bin tensor file holding
/// the embedding payloads; load_prompt reconstructs bit-identically and
/// rejects manifests whose segment order breaks the layout law.
void serialize_prompt(const PromptLayout& layout, const std::filesystem::path& json_path);
PromptLayout load_prompt(const std::filesystem::path& json_path);

void save_adapter(const AdapterWeights& weights, const std::filesystem::path& json_path);
AdapterWeights load_adapter(const std::filesystem::path& json_path);

}  // namespace larag
