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

#include "larag/prompt.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "larag/errors.hpp"
#include "larag/tensor_io.hpp"

namespace larag {

namespace fs = std::filesystem;
using nlohmann::json;

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "gelu") return Activation::kGelu;
  if (name == "identity") return Activation::kIdentity;
  throw Error(ErrorCode::InvalidParams, "unknown activation '" + name + "'");
}

const char* activation_name(Activation activation) {
  switch (activation) {
    case Activation::kRelu: return "relu";
    case Activation::kGelu: return "gelu";
    case Activation::kIdentity: return "identity";
  }
  return "relu";
}

void AdapterWeights::validate() const {
  if (w1.rows == 0 || w1.cols == 0 || w2.rows == 0 || w2.cols == 0) {
    throw Error(ErrorCode::InvalidParams, "adapter weight matrices must be non-empty");
  }
  if (b1.size() != w1.rows || w2.cols != w1.rows || b2.size() != w2.rows) {
    throw Error(ErrorCode::DimensionMismatch, "adapter weight shapes are inconsistent");
  }
  if (!all_finite(w1.data) || !all_finite(w2.data) ||
      !all_finite(std::span<const float>(b1)) || !all_finite(std::span<const float>(b2))) {
    throw Error(ErrorCode::NonFiniteWeights, "adapter weights contain NaN or infinity");
  }
}

AdapterWeights AdapterWeights::random(std::size_t dim_in, std::size_t hidden,
                                      std::size_t dim_out, Activation activation,
                                      std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  AdapterWeights w;
  w.activation = activation;
  w.w1 = RowMatrix(hidden, dim_in);
  w.b1.assign(hidden, 0.0f);
  w.w2 = RowMatrix(dim_out, hidden);
  w.b2.assign(dim_out, 0.0f);
  std::normal_distribution<double> d1(0.0, 1.0 / std::sqrt(static_cast<double>(dim_in)));
  std::normal_distribution<double> d2(0.0, 1.0 / std::sqrt(static_cast<double>(hidden)));
  for (float& x : w.w1.data) x = static_cast<float>(d1(rng));
  for (float& x : w.w2.data) x = static_cast<float>(d2(rng));
  return w;
}

namespace {

inline double apply_activation(Activation activation, double x) {
  switch (activation) {
    case Activation::kRelu: return x > 0.0 ? x : 0.0;
    case Activation::kGelu: return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0)));
    case Activation::kIdentity: return x;
  }
  return x;
}

}  // namespace

RowMatrix adapter_forward(const AdapterWeights& weights, const RowMatrix& embeddings) {
  weights.validate();
  if (embeddings.cols != weights.dim_in()) {
    throw Error(ErrorCode::DimensionMismatch,
                "embedding dim " + std::to_string(embeddings.cols) +
                    " does not match adapter input dim " + std::to_string(weights.dim_in()));
  }

  const std::size_t h = weights.hidden();
  const std::size_t d_out = weights.dim_out();
  RowMatrix out(embeddings.rows, d_out);
  std::vector<double> activated(h);

  for (std::size_t r = 0; r < embeddings.rows; ++r) {
    auto x = embeddings.row(r);
    for (std::size_t i = 0; i < h; ++i) {
      double acc = static_cast<double>(weights.b1[i]);
      auto w_row = weights.w1.row(i);
      for (std::size_t j = 0; j < x.size(); ++j) {
        acc += static_cast<double>(w_row[j]) * static_cast<double>(x[j]);
      }
      activated[i] = apply_activation(weights.activation, acc);
    }
    auto z = out.row(r);
    for (std::size_t i = 0; i < d_out; ++i) {
      double acc = static_cast<double>(weights.b2[i]);
      auto w_row = weights.w2.row(i);
      for (std::size_t j = 0; j < h; ++j) {
        acc += static_cast<double>(w_row[j]) * activated[j];
      }
      z[i] = static_cast<float>(acc);
    }
  }
  return out;
}

const char* segment_kind_name(SegmentKind kind) {
  switch (kind) {
    case SegmentKind::kExampleSpeech: return "example_speech";
    case SegmentKind::kExampleText: return "example_text";
    case SegmentKind::kInputSpeech: return "input_speech";
    case SegmentKind::kHypothesis: return "hypothesis";
  }
  return "input_speech";
}

namespace {

SegmentKind segment_kind_from_string(const std::string& name) {
  if (name == "example_speech") return SegmentKind::kExampleSpeech;
  if (name == "example_text") return SegmentKind::kExampleText;
  if (name == "input_speech") return SegmentKind::kInputSpeech;
  if (name == "hypothesis") return SegmentKind::kHypothesis;
  throw Error(ErrorCode::FormatViolation, "unknown segment kind '" + name + "'");
}

}  // namespace

void PromptLayout::validate() const {
  const std::size_t expected = 2 * example_count + 1 + hypothesis_count;
  if (segments.size() != expected) {
    throw Error(ErrorCode::FormatViolation,
                "prompt has " + std::to_string(segments.size()) + " segments, expected " +
                    std::to_string(expected));
  }
  std::size_t cursor = 0;
  for (std::size_t m = 0; m < example_count; ++m) {
    const PromptSegment& speech = segments[cursor++];
    const PromptSegment& text = segments[cursor++];
    if (speech.kind != SegmentKind::kExampleSpeech || speech.index != m ||
        text.kind != SegmentKind::kExampleText || text.index != m) {
      throw Error(ErrorCode::FormatViolation,
                  "example segments out of order at pair " + std::to_string(m));
    }
  }
  if (segments[cursor].kind != SegmentKind::kInputSpeech) {
    throw Error(ErrorCode::FormatViolation, "input speech segment misplaced");
  }
  ++cursor;
  for (std::size_t n = 0; n < hypothesis_count; ++n, ++cursor) {
    const PromptSegment& hyp = segments[cursor];
    if (hyp.kind != SegmentKind::kHypothesis || hyp.index != n) {
      throw Error(ErrorCode::FormatViolation,
                  "hypothesis segments out of order at " + std::to_string(n));
    }
  }
}

PromptLayout assemble_prompt(const std::vector<const SequenceRecord*>& examples,
                             const AdapterWeights& adapter, const RowMatrix& input_embeddings,
                             const NBestList& nbest) {
  nbest.validate();

  PromptLayout layout;
  layout.example_count = examples.size();
  layout.hypothesis_count = nbest.size();
  layout.segments.reserve(2 * examples.size() + 1 + nbest.size());

  for (std::size_t m = 0; m < examples.size(); ++m) {
    const SequenceRecord& record = *examples[m];
    PromptSegment speech;
    speech.kind = SegmentKind::kExampleSpeech;
    speech.index = m;
    speech.embeddings = adapter_forward(adapter, record.embeddings);
    layout.segments.push_back(std::move(speech));

    PromptSegment text;
    text.kind = SegmentKind::kExampleText;
    text.index = m;
    text.tokens = record.tokens;
    layout.segments.push_back(std::move(text));
  }

  PromptSegment input;
  input.kind = SegmentKind::kInputSpeech;
  input.embeddings = adapter_forward(adapter, input_embeddings);
  layout.segments.push_back(std::move(input));

  for (std::size_t n = 0; n < nbest.size(); ++n) {
    PromptSegment hyp;
    hyp.kind = SegmentKind::kHypothesis;
    hyp.index = n;
    hyp.tokens = nbest.hypotheses[n];
    layout.segments.push_back(std::move(hyp));
  }

  layout.validate();
  return layout;
}

namespace {

bool is_speech(SegmentKind kind) {
  return kind == SegmentKind::kExampleSpeech || kind == SegmentKind::kInputSpeech;
}

}  // namespace

void serialize_prompt(const PromptLayout& layout, const fs::path& json_path) {
  layout.validate();
  fs::path bin_path = json_path;
  bin_path.replace_extension(".bin");

  std::ofstream bin(bin_path, std::ios::binary | std::ios::trunc);
  if (!bin) {
    throw Error(ErrorCode::IoFailure, "cannot open " + bin_path.string() + " for writing");
  }

  json segments = json::array();
  for (const PromptSegment& segment : layout.segments) {
    json j{{"kind", segment_kind_name(segment.kind)}, {"index", segment.index}};
    if (is_speech(segment.kind)) {
      j["tensor_offset"] = static_cast<std::uint64_t>(bin.tellp());
      write_tensor(bin, matrix_to_tensor(segment.embeddings));
    } else {
      j["tokens"] = segment.tokens;
    }
    segments.push_back(std::move(j));
  }

  json manifest{
      {"example_count", layout.example_count},
      {"format_version", 1},
      {"hypothesis_count", layout.hypothesis_count},
      {"segments", segments},
      {"tensor_file", bin_path.filename().string()},
  };

  std::ofstream out(json_path, std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::IoFailure, "cannot open " + json_path.string() + " for writing");
  }
  out << manifest.dump(2) << "\n";
}

PromptLayout load_prompt(const fs::path& json_path) {
  std::ifstream in(json_path);
  if (!in) {
    throw Error(ErrorCode::IoFailure, "cannot open " + json_path.string());
  }
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptFile, std::string("unparseable prompt manifest: ") + e.what());
  }

  PromptLayout layout;
  fs::path bin_path;
  try {
    layout.example_count = manifest.at("example_count").get<std::size_t>();
    layout.hypothesis_count = manifest.at("hypothesis_count").get<std::size_t>();
    bin_path = json_path.parent_path() / manifest.at("tensor_file").get<std::string>();

    std::ifstream bin(bin_path, std::ios::binary);
    if (!bin) {
      throw Error(ErrorCode::IoFailure, "cannot open " + bin_path.string());
    }
    for (const json& j : manifest.at("segments")) {
      PromptSegment segment;
      segment.kind = segment_kind_from_string(j.at("kind").get<std::string>());
      segment.index = j.at("index").get<std::size_t>();
      if (is_speech(segment.kind)) {
        bin.seekg(static_cast<std::streamoff>(j.at("tensor_offset").get<std::uint64_t>()));
        segment.embeddings = tensor_to_matrix(read_tensor(bin));
      } else {
        segment.tokens = j.at("tokens").get<std::vector<std::int32_t>>();
      }
      layout.segments.push_back(std::move(segment));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptFile, std::string("malformed prompt manifest: ") + e.what());
  }

  layout.validate();
  return layout;
}

void save_adapter(const AdapterWeights& weights, const fs::path& json_path) {
  weights.validate();
  fs::path bin_path = json_path;
  bin_path.replace_extension(".bin");

  {
    std::ofstream bin(bin_path, std::ios::binary | std::ios::trunc);
    if (!bin) {
      throw Error(ErrorCode::IoFailure, "cannot open " + bin_path.string() + " for writing");
    }
    write_tensor(bin, matrix_to_tensor(weights.w1));
    TensorData b1{kDtypeFloat32, {weights.b1.size()}, weights.b1, {}};
    write_tensor(bin, b1);
    write_tensor(bin, matrix_to_tensor(weights.w2));
    TensorData b2{kDtypeFloat32, {weights.b2.size()}, weights.b2, {}};
    write_tensor(bin, b2);
  }

  json header{
      {"activation", activation_name(weights.activation)},
      {"dim_in", weights.dim_in()},
      {"dim_out", weights.dim_out()},
      {"hidden", weights.hidden()},
      {"tensor_file", bin_path.filename().string()},
  };
  std::ofstream out(json_path, std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::IoFailure, "cannot open " + json_path.string() + " for writing");
  }
  out << header.dump(2) << "\n";
}

AdapterWeights load_adapter(const fs::path& json_path) {
  std::ifstream in(json_path);
  if (!in) {
    throw Error(ErrorCode::IoFailure, "cannot open " + json_path.string());
  }
  json header;
  try {
    in >> header;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptFile, std::string("unparseable adapter header: ") + e.what());
  }

  AdapterWeights weights;
  try {
    weights.activation = activation_from_string(header.at("activation").get<std::string>());
    fs::path bin_path = json_path.parent_path() / header.at("tensor_file").get<std::string>();
    std::ifstream bin(bin_path, std::ios::binary);
    if (!bin) {
      throw Error(ErrorCode::IoFailure, "cannot open " + bin_path.string());
    }
    weights.w1 = tensor_to_matrix(read_tensor(bin));
    weights.b1 = read_tensor(bin).f32;
    weights.w2 = tensor_to_matrix(read_tensor(bin));
    weights.b2 = read_tensor(bin).f32;

    if (weights.dim_in() != header.at("dim_in").get<std::size_t>() ||
        weights.hidden() != header.at("hidden").get<std::size_t>() ||
        weights.dim_out() != header.at("dim_out").get<std::size_t>()) {
      throw Error(ErrorCode::CorruptFile, "adapter header shapes disagree with tensors");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptFile, std::string("malformed adapter header: ") + e.what());
  }
  weights.validate();
  return weights;
}

}  // namespace larag
