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

#include "larag/manifest.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "larag/errors.hpp"
#include "larag/tensor_io.hpp"

namespace larag {

namespace fs = std::filesystem;
using nlohmann::json;

void ManifestRecord::validate() const {
  if (utterance_id.empty()) {
    throw Error(ErrorCode::InvalidParams, "manifest record without utterance_id");
  }
  if (features.empty()) {
    throw Error(ErrorCode::InvalidParams,
                "manifest record '" + utterance_id + "' names no features tensor");
  }
  if (tokenized && !logits.empty()) {
    throw Error(ErrorCode::InvalidParams,
                "tokenized record '" + utterance_id + "' must not carry logits");
  }
  if (!tokenized && logits.empty()) {
    throw Error(ErrorCode::InvalidParams,
                "raw record '" + utterance_id + "' needs a logits tensor");
  }
  if (tokens.empty()) {
    throw Error(ErrorCode::InvalidParams,
                "manifest record '" + utterance_id + "' has an empty transcript");
  }
}

std::vector<ManifestRecord> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::IoFailure, "cannot open manifest " + path.string());
  }
  std::vector<ManifestRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::CorruptFile, "manifest line " + std::to_string(line_no) +
                                              " unparseable: " + e.what());
    }
    ManifestRecord record;
    try {
      record.utterance_id = j.at("utterance_id").get<std::string>();
      record.features = j.at("features").get<std::string>();
      record.tokens = j.at("transcript").get<std::vector<std::int32_t>>();
      record.text = j.value("text", std::string{});
      record.source_tag = j.value("source_tag", std::string{"default"});
      record.tokenized = j.at("tokenized").get<bool>();
      record.logits = j.value("logits", std::string{});
      record.blank_id = j.value("blank_id", std::int32_t{0});
    } catch (const json::exception& e) {
      throw Error(ErrorCode::CorruptFile, "manifest line " + std::to_string(line_no) +
                                              " malformed: " + e.what());
    }
    record.validate();
    records.push_back(std::move(record));
  }
  return records;
}

void write_manifest(const std::vector<ManifestRecord>& records, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::IoFailure, "cannot write manifest " + path.string());
  }
  for (const ManifestRecord& record : records) {
    json j{
        {"blank_id", record.blank_id},
        {"features", record.features},
        {"source_tag", record.source_tag},
        {"text", record.text},
        {"tokenized", record.tokenized},
        {"transcript", record.tokens},
        {"utterance_id", record.utterance_id},
    };
    if (!record.logits.empty()) j["logits"] = record.logits;
    out << j.dump() << "\n";
  }
}

CorpusItem load_corpus_item(const ManifestRecord& record, const fs::path& manifest_dir) {
  record.validate();
  CorpusItem item;
  item.utterance_id = record.utterance_id;
  item.text = record.text;
  item.source_tag = record.source_tag;
  item.tokens = record.tokens;
  item.tokenized = record.tokenized;

  RowMatrix features = read_matrix_file(manifest_dir / record.features);
  if (record.tokenized) {
    if (features.rows != record.tokens.size()) {
      throw Error(ErrorCode::DimensionMismatch,
                  "utterance '" + record.utterance_id + "': " + std::to_string(features.rows) +
                      " embedding rows for " + std::to_string(record.tokens.size()) + " tokens");
    }
    item.embeddings = std::move(features);
    return item;
  }

  RowMatrix grid_values = read_matrix_file(manifest_dir / record.logits);
  if (grid_values.rows != features.rows) {
    throw Error(ErrorCode::DimensionMismatch,
                "utterance '" + record.utterance_id + "': grid frames " +
                    std::to_string(grid_values.rows) + " != hidden frames " +
                    std::to_string(features.rows));
  }
  item.grid.frames = grid_values.rows;
  item.grid.vocab_size = grid_values.cols;
  item.grid.blank_id = record.blank_id;
  item.grid.values = std::move(grid_values);
  item.hidden.frames = features.rows;
  item.hidden.dim = features.cols;
  item.hidden.values = std::move(features);
  return item;
}

std::map<std::string, NBestList> read_nbest_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::IoFailure, "cannot open N-best file " + path.string());
  }
  std::map<std::string, NBestList> lists;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::CorruptFile,
                  "N-best line " + std::to_string(line_no) + " unparseable: " + e.what());
    }
    NBestList nbest;
    try {
      nbest.utterance_id = j.at("utterance_id").get<std::string>();
      nbest.hypotheses = j.at("hypotheses").get<std::vector<std::vector<std::int32_t>>>();
      if (j.contains("scores")) {
        nbest.scores = j.at("scores").get<std::vector<double>>();
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::CorruptFile,
                  "N-best line " + std::to_string(line_no) + " malformed: " + e.what());
    }
    nbest.validate();
    lists.emplace(nbest.utterance_id, std::move(nbest));
  }
  return lists;
}

void write_nbest_file(const std::vector<NBestList>& lists, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::IoFailure, "cannot write N-best file " + path.string());
  }
  for (const NBestList& nbest : lists) {
    json j{{"hypotheses", nbest.hypotheses}, {"utterance_id", nbest.utterance_id}};
    if (!nbest.scores.empty()) j["scores"] = nbest.scores;
    out << j.dump() << "\n";
  }
}

// ---------------------------------------------------------------------------
// Synthetic corpus emission

namespace {

struct RawFrames {
  RowMatrix grid;    // T x V log-probabilities
  RowMatrix hidden;  // T x d
};

// Frame plan: frames_per_token frames per token with one blank frame
// between consecutive tokens. Posteriors put 0.9 on the planted label, so
// the planted path is the unique Viterbi optimum; hidden rows repeat the
// designed token embedding, which mean pooling reproduces exactly.
RawFrames fabricate_frames(const RowMatrix& embeddings, const std::vector<std::int32_t>& tokens,
                           std::size_t vocab_with_blank, std::size_t frames_per_token) {
  const std::size_t L = tokens.size();
  const std::size_t T = L * frames_per_token + (L - 1);
  const std::size_t V = vocab_with_blank;
  const float planted = std::log(0.9f);
  const float rest = std::log(0.1f / static_cast<float>(V - 1));

  RawFrames out;
  out.grid = RowMatrix(T, V, rest);
  out.hidden = RowMatrix(T, embeddings.cols, 0.0f);

  std::size_t t = 0;
  for (std::size_t i = 0; i < L; ++i) {
    if (i > 0) {
      out.grid.at(t, 0) = planted;  // separating blank
      ++t;
    }
    for (std::size_t f = 0; f < frames_per_token; ++f, ++t) {
      out.grid.at(t, static_cast<std::size_t>(tokens[i])) = planted;
      auto src = embeddings.row(i);
      std::copy(src.begin(), src.end(), out.hidden.row(t).begin());
    }
  }
  return out;
}

std::size_t corpus_vocab_with_blank(const SynthCorpus& corpus) {
  std::int32_t max_token = 0;
  for (const CorpusItem& item : corpus.corpus) {
    for (std::int32_t tok : item.tokens) max_token = std::max(max_token, tok);
  }
  for (const SynthQuery& query : corpus.queries) {
    for (std::int32_t tok : query.tokens) max_token = std::max(max_token, tok);
    for (const auto& hyp : query.nbest.hypotheses) {
      for (std::int32_t tok : hyp) max_token = std::max(max_token, tok);
    }
  }
  return static_cast<std::size_t>(max_token) + 1;
}

ManifestRecord emit_utterance(const std::string& utterance_id, const RowMatrix& embeddings,
                              const std::vector<std::int32_t>& tokens, const std::string& text,
                              const std::string& source_tag, const fs::path& dir,
                              bool raw_frames, std::size_t vocab_with_blank,
                              std::size_t frames_per_token) {
  ManifestRecord record;
  record.utterance_id = utterance_id;
  record.tokens = tokens;
  record.text = text;
  record.source_tag = source_tag;

  fs::create_directories(dir / "tensors");
  if (raw_frames) {
    RawFrames frames = fabricate_frames(embeddings, tokens, vocab_with_blank, frames_per_token);
    record.tokenized = false;
    record.features = "tensors/" + utterance_id + ".hidden.larg";
    record.logits = "tensors/" + utterance_id + ".logits.larg";
    write_matrix_file(dir / record.features, frames.hidden);
    write_matrix_file(dir / record.logits, frames.grid);
  } else {
    record.tokenized = true;
    record.features = "tensors/" + utterance_id + ".emb.larg";
    write_matrix_file(dir / record.features, embeddings);
  }
  return record;
}

}  // namespace

CorpusLayout write_synth_corpus(const SynthCorpus& corpus, const fs::path& dir, bool raw_frames,
                                std::size_t frames_per_token) {
  if (frames_per_token < 1) {
    throw Error(ErrorCode::InvalidParams, "frames_per_token must be at least 1");
  }
  std::error_code ec;
  fs::create_directories(dir / "corpus", ec);
  fs::create_directories(dir / "queries", ec);

  const std::size_t vocab = corpus_vocab_with_blank(corpus);

  CorpusLayout layout;
  layout.corpus_manifest = dir / "corpus" / "manifest.jsonl";
  layout.query_manifest = dir / "queries" / "manifest.jsonl";
  layout.nbest = dir / "nbest.jsonl";
  layout.ground_truth = dir / "ground_truth.jsonl";

  std::vector<ManifestRecord> corpus_records;
  for (const CorpusItem& item : corpus.corpus) {
    corpus_records.push_back(emit_utterance(item.utterance_id, item.embeddings, item.tokens,
                                            item.text, item.source_tag, dir / "corpus",
                                            raw_frames, vocab, frames_per_token));
  }
  write_manifest(corpus_records, layout.corpus_manifest);

  std::vector<ManifestRecord> query_records;
  std::vector<NBestList> nbest_lists;
  {
    std::ofstream truth(layout.ground_truth, std::ios::trunc);
    if (!truth) {
      throw Error(ErrorCode::IoFailure, "cannot write " + layout.ground_truth.string());
    }
    for (const SynthQuery& query : corpus.queries) {
      query_records.push_back(emit_utterance(query.utterance_id, query.embeddings, query.tokens,
                                             query.text, "query", dir / "queries", raw_frames,
                                             vocab, frames_per_token));
      nbest_lists.push_back(query.nbest);
      json line{{"seq_id", query.ground_truth_seq_id}, {"utterance_id", query.utterance_id}};
      truth << line.dump() << "\n";
    }
  }
  write_manifest(query_records, layout.query_manifest);
  write_nbest_file(nbest_lists, layout.nbest);
  return layout;
}

}  // namespace larag
