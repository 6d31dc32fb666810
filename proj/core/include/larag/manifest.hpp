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

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "larag/datastore.hpp"
#include "larag/evaluation.hpp"
#include "larag/retrieval.hpp"

namespace larag {

/// One corpus utterance in a manifest.jsonl file. `features` points at a
/// LARG tensor: T x d hidden states when tokenized is false (then
/// `logits` must name the T x V grid), or L x d per-token embeddings when
/// tokenized is true. Paths are relative to the manifest file.
struct ManifestRecord {
  std::string utterance_id;
  std::string features;
  std::string logits;  // empty when tokenized
  std::vector<std::int32_t> tokens;
  std::string text;
  std::string source_tag;
  bool tokenized = false;
  std::int32_t blank_id = 0;

  void validate() const;
};

std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::vector<ManifestRecord>& records,
                    const std::filesystem::path& path);

/// Loads the tensors behind a record into a CorpusItem ready for
/// ingestion or querying.
CorpusItem load_corpus_item(const ManifestRecord& record,
                            const std::filesystem::path& manifest_dir);

/// N-best JSONL: {"utterance_id": ..., "hypotheses": [[ids]...],
/// "scores": [...]} per line.
std::map<std::string, NBestList> read_nbest_file(const std::filesystem::path& path);
void write_nbest_file(const std::vector<NBestList>& lists, const std::filesystem::path& path);

struct CorpusLayout {
  std::filesystem::path corpus_manifest;   // datastore-side utterances
  std::filesystem::path query_manifest;    // query utterances
  std::filesystem::path nbest;             // query N-best lists
  std::filesystem::path ground_truth;      // utterance_id -> seq_id JSONL
};

/// Writes a synthetic corpus in the standard ingestion formats so the
/// CLI pipeline can consume it end to end. With `raw_frames` false the
/// records are pre-tokenized; otherwise each utterance gets a fabricated
/// log-posterior grid and hidden states whose forced alignment and mean
/// pooling reproduce the designed token embeddings.
CorpusLayout write_synth_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir,
                                bool raw_frames, std::size_t frames_per_token = 2);

}  // namespace larag
