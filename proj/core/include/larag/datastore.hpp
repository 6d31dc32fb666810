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
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "larag/alignment.hpp"
#include "larag/matrix.hpp"

namespace larag {

inline constexpr std::uint32_t kDatastoreFormatVersion = 1;

enum class TokenizerKind { kCtc, kAedPretokenized };

const char* tokenizer_kind_name(TokenizerKind kind);
TokenizerKind tokenizer_kind_from_string(const std::string& name);

/// One stored utterance: the token-embedding sequence f(x), its token ids
/// y, and the raw text.
struct SequenceRecord {
  std::uint64_t seq_id = 0;
  RowMatrix embeddings;  // L x d, raw (unnormalized)
  std::vector<std::int32_t> tokens;
  std::string text;
  std::string source_tag;
  std::string utterance_id;

  std::size_t length() const { return tokens.size(); }
};

struct DatastoreMeta {
  std::size_t dim = 0;
  TokenizerKind tokenizer_kind = TokenizerKind::kCtc;
  std::uint64_t entry_count = 0;
  std::uint64_t sequence_count = 0;
  std::string metric = "cosine";
  std::uint32_t format_version = kDatastoreFormatVersion;
};

/// View of one token-level entry: key f(x_t), value y_t, and the
/// back-reference into the owning sequence.
struct DatastoreEntry {
  std::span<const float> key;  // raw embedding row
  std::int32_t value = 0;
  std::uint64_t seq_id = 0;
  std::size_t position = 0;
};

struct DatastoreStats {
  DatastoreMeta meta;
  std::map<std::string, std::uint64_t> tokens_per_source;
};

/// One corpus utterance heading into the datastore, either raw
/// (grid + hidden states, forced-aligned here) or pre-tokenized
/// (per-token embeddings straight from an AED-style tokenizer).
struct CorpusItem {
  std::string utterance_id;
  std::string text;
  std::string source_tag;
  std::vector<std::int32_t> tokens;
  bool tokenized = false;

  RowMatrix embeddings;  // tokenized: L x d

  // raw ingestion only
  LogPosteriorGrid grid;
  HiddenStateMatrix hidden;
};

struct BuildOptions {
  Pooling pooling = Pooling::kMean;
};

struct BuildReport {
  std::uint64_t ingested = 0;
  std::uint64_t skipped = 0;
  std::vector<std::string> skipped_ids;
};

/// Immutable after build/load; unlimited concurrent readers.
class Datastore {
 public:
  const DatastoreMeta& meta() const { return meta_; }
  std::size_t dim() const { return meta_.dim; }
  std::uint64_t entry_count() const { return meta_.entry_count; }
  std::uint64_t sequence_count() const { return meta_.sequence_count; }

  const SequenceRecord& sequence(std::uint64_t seq_id) const;
  const std::vector<SequenceRecord>& sequences() const { return sequences_; }

  DatastoreEntry entry(std::uint64_t index) const;
  std::span<const float> normalized_key(std::uint64_t index) const;
  const RowMatrix& normalized_keys() const { return normalized_keys_; }

  /// Entry index of (seq_id, position) in the flat key layout.
  std::uint64_t entry_index(std::uint64_t seq_id, std::size_t position) const;

  DatastoreStats stats() const;

  friend Datastore build_datastore(
      const std::function<std::optional<CorpusItem>()>& next_item,
      const BuildOptions& options, BuildReport* report);
  friend Datastore load_datastore(const std::filesystem::path& dir);

 private:
  DatastoreMeta meta_;
  std::vector<SequenceRecord> sequences_;
  std::vector<std::uint64_t> seq_offsets_;  // prefix sums, size sequence_count + 1
  RowMatrix normalized_keys_;               // entry_count x d

  void rebuild_derived();
};

/// Consumes the corpus stream until `next_item` returns nullopt.
/// Utterances that fail forced alignment are skipped and reported, not
/// fatal; an all-skip or empty corpus raises EmptyCorpus.
Datastore build_datastore(const std::function<std::optional<CorpusItem>()>& next_item,
                          const BuildOptions& options = {}, BuildReport* report = nullptr);

Datastore build_datastore(const std::vector<CorpusItem>& items,
                          const BuildOptions& options = {}, BuildReport* report = nullptr);

/// Directory layout: meta.json, sequences.bin (raw embeddings),
/// entries.bin (L2-normalized keys), texts.jsonl. The write goes to a
/// temporary sibling directory first and is renamed into place.
void save_datastore(const Datastore& datastore, const std::filesystem::path& dir);
Datastore load_datastore(const std::filesystem::path& dir);

}  // namespace larag
