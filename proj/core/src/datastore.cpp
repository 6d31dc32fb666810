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

#include "larag/datastore.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "larag/errors.hpp"
#include "larag/tensor_io.hpp"

namespace larag {

namespace fs = std::filesystem;
using nlohmann::json;

const char* tokenizer_kind_name(TokenizerKind kind) {
  switch (kind) {
    case TokenizerKind::kCtc: return "CTC";
    case TokenizerKind::kAedPretokenized: return "AED-pretokenized";
  }
  return "CTC";
}

TokenizerKind tokenizer_kind_from_string(const std::string& name) {
  if (name == "CTC") return TokenizerKind::kCtc;
  if (name == "AED-pretokenized") return TokenizerKind::kAedPretokenized;
  throw Error(ErrorCode::CorruptFile, "unknown tokenizer kind '" + name + "'");
}

const SequenceRecord& Datastore::sequence(std::uint64_t seq_id) const {
  if (seq_id >= sequences_.size()) {
    throw Error(ErrorCode::InvalidParams, "seq_id " + std::to_string(seq_id) + " out of range");
  }
  return sequences_[seq_id];
}

std::uint64_t Datastore::entry_index(std::uint64_t seq_id, std::size_t position) const {
  const SequenceRecord& seq = sequence(seq_id);
  if (position >= seq.length()) {
    throw Error(ErrorCode::InvalidParams, "position out of range for sequence");
  }
  return seq_offsets_[seq_id] + position;
}

DatastoreEntry Datastore::entry(std::uint64_t index) const {
  if (index >= meta_.entry_count) {
    throw Error(ErrorCode::InvalidParams, "entry index out of range");
  }
  auto it = std::upper_bound(seq_offsets_.begin(), seq_offsets_.end(), index);
  std::uint64_t seq_id = static_cast<std::uint64_t>(it - seq_offsets_.begin()) - 1;
  std::size_t position = static_cast<std::size_t>(index - seq_offsets_[seq_id]);
  const SequenceRecord& seq = sequences_[seq_id];
  return DatastoreEntry{seq.embeddings.row(position), seq.tokens[position], seq_id, position};
}

std::span<const float> Datastore::normalized_key(std::uint64_t index) const {
  if (index >= meta_.entry_count) {
    throw Error(ErrorCode::InvalidParams, "entry index out of range");
  }
  return normalized_keys_.row(index);
}

DatastoreStats Datastore::stats() const {
  DatastoreStats s;
  s.meta = meta_;
  for (const SequenceRecord& seq : sequences_) {
    s.tokens_per_source[seq.source_tag] += seq.length();
  }
  return s;
}

void Datastore::rebuild_derived() {
  seq_offsets_.clear();
  seq_offsets_.reserve(sequences_.size() + 1);
  std::uint64_t offset = 0;
  seq_offsets_.push_back(0);
  for (const SequenceRecord& seq : sequences_) {
    offset += seq.length();
    seq_offsets_.push_back(offset);
  }
  meta_.entry_count = offset;
  meta_.sequence_count = sequences_.size();
}

Datastore build_datastore(const std::function<std::optional<CorpusItem>()>& next_item,
                          const BuildOptions& options, BuildReport* report) {
  Datastore store;
  BuildReport local_report;
  bool saw_any_item = false;
  bool saw_pretokenized = false;
  bool saw_aligned = false;

  while (auto item = next_item()) {
    saw_any_item = true;
    SequenceRecord record;
    record.text = item->text;
    record.source_tag = item->source_tag;
    record.utterance_id = item->utterance_id;
    record.tokens = item->tokens;

    if (item->tokens.empty()) {
      throw Error(ErrorCode::InvalidParams,
                  "utterance '" + item->utterance_id + "' has an empty transcript");
    }

    if (item->tokenized) {
      if (item->embeddings.rows != item->tokens.size()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "pre-tokenized embeddings rows do not match token count");
      }
      if (!all_finite(item->embeddings.data)) {
        throw Error(ErrorCode::InvalidParams, "embeddings contain non-finite values");
      }
      record.embeddings = item->embeddings;
      saw_pretokenized = true;
    } else {
      Transcript transcript{item->tokens, item->text};
      try {
        AlignedUtterance aligned =
            align_and_embed(item->grid, item->hidden, transcript, options.pooling);
        record.embeddings = std::move(aligned.embeddings);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::InfeasibleAlignment) {
          local_report.skipped += 1;
          local_report.skipped_ids.push_back(item->utterance_id);
          continue;
        }
        throw;
      }
      saw_aligned = true;
    }

    if (record.embeddings.cols == 0) {
      throw Error(ErrorCode::InvalidParams,
                  "utterance '" + item->utterance_id + "' has zero-dimensional embeddings");
    }
    if (store.meta_.dim == 0) {
      store.meta_.dim = record.embeddings.cols;
    } else if (record.embeddings.cols != store.meta_.dim) {
      throw Error(ErrorCode::DimensionMismatch,
                  "utterance '" + item->utterance_id + "' has embedding dim " +
                      std::to_string(record.embeddings.cols) + ", datastore dim " +
                      std::to_string(store.meta_.dim));
    }

    record.seq_id = store.sequences_.size();
    store.sequences_.push_back(std::move(record));
    local_report.ingested += 1;
  }

  if (!saw_any_item) {
    throw Error(ErrorCode::EmptyCorpus, "corpus stream produced no items");
  }
  if (store.sequences_.empty()) {
    throw Error(ErrorCode::EmptyCorpus, "every utterance was skipped during ingestion");
  }

  store.meta_.tokenizer_kind = (saw_pretokenized && !saw_aligned)
                                   ? TokenizerKind::kAedPretokenized
                                   : TokenizerKind::kCtc;
  store.rebuild_derived();

  store.normalized_keys_ = RowMatrix(store.meta_.entry_count, store.meta_.dim);
  std::uint64_t row = 0;
  for (const SequenceRecord& seq : store.sequences_) {
    for (std::size_t t = 0; t < seq.length(); ++t, ++row) {
      auto normalized = l2_normalized(seq.embeddings.row(t));
      std::copy(normalized.begin(), normalized.end(), store.normalized_keys_.row(row).begin());
    }
  }

  if (report) *report = std::move(local_report);
  return store;
}

Datastore build_datastore(const std::vector<CorpusItem>& items, const BuildOptions& options,
                          BuildReport* report) {
  std::size_t cursor = 0;
  return build_datastore(
      [&]() -> std::optional<CorpusItem> {
        if (cursor >= items.size()) return std::nullopt;
        return items[cursor++];
      },
      options, report);
}

namespace {

json meta_to_json(const DatastoreMeta& meta) {
  return json{
      {"dim", meta.dim},
      {"entry_count", meta.entry_count},
      {"format_version", meta.format_version},
      {"metric", meta.metric},
      {"sequence_count", meta.sequence_count},
      {"tokenizer_kind", tokenizer_kind_name(meta.tokenizer_kind)},
  };
}

DatastoreMeta meta_from_json(const json& j) {
  DatastoreMeta meta;
  try {
    meta.format_version = j.at("format_version").get<std::uint32_t>();
    if (meta.format_version != kDatastoreFormatVersion) {
      throw Error(ErrorCode::VersionMismatch,
                  "datastore format version " + std::to_string(meta.format_version) +
                      ", this build reads version " + std::to_string(kDatastoreFormatVersion));
    }
    meta.dim = j.at("dim").get<std::size_t>();
    meta.entry_count = j.at("entry_count").get<std::uint64_t>();
    meta.sequence_count = j.at("sequence_count").get<std::uint64_t>();
    meta.metric = j.at("metric").get<std::string>();
    meta.tokenizer_kind = tokenizer_kind_from_string(j.at("tokenizer_kind").get<std::string>());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptFile, std::string("malformed meta.json: ") + e.what());
  }
  if (meta.metric != "cosine") {
    throw Error(ErrorCode::CorruptFile, "unsupported metric '" + meta.metric + "'");
  }
  return meta;
}

std::string random_suffix() {
  std::random_device rd;
  std::uint64_t bits = (static_cast<std::uint64_t>(rd()) << 32) | rd();
  std::ostringstream os;
  os << std::hex << bits;
  return os.str();
}

}  // namespace

void save_datastore(const Datastore& datastore, const fs::path& dir) {
  fs::path parent = dir.has_parent_path() ? dir.parent_path() : fs::path(".");
  std::error_code ec;
  fs::create_directories(parent, ec);
  fs::path tmp = parent / (dir.filename().string() + ".tmp-" + random_suffix());
  if (!fs::create_directories(tmp, ec) || ec) {
    throw Error(ErrorCode::IoFailure, "cannot create temporary directory " + tmp.string());
  }

  try {
    {
      std::ofstream meta_out(tmp / "meta.json", std::ios::trunc);
      if (!meta_out) throw Error(ErrorCode::IoFailure, "cannot write meta.json");
      meta_out << meta_to_json(datastore.meta()).dump(2) << "\n";
    }

    // Raw embeddings, all sequences concatenated in seq_id order.
    RowMatrix raw(datastore.entry_count(), datastore.dim());
    std::uint64_t row = 0;
    for (const SequenceRecord& seq : datastore.sequences()) {
      for (std::size_t t = 0; t < seq.length(); ++t, ++row) {
        auto src = seq.embeddings.row(t);
        std::copy(src.begin(), src.end(), raw.row(row).begin());
      }
    }
    write_matrix_file(tmp / "sequences.bin", raw);
    write_matrix_file(tmp / "entries.bin", datastore.normalized_keys());

    {
      std::ofstream texts(tmp / "texts.jsonl", std::ios::trunc);
      if (!texts) throw Error(ErrorCode::IoFailure, "cannot write texts.jsonl");
      for (const SequenceRecord& seq : datastore.sequences()) {
        json line{
            {"seq_id", seq.seq_id},
            {"source_tag", seq.source_tag},
            {"text", seq.text},
            {"tokens", seq.tokens},
            {"utterance_id", seq.utterance_id},
        };
        texts << line.dump() << "\n";
      }
    }
  } catch (...) {
    fs::remove_all(tmp, ec);
    throw;
  }

  // Atomic replace: drop any previous datastore, then rename into place.
  fs::remove_all(dir, ec);
  fs::rename(tmp, dir, ec);
  if (ec) {
    fs::remove_all(tmp, ec);
    throw Error(ErrorCode::IoFailure, "cannot move datastore into " + dir.string());
  }
}

Datastore load_datastore(const fs::path& dir) {
  fs::path meta_path = dir / "meta.json";
  std::ifstream meta_in(meta_path);
  if (!meta_in) {
    throw Error(ErrorCode::CorruptFile, "missing " + meta_path.string());
  }
  json meta_json;
  try {
    meta_in >> meta_json;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptFile, std::string("unparseable meta.json: ") + e.what());
  }

  Datastore store;
  store.meta_ = meta_from_json(meta_json);

  RowMatrix raw = read_matrix_file(dir / "sequences.bin");
  store.normalized_keys_ = read_matrix_file(dir / "entries.bin");

  std::ifstream texts(dir / "texts.jsonl");
  if (!texts) {
    throw Error(ErrorCode::CorruptFile, "missing texts.jsonl");
  }
  std::string line;
  std::uint64_t row = 0;
  while (std::getline(texts, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::CorruptFile, std::string("bad texts.jsonl record: ") + e.what());
    }
    SequenceRecord seq;
    try {
      seq.seq_id = j.at("seq_id").get<std::uint64_t>();
      seq.tokens = j.at("tokens").get<std::vector<std::int32_t>>();
      seq.text = j.at("text").get<std::string>();
      seq.source_tag = j.at("source_tag").get<std::string>();
      seq.utterance_id = j.value("utterance_id", std::string{});
    } catch (const json::exception& e) {
      throw Error(ErrorCode::CorruptFile, std::string("bad texts.jsonl record: ") + e.what());
    }
    if (seq.seq_id != store.sequences_.size()) {
      throw Error(ErrorCode::CorruptFile, "texts.jsonl seq_ids are not dense and ordered");
    }
    if (row + seq.tokens.size() > raw.rows) {
      throw Error(ErrorCode::CorruptFile, "sequences.bin shorter than texts.jsonl claims");
    }
    seq.embeddings = RowMatrix(seq.tokens.size(), raw.cols);
    for (std::size_t t = 0; t < seq.tokens.size(); ++t, ++row) {
      auto src = raw.row(row);
      std::copy(src.begin(), src.end(), seq.embeddings.row(t).begin());
    }
    store.sequences_.push_back(std::move(seq));
  }

  if (row != raw.rows) {
    throw Error(ErrorCode::CorruptFile, "sequences.bin longer than texts.jsonl claims");
  }

  DatastoreMeta declared = store.meta_;
  store.rebuild_derived();
  store.meta_.tokenizer_kind = declared.tokenizer_kind;
  if (store.meta_.entry_count != declared.entry_count ||
      store.meta_.sequence_count != declared.sequence_count ||
      raw.cols != declared.dim || store.normalized_keys_.rows != declared.entry_count ||
      store.normalized_keys_.cols != declared.dim) {
    throw Error(ErrorCode::CorruptFile, "meta.json counts disagree with stored data");
  }
  store.meta_.dim = declared.dim;
  return store;
}

}  // namespace larag
