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

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "larag/datastore.hpp"
#include "larag/errors.hpp"
#include "larag/evaluation.hpp"
#include "larag/manifest.hpp"
#include "larag/prompt.hpp"
#include "larag/retrieval.hpp"
#include "larag/tensor_io.hpp"
#include "larag/vector_index.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct AlignArgs {
  std::string manifest;
  std::string out_dir;
  std::string pooling = "mean";
  bool emit_spans = false;
};

int cmd_align(const AlignArgs& args) {
  const fs::path manifest_path(args.manifest);
  const fs::path manifest_dir = manifest_path.parent_path();
  const fs::path out_dir(args.out_dir);
  larag::Pooling pooling = larag::pooling_from_string(args.pooling);

  std::vector<larag::ManifestRecord> records = larag::read_manifest(manifest_path);
  fs::create_directories(out_dir / "tensors");

  std::vector<larag::ManifestRecord> out_records;
  json spans = json::array();
  json skipped = json::array();

  for (const larag::ManifestRecord& record : records) {
    larag::CorpusItem item = larag::load_corpus_item(record, manifest_dir);

    larag::ManifestRecord out = record;
    out.tokenized = true;
    out.logits.clear();
    out.features = "tensors/" + record.utterance_id + ".emb.larg";

    if (item.tokenized) {
      larag::write_matrix_file(out_dir / out.features, item.embeddings);
    } else {
      larag::Transcript transcript{item.tokens, item.text};
      try {
        larag::AlignedUtterance aligned =
            larag::align_and_embed(item.grid, item.hidden, transcript, pooling);
        larag::write_matrix_file(out_dir / out.features, aligned.embeddings);
        if (args.emit_spans) {
          json span_list = json::array();
          for (const larag::TokenSpan& span : aligned.alignment.spans) {
            span_list.push_back(json{{"token", span.token_id},
                                     {"frame_start", span.frame_start},
                                     {"frame_end", span.frame_end}});
          }
          spans.push_back(json{{"path_logprob", aligned.alignment.path_logprob},
                               {"spans", span_list},
                               {"utterance_id", record.utterance_id}});
        }
      } catch (const larag::Error& e) {
        if (e.code() != larag::ErrorCode::InfeasibleAlignment) throw;
        skipped.push_back(json{{"reason", e.what()}, {"utterance_id", record.utterance_id}});
        continue;
      }
    }
    out_records.push_back(std::move(out));
  }

  larag::write_manifest(out_records, out_dir / "manifest.jsonl");
  if (args.emit_spans) {
    std::ofstream out(out_dir / "spans.jsonl", std::ios::trunc);
    for (const json& j : spans) out << j.dump() << "\n";
  }
  if (!skipped.empty()) {
    std::ofstream out(out_dir / "skipped.jsonl", std::ios::trunc);
    for (const json& j : skipped) out << j.dump() << "\n";
  }

  std::cout << "aligned " << out_records.size() << " utterances";
  if (!skipped.empty()) std::cout << ", skipped " << skipped.size();
  std::cout << "\n";
  return 0;
}

struct BuildArgs {
  std::string manifest;
  std::string datastore_dir;
  std::string index = "exact";
  std::string pooling = "mean";
  std::size_t clusters = 0;  // 0 = default sizing
  std::size_t probe = 0;
  std::uint64_t kmeans_seed = 0;
  std::size_t kmeans_iters = 25;
};

int cmd_build(const BuildArgs& args) {
  const fs::path manifest_path(args.manifest);
  const fs::path manifest_dir = manifest_path.parent_path();

  std::vector<larag::ManifestRecord> records = larag::read_manifest(manifest_path);
  std::size_t cursor = 0;
  larag::BuildOptions options;
  options.pooling = larag::pooling_from_string(args.pooling);
  larag::BuildReport report;

  larag::Datastore datastore = larag::build_datastore(
      [&]() -> std::optional<larag::CorpusItem> {
        if (cursor >= records.size()) return std::nullopt;
        return larag::load_corpus_item(records[cursor++], manifest_dir);
      },
      options, &report);

  larag::save_datastore(datastore, args.datastore_dir);

  if (args.index == "ivf") {
    auto shared = std::make_shared<const larag::Datastore>(std::move(datastore));
    larag::IvfParams params =
        larag::IvfParams::defaults(shared->entry_count(), args.kmeans_seed);
    if (args.clusters > 0) params.n_clusters = args.clusters;
    if (args.probe > 0) params.n_probe = args.probe;
    params.kmeans_iters = args.kmeans_iters;
    params.validate(shared->entry_count());
    auto index = larag::build_ivf(shared, params);
    larag::save_ivf(*index, fs::path(args.datastore_dir) / "ivf.bin");
    std::cout << "ivf: " << params.n_clusters << " clusters, default n_probe "
              << params.n_probe << "\n";
    std::cout << "built datastore: " << shared->sequence_count() << " sequences, "
              << shared->entry_count() << " entries";
  } else {
    std::cout << "built datastore: " << datastore.sequence_count() << " sequences, "
              << datastore.entry_count() << " entries";
  }
  if (report.skipped > 0) std::cout << ", skipped " << report.skipped;
  std::cout << "\n";
  return 0;
}

struct QueryArgs {
  std::string datastore_dir;
  std::string query_manifest;
  std::string nbest;
  std::size_t k = 128;
  double threshold = 0.5;
  std::size_t examples = 4;
  bool no_prune = false;
  std::string strategy = "token_level";
  std::string index = "auto";
  std::size_t nprobe = 0;
  std::string pooling = "mean";
  std::uint64_t seed = 0;
  bool exclude_self = false;
  std::string out;
};

// Lets --nprobe override the probe count stored with an IVF index.
class ProbeOverrideIndex : public larag::SearchIndex {
 public:
  ProbeOverrideIndex(const larag::IvfIndex& ivf, std::size_t n_probe)
      : ivf_(ivf), n_probe_(n_probe) {}
  std::vector<larag::Neighbor> search(std::span<const float> query,
                                      std::size_t k) const override {
    return ivf_.search_probes(query, k, n_probe_);
  }
  std::size_t dim() const override { return ivf_.dim(); }
  std::uint64_t entry_count() const override { return ivf_.entry_count(); }

 private:
  const larag::IvfIndex& ivf_;
  std::size_t n_probe_;
};

int cmd_query(const QueryArgs& args) {
  auto datastore =
      std::make_shared<const larag::Datastore>(larag::load_datastore(args.datastore_dir));

  const fs::path ivf_path = fs::path(args.datastore_dir) / "ivf.bin";
  std::unique_ptr<larag::SearchIndex> index;
  std::unique_ptr<larag::IvfIndex> ivf;
  std::unique_ptr<ProbeOverrideIndex> probe_override;
  std::string index_kind;
  if (args.index == "ivf" || (args.index == "auto" && fs::exists(ivf_path))) {
    ivf = larag::load_ivf(datastore, ivf_path);
    if (args.nprobe > 0) {
      probe_override = std::make_unique<ProbeOverrideIndex>(*ivf, args.nprobe);
    }
    index_kind = "ivf";
  } else {
    index = larag::build_exact(datastore);
    index_kind = "exact";
  }
  const larag::SearchIndex& search_index =
      probe_override ? static_cast<const larag::SearchIndex&>(*probe_override)
      : ivf          ? static_cast<const larag::SearchIndex&>(*ivf)
                     : *index;

  const fs::path manifest_path(args.query_manifest);
  std::vector<larag::ManifestRecord> records = larag::read_manifest(manifest_path);
  std::map<std::string, larag::NBestList> nbest_map = larag::read_nbest_file(args.nbest);
  larag::Pooling pooling = larag::pooling_from_string(args.pooling);
  larag::RetrievalStrategy strategy = larag::strategy_from_string(args.strategy);

  std::unordered_map<std::string, std::uint64_t> utterance_to_seq;
  if (args.exclude_self) {
    for (const larag::SequenceRecord& seq : datastore->sequences()) {
      utterance_to_seq.emplace(seq.utterance_id, seq.seq_id);
    }
  }

  json results = json::array();
  for (std::size_t qi = 0; qi < records.size(); ++qi) {
    const larag::ManifestRecord& record = records[qi];
    json result{{"utterance_id", record.utterance_id}};

    auto nbest_it = nbest_map.find(record.utterance_id);
    if (nbest_it == nbest_map.end()) {
      throw larag::Error(larag::ErrorCode::LengthMismatch,
                         "no N-best list for utterance '" + record.utterance_id + "'");
    }
    const larag::NBestList& nbest = nbest_it->second;

    larag::CorpusItem item = larag::load_corpus_item(record, manifest_path.parent_path());
    larag::RowMatrix query_embeddings;
    if (item.tokenized) {
      query_embeddings = std::move(item.embeddings);
    } else {
      larag::Transcript transcript{item.tokens, item.text};
      try {
        query_embeddings =
            larag::align_and_embed(item.grid, item.hidden, transcript, pooling).embeddings;
      } catch (const larag::Error& e) {
        if (e.code() != larag::ErrorCode::InfeasibleAlignment) throw;
        result["error"] = e.what();
        results.push_back(std::move(result));
        continue;
      }
    }

    larag::RetrieveOptions options;
    options.k = args.k;
    options.threshold = args.threshold;
    options.max_examples = args.examples;
    if (args.exclude_self) {
      auto self = utterance_to_seq.find(record.utterance_id);
      if (self != utterance_to_seq.end()) options.exclude_seq_ids.insert(self->second);
    }

    std::vector<larag::ExampleCandidate> candidates;
    std::size_t query_length = query_embeddings.rows;
    json kept = json::array();

    switch (strategy) {
      case larag::RetrievalStrategy::kTokenLevel:
      case larag::RetrievalStrategy::kTokenLevelNoPrune: {
        larag::PrunedQuery pruned;
        if (args.no_prune || strategy == larag::RetrievalStrategy::kTokenLevelNoPrune) {
          pruned = larag::unpruned_query(query_embeddings);
        } else {
          pruned = larag::prune_query(query_embeddings, larag::align_nbest(nbest));
        }
        for (std::size_t pos : pruned.kept_positions) kept.push_back(pos);
        candidates = larag::retrieve(*datastore, search_index, pruned, options);
        break;
      }
      case larag::RetrievalStrategy::kRandom:
        candidates = larag::retrieve_random(*datastore, args.examples,
                                            args.seed + 0x9E3779B97F4A7C15ull * (qi + 1));
        for (std::size_t pos = 0; pos < query_length; ++pos) kept.push_back(pos);
        break;
      case larag::RetrievalStrategy::kSeqEmbedding:
        candidates = larag::retrieve_seq_embedding(*datastore, query_embeddings, args.examples);
        for (std::size_t pos = 0; pos < query_length; ++pos) kept.push_back(pos);
        break;
      case larag::RetrievalStrategy::kText:
        candidates = larag::retrieve_text(*datastore, nbest.hypotheses[0], args.examples);
        for (std::size_t pos = 0; pos < query_length; ++pos) kept.push_back(pos);
        break;
    }

    json candidate_list = json::array();
    for (const larag::ExampleCandidate& c : candidates) {
      candidate_list.push_back(json{{"hit_count", c.hit_count},
                                    {"raw_score", c.raw_score},
                                    {"score", c.score},
                                    {"seq_id", c.seq_id}});
    }
    result["query_length"] = query_length;
    result["kept_positions"] = kept;
    result["candidates"] = candidate_list;
    results.push_back(std::move(result));
  }

  json output{
      {"datastore", args.datastore_dir},
      {"index", index_kind},
      {"k", args.k},
      {"nbest", args.nbest},
      {"pooling", args.pooling},
      {"query_manifest", args.query_manifest},
      {"results", results},
      {"strategy", args.strategy},
      {"threshold", args.threshold},
  };

  if (args.out.empty()) {
    std::cout << output.dump(2) << "\n";
  } else {
    std::ofstream out(args.out, std::ios::trunc);
    if (!out) {
      throw larag::Error(larag::ErrorCode::IoFailure, "cannot write " + args.out);
    }
    out << output.dump(2) << "\n";
  }
  return 0;
}

struct PromptArgs {
  std::string query_results;
  std::string out_dir;
  std::string adapter;
  std::size_t random_adapter_dim = 0;
  std::size_t adapter_hidden = larag::kDefaultAdapterHidden;
  std::string activation = "relu";
  std::size_t nbest_limit = 5;
  std::uint64_t seed = 0;
  std::string save_adapter;
};

int cmd_prompt(const PromptArgs& args) {
  std::ifstream in(args.query_results);
  if (!in) {
    throw larag::Error(larag::ErrorCode::IoFailure,
                       "cannot open query results " + args.query_results);
  }
  json query_output;
  try {
    in >> query_output;
  } catch (const json::exception& e) {
    throw larag::Error(larag::ErrorCode::CorruptFile,
                       std::string("unparseable query results: ") + e.what());
  }

  const fs::path datastore_dir = query_output.at("datastore").get<std::string>();
  const fs::path query_manifest = query_output.at("query_manifest").get<std::string>();
  const fs::path nbest_path = query_output.at("nbest").get<std::string>();
  larag::Pooling pooling =
      larag::pooling_from_string(query_output.value("pooling", std::string("mean")));

  auto datastore =
      std::make_shared<const larag::Datastore>(larag::load_datastore(datastore_dir));

  larag::AdapterWeights adapter;
  if (!args.adapter.empty()) {
    adapter = larag::load_adapter(args.adapter);
    if (adapter.dim_in() != datastore->dim()) {
      throw larag::Error(larag::ErrorCode::DimensionMismatch,
                         "adapter input dim does not match datastore dim");
    }
  } else if (args.random_adapter_dim > 0) {
    adapter = larag::AdapterWeights::random(datastore->dim(), args.adapter_hidden,
                                            args.random_adapter_dim,
                                            larag::activation_from_string(args.activation),
                                            args.seed);
  } else {
    throw larag::Error(larag::ErrorCode::InvalidParams,
                       "pass --adapter FILE or --random-adapter DIM");
  }
  if (!args.save_adapter.empty()) {
    larag::save_adapter(adapter, args.save_adapter);
  }

  std::vector<larag::ManifestRecord> records = larag::read_manifest(query_manifest);
  std::unordered_map<std::string, const larag::ManifestRecord*> record_by_id;
  for (const larag::ManifestRecord& r : records) record_by_id.emplace(r.utterance_id, &r);
  std::map<std::string, larag::NBestList> nbest_map = larag::read_nbest_file(nbest_path);

  fs::create_directories(args.out_dir);
  std::size_t emitted = 0;

  for (const json& result : query_output.at("results")) {
    if (result.contains("error")) continue;
    const std::string utterance_id = result.at("utterance_id").get<std::string>();

    auto record_it = record_by_id.find(utterance_id);
    auto nbest_it = nbest_map.find(utterance_id);
    if (record_it == record_by_id.end() || nbest_it == nbest_map.end()) {
      throw larag::Error(larag::ErrorCode::CorruptFile,
                         "query results reference unknown utterance '" + utterance_id + "'");
    }

    larag::CorpusItem item =
        larag::load_corpus_item(*record_it->second, query_manifest.parent_path());
    larag::RowMatrix input_embeddings;
    if (item.tokenized) {
      input_embeddings = std::move(item.embeddings);
    } else {
      larag::Transcript transcript{item.tokens, item.text};
      input_embeddings =
          larag::align_and_embed(item.grid, item.hidden, transcript, pooling).embeddings;
    }

    larag::NBestList nbest = nbest_it->second;
    if (nbest.hypotheses.size() > args.nbest_limit) {
      nbest.hypotheses.resize(args.nbest_limit);
      if (!nbest.scores.empty()) nbest.scores.resize(args.nbest_limit);
    }

    std::vector<const larag::SequenceRecord*> examples;
    for (const json& candidate : result.at("candidates")) {
      examples.push_back(&datastore->sequence(candidate.at("seq_id").get<std::uint64_t>()));
    }

    larag::PromptLayout layout =
        larag::assemble_prompt(examples, adapter, input_embeddings, nbest);
    larag::serialize_prompt(layout, fs::path(args.out_dir) / (utterance_id + ".prompt.json"));
    emitted += 1;
  }

  std::cout << "wrote " << emitted << " prompts to " << args.out_dir << "\n";
  return 0;
}

struct EvalArgs {
  std::string hyp_file;
  std::string ref_file;
  bool strip_whitespace = false;
  bool as_json = false;
};

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw larag::Error(larag::ErrorCode::IoFailure, "cannot open " + path);
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

int cmd_eval(const EvalArgs& args) {
  std::vector<std::string> hyps = read_lines(args.hyp_file);
  std::vector<std::string> refs = read_lines(args.ref_file);
  if (hyps.size() != refs.size()) {
    throw larag::Error(larag::ErrorCode::LengthMismatch,
                       "hypothesis file has " + std::to_string(hyps.size()) +
                           " lines, reference file " + std::to_string(refs.size()));
  }

  larag::CerReport total;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    larag::CerReport r = larag::cer_utf8(hyps[i], refs[i], args.strip_whitespace);
    total.substitutions += r.substitutions;
    total.insertions += r.insertions;
    total.deletions += r.deletions;
    total.ref_length += r.ref_length;
  }
  total.cer =
      static_cast<double>(total.substitutions + total.insertions + total.deletions) /
      static_cast<double>(total.ref_length);

  if (args.as_json) {
    json j{{"cer", total.cer},
           {"deletions", total.deletions},
           {"insertions", total.insertions},
           {"ref_length", total.ref_length},
           {"substitutions", total.substitutions},
           {"utterances", hyps.size()}};
    std::cout << j.dump(2) << "\n";
  } else {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.4f", total.cer);
    std::cout << "cer " << buffer << "\n";
    std::cout << "substitutions " << total.substitutions << "\n";
    std::cout << "insertions " << total.insertions << "\n";
    std::cout << "deletions " << total.deletions << "\n";
    std::cout << "ref_length " << total.ref_length << "\n";
  }
  return 0;
}

struct BenchArgs {
  std::size_t bases = 100;
  std::size_t tokens_per_seq = 8;
  std::size_t dim = 32;
  std::size_t variants = 1;
  double sigma = 0.2;
  std::size_t vocab = 50;
  std::uint64_t seed = 0;
  std::size_t distractors = 0;
  std::size_t shared_tokens = 0;
  std::size_t nbest_hyps = 1;
  double disagree_prob = 0.0;
  std::string strategies = "token_level,random,seq_embedding,text";
  std::size_t k = 128;
  double threshold = 0.5;
  std::size_t examples = 4;
  std::string json_out;
  std::string emit_corpus;
  bool emit_raw = false;
  std::size_t frames_per_token = 2;
};

int cmd_bench(const BenchArgs& args) {
  larag::SynthCorpusParams params;
  params.n_base_sequences = args.bases;
  params.tokens_per_sequence = args.tokens_per_seq;
  params.dim = args.dim;
  params.n_variants_per_base = args.variants;
  params.noise_sigma = args.sigma;
  params.vocab_size = args.vocab;
  params.seed = args.seed;
  params.n_distractors_per_base = args.distractors;
  params.shared_tokens = args.shared_tokens;
  params.n_best_hypotheses = args.nbest_hyps;
  params.nbest_disagree_prob = args.disagree_prob;

  larag::SynthCorpus corpus = larag::synth_corpus(params);

  if (!args.emit_corpus.empty()) {
    larag::CorpusLayout layout =
        larag::write_synth_corpus(corpus, args.emit_corpus, args.emit_raw,
                                  args.frames_per_token);
    std::cout << "corpus manifest: " << layout.corpus_manifest.string() << "\n";
    std::cout << "query manifest: " << layout.query_manifest.string() << "\n";
    std::cout << "nbest: " << layout.nbest.string() << "\n";
    std::cout << "ground truth: " << layout.ground_truth.string() << "\n";
  }

  if (args.strategies.empty()) return 0;

  std::vector<larag::RetrievalStrategy> strategies;
  std::string token;
  std::istringstream stream(args.strategies);
  while (std::getline(stream, token, ',')) {
    if (!token.empty()) strategies.push_back(larag::strategy_from_string(token));
  }

  larag::BenchmarkOptions options;
  options.k = args.k;
  options.threshold = args.threshold;
  options.max_examples = args.examples;

  std::vector<larag::StrategyResult> results =
      larag::benchmark_retrieval(corpus, strategies, options);
  std::cout << larag::format_benchmark_table(results);

  if (!args.json_out.empty()) {
    json rows = json::array();
    for (const larag::StrategyResult& r : results) {
      rows.push_back(json{{"mean_rank", r.mean_rank},
                          {"queries", r.queries},
                          {"recall_at_1", r.recall_at_1},
                          {"recall_at_m", r.recall_at_m},
                          {"strategy", larag::strategy_name(r.strategy)},
                          {"wall_ms", r.wall_ms}});
    }
    json report{{"k", options.k},
                {"max_examples", options.max_examples},
                {"results", rows},
                {"seed", params.seed},
                {"threshold", options.threshold}};
    std::ofstream out(args.json_out, std::ios::trunc);
    if (!out) {
      throw larag::Error(larag::ErrorCode::IoFailure, "cannot write " + args.json_out);
    }
    out << report.dump(2) << "\n";
  }
  return 0;
}

struct StatsArgs {
  std::string datastore_dir;
  bool as_json = false;
};

int cmd_stats(const StatsArgs& args) {
  larag::Datastore datastore = larag::load_datastore(args.datastore_dir);
  larag::DatastoreStats stats = datastore.stats();

  if (args.as_json) {
    json sources = json::object();
    for (const auto& [tag, count] : stats.tokens_per_source) sources[tag] = count;
    json j{{"dim", stats.meta.dim},
           {"entry_count", stats.meta.entry_count},
           {"format_version", stats.meta.format_version},
           {"metric", stats.meta.metric},
           {"sequence_count", stats.meta.sequence_count},
           {"tokenizer_kind", larag::tokenizer_kind_name(stats.meta.tokenizer_kind)},
           {"tokens_per_source", sources}};
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "entry_count " << stats.meta.entry_count << "\n";
    std::cout << "sequence_count " << stats.meta.sequence_count << "\n";
    std::cout << "dim " << stats.meta.dim << "\n";
    std::cout << "tokenizer_kind " << larag::tokenizer_kind_name(stats.meta.tokenizer_kind)
              << "\n";
    std::cout << "metric " << stats.meta.metric << "\n";
    std::cout << "format_version " << stats.meta.format_version << "\n";
    for (const auto& [tag, count] : stats.tokens_per_source) {
      std::cout << "source " << tag << " " << count << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"larag: token-level speech retrieval engine and evaluation toolkit"};
  app.require_subcommand(1);

  AlignArgs align_args;
  CLI::App* align = app.add_subcommand(
      "align", "Force-align a raw corpus manifest into per-token embeddings");
  align->add_option("manifest", align_args.manifest, "corpus manifest.jsonl")->required();
  align->add_option("out", align_args.out_dir, "output directory")->required();
  align->add_option("--pooling", align_args.pooling, "span pooling: mean|first|max")
      ->default_str("mean");
  align->add_flag("--spans", align_args.emit_spans, "also write spans.jsonl");

  BuildArgs build_args;
  CLI::App* build = app.add_subcommand("build", "Build a datastore from a corpus manifest");
  build->add_option("manifest", build_args.manifest, "corpus manifest.jsonl")->required();
  build->add_option("datastore", build_args.datastore_dir, "datastore directory")->required();
  build->add_option("--index", build_args.index, "index backend: exact|ivf")
      ->check(CLI::IsMember({"exact", "ivf"}))
      ->default_str("exact");
  build->add_option("--pooling", build_args.pooling, "span pooling: mean|first|max")
      ->default_str("mean");
  build->add_option("--clusters", build_args.clusters, "IVF cluster count (default sqrt(n))");
  build->add_option("--probe", build_args.probe, "IVF default probe count");
  build->add_option("--kmeans-seed", build_args.kmeans_seed, "IVF k-means seed")
      ->default_str("0");
  build->add_option("--kmeans-iters", build_args.kmeans_iters, "IVF k-means iterations")
      ->default_str("25");

  QueryArgs query_args;
  CLI::App* query = app.add_subcommand("query", "Retrieve examples for query utterances");
  query->add_option("datastore", query_args.datastore_dir, "datastore directory")->required();
  query->add_option("manifest", query_args.query_manifest, "query manifest.jsonl")->required();
  query->add_option("nbest", query_args.nbest, "query N-best JSONL")->required();
  query->add_option("--k", query_args.k, "neighbors per query token")->default_str("128");
  query->add_option("--threshold", query_args.threshold, "normalized score filter")
      ->default_str("0.5");
  query->add_option("--examples", query_args.examples, "max examples returned")
      ->default_str("4");
  query->add_flag("--no-prune", query_args.no_prune, "skip N-best consensus pruning");
  query->add_option("--strategy", query_args.strategy, "retrieval strategy")
      ->check(CLI::IsMember(
          {"token_level", "token_level_no_prune", "random", "seq_embedding", "text"}))
      ->default_str("token_level");
  query->add_option("--index", query_args.index, "index backend")
      ->check(CLI::IsMember({"auto", "exact", "ivf"}))
      ->default_str("auto");
  query->add_option("--nprobe", query_args.nprobe, "IVF cells to probe (0 = stored default)");
  query->add_option("--pooling", query_args.pooling, "span pooling for raw queries")
      ->default_str("mean");
  query->add_option("--seed", query_args.seed, "seed for the random strategy")
      ->default_str("0");
  query->add_flag("--exclude-self", query_args.exclude_self,
                  "leave-one-out: drop candidates with the query's utterance_id");
  query->add_option("--out", query_args.out, "write results JSON here instead of stdout");

  PromptArgs prompt_args;
  CLI::App* prompt = app.add_subcommand("prompt", "Assemble prompts from query results");
  prompt->add_option("results", prompt_args.query_results, "query results JSON")->required();
  prompt->add_option("out", prompt_args.out_dir, "output directory")->required();
  prompt->add_option("--adapter", prompt_args.adapter, "adapter weights JSON header");
  prompt->add_option("--random-adapter", prompt_args.random_adapter_dim,
                     "generate seeded random adapter weights with this output dim");
  prompt->add_option("--adapter-hidden", prompt_args.adapter_hidden,
                     "hidden width for --random-adapter")
      ->default_str(std::to_string(larag::kDefaultAdapterHidden));
  prompt->add_option("--activation", prompt_args.activation, "adapter activation")
      ->check(CLI::IsMember({"relu", "gelu", "identity"}))
      ->default_str("relu");
  prompt->add_option("--nbest", prompt_args.nbest_limit, "hypotheses to include")
      ->default_str("5");
  prompt->add_option("--seed", prompt_args.seed, "seed for --random-adapter")
      ->default_str("0");
  prompt->add_option("--save-adapter", prompt_args.save_adapter,
                     "also write the adapter weights here");

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "Character error rate between two text files");
  eval->add_option("hyp", eval_args.hyp_file, "hypothesis file, one utterance per line")
      ->required();
  eval->add_option("ref", eval_args.ref_file, "reference file, one utterance per line")
      ->required();
  eval->add_flag("--strip-whitespace", eval_args.strip_whitespace,
                 "remove whitespace before scoring");
  eval->add_flag("--json", eval_args.as_json, "emit a JSON report");

  BenchArgs bench_args;
  CLI::App* bench = app.add_subcommand(
      "bench", "Synthetic retrieval benchmark; can also emit corpora");
  bench->add_option("--bases", bench_args.bases)->default_str("100");
  bench->add_option("--tokens-per-seq", bench_args.tokens_per_seq)->default_str("8");
  bench->add_option("--dim", bench_args.dim)->default_str("32");
  bench->add_option("--variants", bench_args.variants)->default_str("1");
  bench->add_option("--sigma", bench_args.sigma)->default_str("0.2");
  bench->add_option("--vocab", bench_args.vocab)->default_str("50");
  bench->add_option("--seed", bench_args.seed)->default_str("0");
  bench->add_option("--distractors", bench_args.distractors)->default_str("0");
  bench->add_option("--shared-tokens", bench_args.shared_tokens)->default_str("0");
  bench->add_option("--nbest-hyps", bench_args.nbest_hyps)->default_str("1");
  bench->add_option("--disagree-prob", bench_args.disagree_prob)->default_str("0");
  bench->add_option("--strategies", bench_args.strategies,
                    "comma-separated strategies; empty to skip the run");
  bench->add_option("--k", bench_args.k)->default_str("128");
  bench->add_option("--threshold", bench_args.threshold)->default_str("0.5");
  bench->add_option("--examples", bench_args.examples)->default_str("4");
  bench->add_option("--json", bench_args.json_out, "write a JSON report here");
  bench->add_option("--emit-corpus", bench_args.emit_corpus,
                    "write the corpus in the standard ingestion formats");
  bench->add_flag("--emit-raw", bench_args.emit_raw,
                  "emit fabricated grids and hidden states instead of token embeddings");
  bench->add_option("--frames-per-token", bench_args.frames_per_token)->default_str("2");

  StatsArgs stats_args;
  CLI::App* stats = app.add_subcommand("stats", "Datastore accounting");
  stats->add_option("datastore", stats_args.datastore_dir, "datastore directory")->required();
  stats->add_flag("--json", stats_args.as_json, "emit a JSON report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (align->parsed()) return cmd_align(align_args);
    if (build->parsed()) return cmd_build(build_args);
    if (query->parsed()) return cmd_query(query_args);
    if (prompt->parsed()) return cmd_prompt(prompt_args);
    if (eval->parsed()) return cmd_eval(eval_args);
    if (bench->parsed()) return cmd_bench(bench_args);
    if (stats->parsed()) return cmd_stats(stats_args);
  } catch (const larag::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: IoFailure: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
