#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "revmine/annotation.hpp"
#include "revmine/config.hpp"
#include "revmine/corpus.hpp"
#include "revmine/evaluation.hpp"
#include "revmine/hypotheses.hpp"
#include "revmine/llm.hpp"
#include "revmine/nli.hpp"

namespace revmine {

// Counts per stage of the extraction flow. Each stage's input equals the
// previous stage's qualifying output:
//   ingested -> rating_filtered -> (minus gold_excluded) nli_scored
//   nli_scored = maybe_privacy + maybe_not_privacy + undetermined
//   maybe_privacy = llm_yes + llm_no + llm_failed
//   llm_yes = human_confirmed + human_rejected + human_skipped
struct StageCounts {
  std::size_t ingested = 0;
  std::size_t rejected = 0;
  std::size_t rating_filtered = 0;
  std::size_t gold_excluded = 0;
  std::size_t nli_scored = 0;
  std::size_t maybe_privacy = 0;
  std::size_t maybe_not_privacy = 0;
  std::size_t undetermined = 0;
  std::size_t llm_yes = 0;
  std::size_t llm_no = 0;
  std::size_t llm_failed = 0;
  std::size_t llm_ties = 0;
  std::size_t human_confirmed = 0;
  std::size_t human_rejected = 0;
  std::size_t human_skipped = 0;

  bool operator==(const StageCounts&) const = default;
};

struct RunManifest {
  std::string run_id;
  std::string config_digest;
  StageCounts counts;
  bool annotation_complete = false;
  nlohmann::json backends = nlohmann::json::object();
  nlohmann::json hypothesis_set = nlohmann::json::object();
  std::string prompt_template;
  nlohmann::json sampling = nlohmann::json::object();
};

// Wall-clock data kept out of the manifest so manifests stay byte-identical
// across reruns.
struct RunTimings {
  std::map<std::string, double> stage_seconds;
  std::size_t nli_requests = 0;
  std::size_t llm_requests = 0;
};

nlohmann::json to_json(const RunTimings& timings);

nlohmann::json to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const nlohmann::json& doc);
void write_manifest(const std::filesystem::path& path, const RunManifest& manifest);
RunManifest read_manifest(const std::filesystem::path& path);

// Violated conservation rules, empty when the manifest is consistent.
// human_skipped must be zero once annotation_complete is set.
std::vector<std::string> check_conservation(const RunManifest& manifest);

// Folds an annotation outcome into the human_* counts. The outcome must cover
// exactly the llm_yes reviews.
void apply_annotation(RunManifest& manifest, const AnnotationOutcome& outcome);

// File layout inside a run's work directory.
struct WorkDir {
  std::filesystem::path root;

  std::filesystem::path manifest() const { return root / "manifest.json"; }
  std::filesystem::path timings() const { return root / "timings.json"; }
  std::filesystem::path rejects() const { return root / "rejects.jsonl"; }
  std::filesystem::path corpus() const { return root / "corpus.jsonl"; }
  std::filesystem::path score_cache() const { return root / "nli_cache.jsonl"; }
  std::filesystem::path matrix() const { return root / "matrix.bin"; }
  std::filesystem::path pseudo_labels() const { return root / "pseudo_labels.jsonl"; }
  std::filesystem::path vote_log() const { return root / "votes.log.jsonl"; }
  std::filesystem::path votes() const { return root / "votes.jsonl"; }
  std::filesystem::path failed() const { return root / "llm_failed.jsonl"; }
  std::filesystem::path queue() const { return root / "annotation_queue.jsonl"; }
  std::filesystem::path annotation_log() const { return root / "annotation_events.jsonl"; }
  std::filesystem::path annotation_report() const { return root / "annotation_report.json"; }
  std::filesystem::path selection() const { return root / "selection.json"; }
};

// Reviews read from the config's corpus path, normalized.
ReviewCorpus load_corpus(const std::filesystem::path& path, const CorpusConfig& config,
                         std::vector<Reject>* rejects = nullptr);

struct SelectionResult {
  ComparisonTable models;           // every backend on the baseline set
  ComparisonTable hypothesis_sets;  // best backend on every set
  std::string best_model;
  std::string best_set;
  std::map<std::string, ConfusionMatrix> confusion;  // "<model>/<set>" -> counts
  PseudoLabeledCorpus pseudo;                         // from the winning pair
};

nlohmann::json to_json(const SelectionResult& result);

// Model and hypothesis-set selection over the labeled corpus: score it with
// every configured backend on the first hypothesis set, keep the backend
// with the best f1, score that backend on the remaining sets, keep the best
// set, and emit the pseudo labels of the winning pair. Writes selection.json
// and pseudo_labels.jsonl into the work dir. A backend failure after partial
// progress raises CheckpointError (cache kept for resume).
SelectionResult run_selection(const PipelineConfig& config);

struct ExtractionResult {
  RunManifest manifest;
  RunTimings timings;
  std::vector<std::string> queued_ids;  // llm-yes reviews awaiting annotation
};

// Normalize -> NLI score and label -> LLM classify the maybe_privacy subset
// -> queue yes decisions for annotation. Gold-labeled reviews are excluded.
// Writes every intermediate artifact and the manifest into the work dir.
ExtractionResult run_extraction(const PipelineConfig& config);

}  // namespace revmine
