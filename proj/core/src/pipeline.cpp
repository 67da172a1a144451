#include "revmine/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <unordered_map>

#include "revmine/errors.hpp"
#include "revmine/util.hpp"

namespace revmine {

using nlohmann::json;

namespace {

class StageTimer {
 public:
  StageTimer(RunTimings& timings, std::string stage)
      : timings_(timings), stage_(std::move(stage)), start_(std::chrono::steady_clock::now()) {}
  ~StageTimer() {
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start_;
    timings_.stage_seconds[stage_] += elapsed.count();
  }

 private:
  RunTimings& timings_;
  std::string stage_;
  std::chrono::steady_clock::time_point start_;
};

// Runs `score`, turning a backend failure into a checkpoint when the score
// cache already holds finished cells a rerun can pick up.
template <typename Fn>
auto with_checkpoint(const ScoreCache& cache, const std::string& stage, Fn&& score) {
  try {
    return score();
  } catch (const ScoringError& e) {
    if (cache.size() > 0) {
      throw CheckpointError(std::string(e.what()) + " (" + std::to_string(cache.size()) +
                                " cached cells kept; rerun to resume)",
                            stage);
    }
    throw;
  }
}

json set_descriptor(const HypothesisSet& set) {
  return json{{"set_id", set.set_id},
              {"name", set.name},
              {"size", set.size()},
              {"version_hash", set.version_hash}};
}

std::string key_of(std::string_view model, std::string_view set) {
  return std::string(model) + "/" + std::string(set);
}

}  // namespace

json to_json(const RunManifest& m) {
  const StageCounts& c = m.counts;
  json counts{{"ingested", c.ingested},
              {"rejected", c.rejected},
              {"rating_filtered", c.rating_filtered},
              {"gold_excluded", c.gold_excluded},
              {"nli_scored", c.nli_scored},
              {"maybe_privacy", c.maybe_privacy},
              {"maybe_not_privacy", c.maybe_not_privacy},
              {"undetermined", c.undetermined},
              {"llm_yes", c.llm_yes},
              {"llm_no", c.llm_no},
              {"llm_failed", c.llm_failed},
              {"llm_ties", c.llm_ties},
              {"human_confirmed", c.human_confirmed},
              {"human_rejected", c.human_rejected},
              {"human_skipped", c.human_skipped}};
  return json{{"run_id", m.run_id},
              {"config_digest", m.config_digest},
              {"counts", counts},
              {"annotation_complete", m.annotation_complete},
              {"backends", m.backends},
              {"hypothesis_set", m.hypothesis_set},
              {"prompt_template", m.prompt_template},
              {"sampling", m.sampling}};
}

RunManifest manifest_from_json(const json& doc) {
  try {
    RunManifest m;
    m.run_id = doc.at("run_id").get<std::string>();
    m.config_digest = doc.at("config_digest").get<std::string>();
    const json& c = doc.at("counts");
    StageCounts& s = m.counts;
    s.ingested = c.at("ingested").get<std::size_t>();
    s.rejected = c.at("rejected").get<std::size_t>();
    s.rating_filtered = c.at("rating_filtered").get<std::size_t>();
    s.gold_excluded = c.at("gold_excluded").get<std::size_t>();
    s.nli_scored = c.at("nli_scored").get<std::size_t>();
    s.maybe_privacy = c.at("maybe_privacy").get<std::size_t>();
    s.maybe_not_privacy = c.at("maybe_not_privacy").get<std::size_t>();
    s.undetermined = c.at("undetermined").get<std::size_t>();
    s.llm_yes = c.at("llm_yes").get<std::size_t>();
    s.llm_no = c.at("llm_no").get<std::size_t>();
    s.llm_failed = c.at("llm_failed").get<std::size_t>();
    s.llm_ties = c.at("llm_ties").get<std::size_t>();
    s.human_confirmed = c.at("human_confirmed").get<std::size_t>();
    s.human_rejected = c.at("human_rejected").get<std::size_t>();
    s.human_skipped = c.at("human_skipped").get<std::size_t>();
    m.annotation_complete = doc.at("annotation_complete").get<bool>();
    m.backends = doc.value("backends", json::object());
    m.hypothesis_set = doc.value("hypothesis_set", json::object());
    m.prompt_template = doc.value("prompt_template", "");
    m.sampling = doc.value("sampling", json::object());
    return m;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("manifest: ") + e.what());
  }
}

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest) {
  write_file_atomic(path, to_json(manifest).dump(2) + "\n");
}

RunManifest read_manifest(const std::filesystem::path& path) {
  json doc = json::parse(read_file(path), nullptr, false);
  if (doc.is_discarded()) throw ValidationError(path.string() + " is not valid JSON");
  return manifest_from_json(doc);
}

json to_json(const RunTimings& t) {
  return json{{"stage_seconds", t.stage_seconds},
              {"nli_requests", t.nli_requests},
              {"llm_requests", t.llm_requests}};
}

std::vector<std::string> check_conservation(const RunManifest& m) {
  const StageCounts& c = m.counts;
  std::vector<std::string> out;
  auto expect = [&](bool ok, std::string rule) {
    if (!ok) out.push_back(std::move(rule));
  };
  expect(c.rating_filtered <= c.ingested, "rating_filtered <= ingested");
  expect(c.gold_excluded <= c.rating_filtered, "gold_excluded <= rating_filtered");
  expect(c.nli_scored + c.gold_excluded == c.rating_filtered,
         "nli_scored = rating_filtered - gold_excluded");
  expect(c.maybe_privacy + c.maybe_not_privacy + c.undetermined == c.nli_scored,
         "maybe_privacy + maybe_not_privacy + undetermined = nli_scored");
  expect(c.llm_yes + c.llm_no + c.llm_failed == c.maybe_privacy,
         "llm_yes + llm_no + llm_failed = maybe_privacy");
  expect(c.llm_ties <= c.llm_no, "llm_ties <= llm_no");
  expect(c.human_confirmed + c.human_rejected + c.human_skipped == c.llm_yes,
         "human_confirmed + human_rejected + human_skipped = llm_yes");
  expect(!m.annotation_complete || c.human_skipped == 0,
         "human_skipped = 0 once annotation is complete");
  return out;
}

void apply_annotation(RunManifest& manifest, const AnnotationOutcome& outcome) {
  const std::size_t total = outcome.finals.size() + outcome.leftovers.size();
  if (total != manifest.counts.llm_yes) {
    throw ValidationError("annotation covers " + std::to_string(total) + " reviews but the run has " +
                          std::to_string(manifest.counts.llm_yes) + " llm-yes reviews");
  }
  manifest.counts.human_confirmed = outcome.count(AnnotationLabel::privacy);
  manifest.counts.human_rejected = outcome.count(AnnotationLabel::non_privacy);
  manifest.counts.human_skipped = outcome.leftovers.size();
  manifest.annotation_complete = outcome.complete();
}

ReviewCorpus load_corpus(const std::filesystem::path& path, const CorpusConfig& config,
                         std::vector<Reject>* rejects) {
  IngestResult in = ingest_reviews(path, config.format.value_or(format_from_path(path)));
  if (rejects) *rejects = std::move(in.rejects);
  return normalize_corpus(std::move(in.corpus));
}

json to_json(const SelectionResult& r) {
  json confusion = json::object();
  for (const auto& [key, cm] : r.confusion) {
    json entry = to_json(cm);
    entry["metrics"] = to_json(metrics(cm));
    confusion[key] = entry;
  }
  return json{{"models", to_json(r.models)},
              {"hypothesis_sets", to_json(r.hypothesis_sets)},
              {"best_model", r.best_model},
              {"best_set", r.best_set},
              {"confusion", confusion},
              {"pseudo_labels",
               {{"maybe_privacy", r.pseudo.count(PseudoLabel::maybe_privacy)},
                {"maybe_not_privacy", r.pseudo.count(PseudoLabel::maybe_not_privacy)},
                {"undetermined", r.pseudo.count(PseudoLabel::undetermined)}}}};
}

SelectionResult run_selection(const PipelineConfig& config) {
  if (!config.corpus.labeled) throw ValidationError("selection needs corpus.labeled");
  if (config.nli_backends.empty()) throw ValidationError("selection needs at least one NLI backend");

  std::vector<HypothesisSet> sets;
  for (const std::string& ref : config.hypothesis_sets) {
    sets.push_back(resolve_hypothesis_set(ref));
    for (std::size_t i = 0; i + 1 < sets.size(); ++i) {
      if (sets[i].set_id == sets.back().set_id) {
        throw ValidationError("hypothesis set id \"" + sets.back().set_id + "\" appears twice");
      }
    }
  }

  ReviewCorpus gold = partition_gold(load_corpus(*config.corpus.labeled, config.corpus)).labeled;
  if (gold.empty()) throw ValidationError("labeled corpus has no gold-labeled reviews");

  const WorkDir wd{config.work_dir};
  std::filesystem::create_directories(wd.root);
  ScoreCache cache(wd.score_cache());

  SelectionResult result;
  std::map<std::string, PseudoLabeledCorpus> pseudo_by_pair;
  auto evaluate = [&](const NliBackendConfig& bc, const HypothesisSet& set) {
    auto backend = make_nli_backend(bc);
    EntailmentMatrix matrix = with_checkpoint(cache, "selection", [&] {
      return score_corpus(*backend, gold, set, &cache);
    });
    PseudoLabeledCorpus pseudo = apply_heuristics(matrix, set.heuristics);
    ConfusionMatrix cm = confusion_from_nli(gold, pseudo);
    const std::string key = key_of(bc.descriptor.name, set.set_id);
    result.confusion[key] = cm;
    pseudo_by_pair[key] = std::move(pseudo);
    return metrics(cm);
  };

  const HypothesisSet& baseline_set = sets.front();
  std::vector<Candidate> models;
  for (const NliBackendConfig& bc : config.nli_backends) {
    models.push_back({bc.descriptor.name, evaluate(bc, baseline_set)});
  }
  result.models = select_best(models);
  result.best_model = result.models.winner;

  const NliBackendConfig* best = nullptr;
  for (const NliBackendConfig& bc : config.nli_backends) {
    if (bc.descriptor.name == result.best_model) best = &bc;
  }
  std::vector<Candidate> set_rows;
  set_rows.push_back({baseline_set.set_id, result.models.row(result.best_model).metrics});
  for (std::size_t i = 1; i < sets.size(); ++i) {
    set_rows.push_back({sets[i].set_id, evaluate(*best, sets[i])});
  }
  result.hypothesis_sets = select_best(set_rows, baseline_set.set_id);
  result.best_set = result.hypothesis_sets.winner;
  result.pseudo = pseudo_by_pair.at(key_of(result.best_model, result.best_set));

  write_pseudo_labels(wd.pseudo_labels(), result.pseudo);
  write_file_atomic(wd.selection(), to_json(result).dump(2) + "\n");
  return result;
}

ExtractionResult run_extraction(const PipelineConfig& config) {
  if (!config.corpus.unlabeled) throw ValidationError("extraction needs corpus.unlabeled");
  if (!config.llm) throw ValidationError("extraction needs an llm.backend");
  const NliBackendConfig& nli_cfg = config.selected_nli();
  const HypothesisSet set = resolve_hypothesis_set(config.hypotheses_selected);
  const PromptTemplate tmpl =
      config.prompt_template ? PromptTemplate::load(*config.prompt_template) : PromptTemplate::builtin();

  const WorkDir wd{config.work_dir};
  std::filesystem::create_directories(wd.root);

  ExtractionResult out;
  RunManifest& m = out.manifest;
  StageCounts& c = m.counts;
  m.config_digest = config.digest();
  m.backends = json{{"nli", to_json(nli_cfg.descriptor)}, {"llm", to_json(config.llm->descriptor)}};
  m.hypothesis_set = set_descriptor(set);
  m.prompt_template = tmpl.version;
  m.sampling = to_json(config.sampling);

  // Ingest, filter, normalize.
  ReviewCorpus corpus;
  {
    StageTimer timer(out.timings, "ingest");
    const std::string raw = read_file(*config.corpus.unlabeled);
    m.run_id = sha256_hex(m.config_digest + ":" + sha256_hex(raw)).substr(0, 16);
    const CorpusFormat fmt =
        config.corpus.format.value_or(format_from_path(*config.corpus.unlabeled));
    IngestResult in = ingest_reviews_from_string(raw, fmt, config.corpus.unlabeled->string());
    write_rejects(wd.rejects(), in.rejects);
    c.ingested = in.corpus.size();
    c.rejected = in.rejects.size();

    ReviewCorpus filtered = filter_by_rating(in.corpus, config.corpus.rating_min, config.corpus.rating_max);
    c.rating_filtered = filtered.size();
    GoldPartition parts = partition_gold(filtered);
    c.gold_excluded = parts.labeled.size();
    corpus = normalize_corpus(std::move(parts.unlabeled));
    write_corpus_jsonl(wd.corpus(), corpus);
  }

  // NLI scoring and heuristic labels.
  EntailmentMatrix matrix;
  PseudoLabeledCorpus pseudo;
  {
    StageTimer timer(out.timings, "nli");
    auto backend = make_nli_backend(nli_cfg);
    ScoreCache cache(wd.score_cache());
    matrix = with_checkpoint(cache, "nli", [&] { return score_corpus(*backend, corpus, set, &cache); });
    out.timings.nli_requests = backend->call_count();
    write_matrix(wd.matrix(), matrix);
    pseudo = apply_heuristics(matrix, set.heuristics);
    write_pseudo_labels(wd.pseudo_labels(), pseudo);
    c.nli_scored = pseudo.size();
    c.maybe_privacy = pseudo.count(PseudoLabel::maybe_privacy);
    c.maybe_not_privacy = pseudo.count(PseudoLabel::maybe_not_privacy);
    c.undetermined = pseudo.count(PseudoLabel::undetermined);
  }

  // LLM classification of the maybe_privacy subset.
  ReviewCorpus candidates = select_maybe_privacy(corpus, pseudo);
  ClassificationResult votes;
  {
    StageTimer timer(out.timings, "llm");
    auto backend = make_llm_backend(*config.llm);
    VoteLog log(wd.vote_log());
    ClassifyOptions opts;
    opts.prompt_template = &tmpl;
    opts.log = &log;
    votes = classify_corpus(*backend, candidates, pseudo, set, config.sampling, opts);
    out.timings.llm_requests = backend->call_count();
    write_vote_records(wd.votes(), votes.records);
    std::string failed;
    for (const FailedReview& f : votes.failed) {
      failed += json{{"id", f.review_id}, {"reason", f.reason}}.dump();
      failed += '\n';
    }
    write_file_atomic(wd.failed(), failed);
    c.llm_yes = votes.count(BinaryLabel::yes);
    c.llm_no = votes.count(BinaryLabel::no);
    c.llm_failed = votes.failed.size();
    c.llm_ties = static_cast<std::size_t>(std::count_if(
        votes.records.begin(), votes.records.end(), [](const VoteRecord& v) { return v.tie_flag; }));
  }

  // Annotation queue: yes decisions with the evidence behind them.
  {
    StageTimer timer(out.timings, "queue");
    std::unordered_map<std::string_view, std::size_t> row_of;
    for (std::size_t i = 0; i < matrix.rows(); ++i) row_of[matrix.review_ids[i]] = i;
    std::unordered_map<int, std::size_t> col_of;
    for (std::size_t j = 0; j < matrix.cols(); ++j) col_of[matrix.hypothesis_ids[j]] = j;
    std::unordered_map<std::string_view, const Review*> review_of;
    for (const Review& r : candidates.reviews) review_of[r.id] = &r;

    std::vector<QueueItem> queue;
    for (const VoteRecord& v : votes.records) {
      if (v.decision != BinaryLabel::yes) continue;
      QueueItem item;
      item.review = *review_of.at(v.review_id);
      item.nli_backend = nli_cfg.descriptor.name;
      item.hypothesis_set = set.set_id;
      const std::size_t row = row_of.at(v.review_id);
      const auto& triggered = pseudo.triggered[row];
      for (int h : triggered) item.trigger_scores[h] = matrix.at(row, col_of.at(h));
      item.votes = v;
      out.queued_ids.push_back(v.review_id);
      queue.push_back(std::move(item));
    }
    write_queue(wd.queue(), queue);
  }

  c.human_skipped = c.llm_yes;
  m.annotation_complete = c.llm_yes == 0;

  if (auto broken = check_conservation(m); !broken.empty()) {
    throw Error("extraction manifest violates conservation: " + broken.front());
  }
  write_manifest(wd.manifest(), m);
  write_file_atomic(wd.timings(), to_json(out.timings).dump(2) + "\n");
  return out;
}

}  // namespace revmine
