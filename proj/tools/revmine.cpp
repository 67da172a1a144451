// revmine: command-line driver for the review-mining pipeline.

#include <CLI11.hpp>

#include <nlohmann/json.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "revmine/annotation.hpp"
#include "revmine/config.hpp"
#include "revmine/corpus.hpp"
#include "revmine/errors.hpp"
#include "revmine/evaluation.hpp"
#include "revmine/hypotheses.hpp"
#include "revmine/llm.hpp"
#include "revmine/nli.hpp"
#include "revmine/pipeline.hpp"
#include "revmine/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace revmine;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitBackend = 3;
constexpr int kExitCheckpoint = 4;

struct CommonOptions {
  std::string config;
  std::optional<std::string> hypotheses;
  std::optional<std::string> nli_endpoint;
  std::optional<std::string> llm_endpoint;
  std::optional<std::uint64_t> seed;
  std::optional<int> max_inflight;
  std::optional<std::string> work_dir;

  PipelineConfig load() const {
    ConfigOverrides ov;
    ov.hypotheses = hypotheses;
    ov.nli_endpoint = nli_endpoint;
    ov.llm_endpoint = llm_endpoint;
    ov.seed = seed;
    ov.max_inflight = max_inflight;
    if (work_dir) ov.work_dir = fs::path(*work_dir);
    return load_config(config, ov);
  }
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-c,--config", o.config, "Pipeline config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--hypotheses", o.hypotheses, "Hypothesis set: builtin:generic, builtin:domain_mh or a file");
  cmd->add_option("--nli-endpoint", o.nli_endpoint, "Endpoint of the selected NLI backend (URL or mock)");
  cmd->add_option("--llm-endpoint", o.llm_endpoint, "Endpoint of the LLM backend (URL or mock)");
  cmd->add_option("--seed", o.seed, "Seed for mock backends");
  cmd->add_option("--max-inflight", o.max_inflight, "Concurrent requests per backend")->check(CLI::PositiveNumber);
  cmd->add_option("--work-dir", o.work_dir, "Output directory (overrides work_dir)");
}

WorkDir work_dir(const PipelineConfig& cfg) {
  fs::create_directories(cfg.work_dir);
  return WorkDir{cfg.work_dir};
}

void print_counts(const StageCounts& c) {
  std::printf("ingested           %zu (rejected %zu)\n", c.ingested, c.rejected);
  std::printf("rating filtered    %zu (gold excluded %zu)\n", c.rating_filtered, c.gold_excluded);
  std::printf("nli scored         %zu\n", c.nli_scored);
  std::printf("  maybe_privacy    %zu\n", c.maybe_privacy);
  std::printf("  maybe_not        %zu\n", c.maybe_not_privacy);
  std::printf("  undetermined     %zu\n", c.undetermined);
  std::printf("llm yes / no / failed  %zu / %zu / %zu (ties %zu)\n", c.llm_yes, c.llm_no, c.llm_failed,
              c.llm_ties);
  std::printf("human confirmed / rejected / pending  %zu / %zu / %zu\n", c.human_confirmed,
              c.human_rejected, c.human_skipped);
}

ReviewCorpus read_normalized(const fs::path& path) {
  ReviewCorpus corpus = ingest_reviews(path, CorpusFormat::jsonl).corpus;
  return normalize_corpus(std::move(corpus));
}

HypothesisSet selected_set(const PipelineConfig& cfg) { return resolve_hypothesis_set(cfg.hypotheses_selected); }

const NliBackendConfig& pick_backend(const PipelineConfig& cfg, const std::optional<std::string>& name) {
  if (!name) return cfg.selected_nli();
  for (const NliBackendConfig& b : cfg.nli_backends) {
    if (b.descriptor.name == *name) return b;
  }
  throw ValidationError("no NLI backend named \"" + *name + "\" in the config");
}

// --- subcommands ------------------------------------------------------------

int cmd_ingest(const CommonOptions& o, bool labeled, const std::optional<std::string>& output) {
  PipelineConfig cfg = o.load();
  const WorkDir wd = work_dir(cfg);
  const auto& src = labeled ? cfg.corpus.labeled : cfg.corpus.unlabeled;
  if (!src) throw ValidationError(std::string("config has no corpus.") + (labeled ? "labeled" : "unlabeled"));
  std::vector<Reject> rejects;
  ReviewCorpus corpus = load_corpus(*src, cfg.corpus, &rejects);
  write_rejects(wd.rejects(), rejects);
  const std::size_t ingested = corpus.size();
  ReviewCorpus kept;
  if (labeled) {
    kept = partition_gold(corpus).labeled;
  } else {
    kept = partition_gold(filter_by_rating(corpus, cfg.corpus.rating_min, cfg.corpus.rating_max)).unlabeled;
  }
  const fs::path out = output ? fs::path(*output) : wd.root / (labeled ? "gold.jsonl" : "corpus.jsonl");
  write_corpus_jsonl(out, kept);
  std::printf("ingested %zu, rejected %zu, kept %zu -> %s\n", ingested, rejects.size(), kept.size(),
              out.c_str());
  return 0;
}

int cmd_nli_score(const CommonOptions& o, const std::optional<std::string>& input,
                  const std::optional<std::string>& backend_name, const std::optional<std::string>& output) {
  PipelineConfig cfg = o.load();
  const WorkDir wd = work_dir(cfg);
  ReviewCorpus corpus = read_normalized(input ? fs::path(*input) : wd.corpus());
  HypothesisSet set = selected_set(cfg);
  auto backend = make_nli_backend(pick_backend(cfg, backend_name));
  ScoreCache cache(wd.score_cache());
  EntailmentMatrix matrix;
  try {
    matrix = score_corpus(*backend, corpus, set, &cache);
  } catch (const ScoringError& e) {
    if (cache.size() > 0) throw CheckpointError(e.what(), "nli");
    throw;
  }
  const fs::path out = output ? fs::path(*output) : wd.matrix();
  write_matrix(out, matrix);
  std::printf("scored %zu reviews x %zu hypotheses (%zu backend calls) -> %s\n", matrix.rows(), matrix.cols(),
              backend->call_count(), out.c_str());
  return 0;
}

int cmd_nli_label(const CommonOptions& o, const std::optional<std::string>& input,
                  const std::optional<std::string>& output) {
  PipelineConfig cfg = o.load();
  const WorkDir wd = work_dir(cfg);
  HypothesisSet set = selected_set(cfg);
  MatrixFileReader reader(input ? fs::path(*input) : wd.matrix());
  if (reader.set_hash() != set.version_hash) {
    throw ValidationError("matrix was scored with a different hypothesis set (" + reader.set_hash().substr(0, 12) +
                          " vs " + set.version_hash.substr(0, 12) + ")");
  }
  PseudoLabeledCorpus pseudo = apply_heuristics(reader, set.heuristics);
  const fs::path out = output ? fs::path(*output) : wd.pseudo_labels();
  write_pseudo_labels(out, pseudo);
  std::printf("maybe_privacy %zu, maybe_not_privacy %zu, undetermined %zu -> %s\n",
              pseudo.count(PseudoLabel::maybe_privacy), pseudo.count(PseudoLabel::maybe_not_privacy),
              pseudo.count(PseudoLabel::undetermined), out.c_str());
  return 0;
}

int cmd_llm_classify(const CommonOptions& o, const std::optional<std::string>& input,
                     const std::optional<std::string>& labels, const std::optional<std::string>& output) {
  PipelineConfig cfg = o.load();
  if (!cfg.llm) throw ValidationError("config has no llm.backend");
  const WorkDir wd = work_dir(cfg);
  ReviewCorpus corpus = read_normalized(input ? fs::path(*input) : wd.corpus());
  PseudoLabeledCorpus pseudo = read_pseudo_labels(labels ? fs::path(*labels) : wd.pseudo_labels());
  ReviewCorpus candidates = select_maybe_privacy(corpus, pseudo);
  const PromptTemplate tmpl = cfg.prompt_template ? PromptTemplate::load(*cfg.prompt_template) : PromptTemplate::builtin();
  auto backend = make_llm_backend(*cfg.llm);
  VoteLog log(wd.vote_log());
  ClassifyOptions opts;
  opts.prompt_template = &tmpl;
  opts.log = &log;
  ClassificationResult result = classify_corpus(*backend, candidates, pseudo, selected_set(cfg), cfg.sampling, opts);
  const fs::path out = output ? fs::path(*output) : wd.votes();
  write_vote_records(out, result.records);
  std::printf("classified %zu: yes %zu, no %zu, failed %zu -> %s\n", candidates.size(),
              result.count(BinaryLabel::yes), result.count(BinaryLabel::no), result.failed.size(), out.c_str());
  for (const FailedReview& f : result.failed) std::fprintf(stderr, "failed %s: %s\n", f.review_id.c_str(), f.reason.c_str());
  return result.failed.empty() ? 0 : kExitCheckpoint;
}

int cmd_evaluate(const CommonOptions& o, const std::string& stage, const std::optional<std::string>& predictions) {
  PipelineConfig cfg = o.load();
  if (!cfg.corpus.labeled) throw ValidationError("config has no corpus.labeled");
  const WorkDir wd = work_dir(cfg);
  ReviewCorpus gold = partition_gold(load_corpus(*cfg.corpus.labeled, cfg.corpus)).labeled;
  std::size_t positives = 0;
  for (const Review& r : gold.reviews) positives += *r.gold_label == GoldLabel::privacy;

  json report;
  if (stage == "rc") {
    report = {{"stage", "rc"}, {"metrics", to_json(random_baseline(positives, gold.size()))}};
  } else {
    ConfusionMatrix cm;
    if (stage == "nli") {
      cm = confusion_from_nli(gold, read_pseudo_labels(predictions ? fs::path(*predictions) : wd.pseudo_labels()));
    } else {
      cm = confusion_from_llm(gold, read_vote_records(predictions ? fs::path(*predictions) : wd.votes()));
    }
    report = {{"stage", stage}, {"confusion", to_json(cm)}, {"metrics", to_json(metrics(cm))}};
  }
  std::cout << report.dump(2) << '\n';
  return 0;
}

int cmd_select(const CommonOptions& o) {
  PipelineConfig cfg = o.load();
  SelectionResult r = run_selection(cfg);
  std::cout << "NLI models on " << r.models.rows.size() << " candidate(s), baseline set:\n"
            << format_table(r.models) << "\nhypothesis sets with " << r.best_model << ":\n"
            << format_table(r.hypothesis_sets) << "\nselected " << r.best_model << " + " << r.best_set
            << "; wrote " << WorkDir{cfg.work_dir}.selection().string() << '\n';
  return 0;
}

int cmd_extract(const CommonOptions& o) {
  PipelineConfig cfg = o.load();
  ExtractionResult r = run_extraction(cfg);
  std::printf("run %s\n", r.manifest.run_id.c_str());
  print_counts(r.manifest.counts);
  std::printf("manifest: %s\n", WorkDir{cfg.work_dir}.manifest().c_str());
  if (r.manifest.counts.llm_failed > 0) {
    std::fprintf(stderr, "%zu review(s) failed LLM classification; rerun to retry them\n",
                 r.manifest.counts.llm_failed);
    return kExitCheckpoint;
  }
  return 0;
}

AnnotationSession open_session(const PipelineConfig& cfg, const WorkDir& wd) {
  if (cfg.annotators.size() < 2) throw ValidationError("annotation.annotators needs at least two names");
  return AnnotationSession(read_queue(wd.queue()), cfg.annotators, wd.annotation_log());
}

int cmd_annotate(const CommonOptions& o, const std::vector<std::string>& annotators) {
  PipelineConfig cfg = o.load();
  const WorkDir wd = work_dir(cfg);
  AnnotationSession session = open_session(cfg, wd);
  const std::string& instructions =
      cfg.annotation_instructions.empty() ? default_annotation_instructions() : cfg.annotation_instructions;
  TerminalLabelSource source(std::cin, std::cout, instructions);
  AnnotationOutcome outcome = run_annotation(session, source, annotators);

  write_file_atomic(wd.annotation_report(), to_json(outcome).dump(2) + "\n");
  if (fs::exists(wd.manifest())) {
    RunManifest m = read_manifest(wd.manifest());
    apply_annotation(m, outcome);
    write_manifest(wd.manifest(), m);
  }
  std::printf("\nfinal labels %zu (privacy %zu), tiebreaks %zu, pending %zu\n", outcome.finals.size(),
              outcome.count(AnnotationLabel::privacy), outcome.tiebreaks, outcome.leftovers.size());
  if (outcome.kappa) std::printf("kappa %.3f over %zu doubly-labeled reviews\n", outcome.kappa->kappa, outcome.kappa_ids.size());
  return 0;
}

int cmd_export(const CommonOptions& o, const std::string& format, const std::optional<std::string>& output,
               bool allow_partial) {
  PipelineConfig cfg = o.load();
  const WorkDir wd = work_dir(cfg);
  AnnotationSession session = open_session(cfg, wd);
  AnnotationOutcome outcome = session.outcome();
  if (!outcome.complete() && !allow_partial) {
    throw ValidationError(std::to_string(outcome.leftovers.size()) +
                          " review(s) still lack a final label; finish `annotate` or pass --allow-partial");
  }
  const ExportFormat fmt = format == "jsonl" ? ExportFormat::jsonl : ExportFormat::csv;
  const fs::path out = output ? fs::path(*output) : wd.root / (fmt == ExportFormat::csv ? "dataset.csv" : "dataset.jsonl");
  auto records = confirmed_records(session);
  export_dataset(out, records, fmt);
  std::printf("exported %zu privacy review(s) -> %s\n", records.size(), out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"revmine: mine privacy-related app reviews with NLI and LLM stages"};
  app.require_subcommand(1);
  CommonOptions common;
  std::optional<std::string> input, output, backend, predictions;
  bool labeled = false, allow_partial = false;
  std::string stage = "nli", format = "csv";
  std::vector<std::string> annotators;

  auto* ingest = app.add_subcommand("ingest", "Validate and normalize a review file");
  add_common(ingest, common);
  ingest->add_flag("--labeled", labeled, "Ingest the labeled (gold) corpus instead of the unlabeled one");
  ingest->add_option("-o,--output", output, "Output JSONL (default <work_dir>/corpus.jsonl or gold.jsonl)");

  auto* nli_score = app.add_subcommand("nli-score", "Score reviews against the selected hypothesis set");
  add_common(nli_score, common);
  nli_score->add_option("-i,--input", input, "Normalized corpus JSONL (default <work_dir>/corpus.jsonl)");
  nli_score->add_option("--backend", backend, "NLI backend name (default nli.selected)");
  nli_score->add_option("-o,--output", output, "Matrix file (default <work_dir>/matrix.bin)");

  auto* nli_label = app.add_subcommand("nli-label", "Apply the set's heuristics to a score matrix");
  add_common(nli_label, common);
  nli_label->add_option("-i,--input", input, "Matrix file (default <work_dir>/matrix.bin)");
  nli_label->add_option("-o,--output", output, "Pseudo labels (default <work_dir>/pseudo_labels.jsonl)");

  std::optional<std::string> labels;
  auto* llm = app.add_subcommand("llm-classify", "Ask the LLM about every maybe_privacy review");
  add_common(llm, common);
  llm->add_option("-i,--input", input, "Normalized corpus JSONL (default <work_dir>/corpus.jsonl)");
  llm->add_option("--labels", labels, "Pseudo labels (default <work_dir>/pseudo_labels.jsonl)");
  llm->add_option("-o,--output", output, "Vote records (default <work_dir>/votes.jsonl)");

  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against the labeled corpus");
  add_common(evaluate, common);
  evaluate->add_option("--stage", stage, "nli, llm or rc (random classifier)")
      ->check(CLI::IsMember({"nli", "llm", "rc"}));
  evaluate->add_option("-p,--predictions", predictions, "Pseudo labels (nli) or vote records (llm)");

  auto* select = app.add_subcommand("select", "Pick the best NLI model and hypothesis set");
  add_common(select, common);

  auto* extract = app.add_subcommand("extract", "Run the full extraction flow on the unlabeled corpus");
  add_common(extract, common);

  auto* annotate = app.add_subcommand("annotate", "Label queued reviews in the terminal");
  add_common(annotate, common);
  annotate->add_option("-a,--annotator", annotators, "Only these annotators (default: whole roster)");

  auto* exp = app.add_subcommand("export", "Write the confirmed privacy reviews");
  add_common(exp, common);
  exp->add_option("--format", format, "csv or jsonl")->check(CLI::IsMember({"csv", "jsonl"}));
  exp->add_option("-o,--output", output, "Output file (default <work_dir>/dataset.<format>)");
  exp->add_flag("--allow-partial", allow_partial, "Export even if some reviews lack a final label");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    if (*ingest) return cmd_ingest(common, labeled, output);
    if (*nli_score) return cmd_nli_score(common, input, backend, output);
    if (*nli_label) return cmd_nli_label(common, input, output);
    if (*llm) return cmd_llm_classify(common, input, labels, output);
    if (*evaluate) return cmd_evaluate(common, stage, predictions);
    if (*select) return cmd_select(common);
    if (*extract) return cmd_extract(common);
    if (*annotate) return cmd_annotate(common, annotators);
    if (*exp) return cmd_export(common, format, output, allow_partial);
  } catch (const CheckpointError& e) {
    std::fprintf(stderr, "checkpoint (%s): %s\n", e.stage().c_str(), e.what());
    return kExitCheckpoint;
  } catch (const BackendError& e) {
    std::fprintf(stderr, "backend error: %s\n", e.what());
    return kExitBackend;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
