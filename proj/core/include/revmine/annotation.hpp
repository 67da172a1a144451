#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "revmine/corpus.hpp"
#include "revmine/evaluation.hpp"
#include "revmine/llm.hpp"

namespace revmine {

enum class AnnotationLabel { non_privacy, privacy };

std::string_view to_string(AnnotationLabel label);
AnnotationLabel parse_annotation_label(std::string_view text);

// One review waiting for human inspection, with the evidence that put it
// there: hypotheses that fired in the NLI stage and the LLM vote record.
struct QueueItem {
  Review review;
  std::string nli_backend;
  std::string hypothesis_set;
  std::map<int, float> trigger_scores;  // hypothesis id -> entailment
  VoteRecord votes;
};

nlohmann::json to_json(const QueueItem& item);
QueueItem queue_item_from_json(const nlohmann::json& doc);
void write_queue(const std::filesystem::path& path, std::span<const QueueItem> items);
std::vector<QueueItem> read_queue(const std::filesystem::path& path);

struct AnnotationTask {
  std::string review_id;
  std::vector<std::string> assigned;  // lead first, then one other annotator
  std::map<std::string, AnnotationLabel> labels;
  std::string tiebreaker;
  std::optional<AnnotationLabel> tiebreak_label;

  bool first_round_done() const;
  bool needs_tiebreak() const;
  // Agreed label, or the tiebreak label after a disagreement.
  std::optional<AnnotationLabel> final_label() const;
};

// Lead annotator (roster[0]) gets every review; the others split the queue
// into contiguous, near-equal parts, so every review is seen twice. A
// disagreement goes to the next non-lead annotator after the one assigned,
// or back to the lead when the roster has only two people.
std::vector<AnnotationTask> assign_tasks(std::span<const std::string> review_ids,
                                         std::span<const std::string> roster);

struct FinalLabel {
  std::string review_id;
  AnnotationLabel label;
};

struct AnnotationOutcome {
  std::vector<FinalLabel> finals;      // queue order
  std::optional<KappaReport> kappa;    // over reviews with both first-round labels
  std::vector<std::string> kappa_ids;  // review ids in kappa's index order
  std::size_t tiebreaks = 0;
  std::vector<std::string> leftovers;  // reviews without a final label yet

  bool complete() const { return leftovers.empty(); }
  std::size_t count(AnnotationLabel label) const;
};

nlohmann::json to_json(const AnnotationOutcome& outcome);

// Label bookkeeping for one queue. With a log path, every recorded label is
// appended to a JSONL event log and replayed on construction, so a session
// can stop and resume at any point.
class AnnotationSession {
 public:
  AnnotationSession(std::vector<QueueItem> queue, std::vector<std::string> roster,
                    std::optional<std::filesystem::path> log_path = std::nullopt);

  const std::vector<std::string>& roster() const { return roster_; }
  const std::vector<AnnotationTask>& tasks() const { return tasks_; }
  const QueueItem& item(std::string_view review_id) const;

  // Review ids this annotator still has to label: first-round assignments,
  // then tiebreaks that have become ready.
  std::vector<std::string> pending(std::string_view annotator) const;
  bool is_tiebreak(std::string_view annotator, std::string_view review_id) const;

  // Throws ValidationError when the annotator is not due to label the review.
  void record(std::string_view annotator, std::string_view review_id, AnnotationLabel label);

  AnnotationOutcome outcome() const;

 private:
  void apply(std::string_view annotator, std::string_view review_id, AnnotationLabel label);
  AnnotationTask& task(std::string_view review_id);

  std::vector<QueueItem> queue_;
  std::vector<std::string> roster_;
  std::vector<AnnotationTask> tasks_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::optional<std::filesystem::path> log_path_;
  std::ofstream log_;
};

enum class AnnotatorChoice { privacy, non_privacy, skip, quit };

class LabelSource {
 public:
  virtual ~LabelSource() = default;
  virtual AnnotatorChoice ask(std::string_view annotator, const QueueItem& item, bool tiebreak) = 0;
};

// Keyboard flow: shows the instructions once, then each review, and reads
// y / n / s (skip) / q (quit).
class TerminalLabelSource final : public LabelSource {
 public:
  TerminalLabelSource(std::istream& in, std::ostream& out, std::string instructions);
  AnnotatorChoice ask(std::string_view annotator, const QueueItem& item, bool tiebreak) override;

 private:
  std::istream& in_;
  std::ostream& out_;
  std::string instructions_;
  bool shown_instructions_ = false;
};

// Answers from a table keyed by (annotator, review id); unknown pairs get
// `fallback`.
class ScriptedLabelSource final : public LabelSource {
 public:
  explicit ScriptedLabelSource(AnnotatorChoice fallback = AnnotatorChoice::privacy);
  void set(std::string annotator, std::string review_id, AnnotatorChoice choice);
  AnnotatorChoice ask(std::string_view annotator, const QueueItem& item, bool tiebreak) override;

 private:
  AnnotatorChoice fallback_;
  std::map<std::pair<std::string, std::string>, AnnotatorChoice> table_;
};

// Drives the listed annotators (all of the roster when empty) through their
// pending reviews until nothing changes or someone quits, then returns the
// outcome. Throws ValidationError for a roster under two people or an empty
// queue.
AnnotationOutcome run_annotation(AnnotationSession& session, LabelSource& source,
                                 std::span<const std::string> annotators = {});

const std::string& default_annotation_instructions();

enum class ExportFormat { csv, jsonl };

struct ExportRecord {
  QueueItem item;
  AnnotationLabel final_label = AnnotationLabel::privacy;
  const AnnotationTask* task = nullptr;  // annotator trail, optional
};

// Provenance column: triggering hypotheses with scores, vote tally and the
// annotator trail.
nlohmann::json provenance(const ExportRecord& record);

// Columns id, app, store, rating, text, label, date, provenance; an empty
// input produces a header-only CSV (or an empty JSONL file). The output is
// readable by ingest_reviews.
void export_dataset(const std::filesystem::path& path, std::span<const ExportRecord> records,
                    ExportFormat format);

// Final privacy-labeled reviews of a session, in queue order.
std::vector<ExportRecord> confirmed_records(const AnnotationSession& session);

}  // namespace revmine
