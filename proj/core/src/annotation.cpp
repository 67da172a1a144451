#include "revmine/annotation.hpp"

#include <algorithm>
#include <cctype>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "revmine/errors.hpp"
#include "revmine/util.hpp"

namespace revmine {

using nlohmann::json;

std::string_view to_string(AnnotationLabel label) {
  return label == AnnotationLabel::privacy ? "privacy" : "non_privacy";
}

AnnotationLabel parse_annotation_label(std::string_view text) {
  if (text == "privacy" || text == "1" || text == "y" || text == "yes") return AnnotationLabel::privacy;
  if (text == "non_privacy" || text == "non-privacy" || text == "0" || text == "n" || text == "no") {
    return AnnotationLabel::non_privacy;
  }
  throw ValidationError("unknown annotation label \"" + std::string(text) + "\"");
}

json to_json(const QueueItem& item) {
  json triggers = json::array();
  for (const auto& [id, score] : item.trigger_scores) triggers.push_back({{"id", id}, {"score", score}});
  return json{{"review", review_to_json(item.review)},
              {"nli_backend", item.nli_backend},
              {"hypothesis_set", item.hypothesis_set},
              {"triggers", triggers},
              {"votes", to_json(item.votes)}};
}

QueueItem queue_item_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("review")) {
    throw ValidationError("queue item must be an object with a \"review\" field");
  }
  QueueItem item;
  item.review = review_from_json(doc.at("review"));
  item.nli_backend = doc.value("nli_backend", "");
  item.hypothesis_set = doc.value("hypothesis_set", "");
  for (const json& t : doc.value("triggers", json::array())) {
    item.trigger_scores[t.at("id").get<int>()] = t.at("score").get<float>();
  }
  if (doc.contains("votes")) item.votes = vote_record_from_json(doc.at("votes"));
  else item.votes.review_id = item.review.id;
  return item;
}

void write_queue(const std::filesystem::path& path, std::span<const QueueItem> items) {
  std::string out;
  for (const QueueItem& item : items) {
    out += to_json(item).dump();
    out += '\n';
  }
  write_file_atomic(path, out);
}

std::vector<QueueItem> read_queue(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<QueueItem> items;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json doc = json::parse(line, nullptr, false);
    if (doc.is_discarded()) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": not valid JSON");
    }
    items.push_back(queue_item_from_json(doc));
  }
  return items;
}

bool AnnotationTask::first_round_done() const {
  return std::all_of(assigned.begin(), assigned.end(),
                     [&](const std::string& a) { return labels.count(a) > 0; });
}

bool AnnotationTask::needs_tiebreak() const {
  if (!first_round_done()) return false;
  const AnnotationLabel first = labels.at(assigned.front());
  return std::any_of(assigned.begin(), assigned.end(),
                     [&](const std::string& a) { return labels.at(a) != first; });
}

std::optional<AnnotationLabel> AnnotationTask::final_label() const {
  if (!first_round_done()) return std::nullopt;
  if (needs_tiebreak()) return tiebreak_label;
  return labels.at(assigned.front());
}

std::vector<AnnotationTask> assign_tasks(std::span<const std::string> review_ids,
                                         std::span<const std::string> roster) {
  if (roster.size() < 2) throw ValidationError("annotation needs at least two annotators");
  std::set<std::string_view> seen;
  for (const std::string& a : roster) {
    if (a.empty()) throw ValidationError("annotator names must be non-empty");
    if (!seen.insert(a).second) throw ValidationError("duplicate annotator \"" + a + "\"");
  }
  const std::string& lead = roster.front();
  const auto others = roster.subspan(1);
  const std::size_t n = review_ids.size();
  const std::size_t m = others.size();

  std::vector<AnnotationTask> tasks;
  tasks.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i * m / n;
    AnnotationTask t;
    t.review_id = review_ids[i];
    t.assigned = {lead, others[j]};
    t.tiebreaker = m == 1 ? lead : others[(j + 1) % m];
    tasks.push_back(std::move(t));
  }
  return tasks;
}

std::size_t AnnotationOutcome::count(AnnotationLabel label) const {
  return static_cast<std::size_t>(
      std::count_if(finals.begin(), finals.end(), [&](const FinalLabel& f) { return f.label == label; }));
}

json to_json(const AnnotationOutcome& outcome) {
  json finals = json::array();
  for (const FinalLabel& f : outcome.finals) finals.push_back({{"id", f.review_id}, {"label", to_string(f.label)}});
  return json{{"finals", finals},
              {"confirmed", outcome.count(AnnotationLabel::privacy)},
              {"rejected", outcome.count(AnnotationLabel::non_privacy)},
              {"tiebreaks", outcome.tiebreaks},
              {"kappa", outcome.kappa ? to_json(*outcome.kappa, outcome.kappa_ids) : json(nullptr)},
              {"leftovers", outcome.leftovers},
              {"complete", outcome.complete()}};
}

AnnotationSession::AnnotationSession(std::vector<QueueItem> queue, std::vector<std::string> roster,
                                     std::optional<std::filesystem::path> log_path)
    : queue_(std::move(queue)), roster_(std::move(roster)), log_path_(std::move(log_path)) {
  std::vector<std::string> ids;
  ids.reserve(queue_.size());
  for (std::size_t i = 0; i < queue_.size(); ++i) {
    const std::string& id = queue_[i].review.id;
    if (!index_.emplace(id, i).second) throw ValidationError("duplicate review in queue: " + id);
    ids.push_back(id);
  }
  tasks_ = assign_tasks(ids, roster_);

  if (!log_path_) return;
  if (std::filesystem::exists(*log_path_)) {
    std::istringstream in(read_file(*log_path_));
    std::string line;
    while (std::getline(in, line)) {
      json ev = json::parse(line, nullptr, false);
      // A torn last line from an interrupted session carries no decision.
      if (ev.is_discarded() || !ev.is_object()) continue;
      apply(ev.at("annotator").get<std::string>(), ev.at("review").get<std::string>(),
            parse_annotation_label(ev.at("label").get<std::string>()));
    }
  }
  log_.open(*log_path_, std::ios::app);
  if (!log_) throw ValidationError("cannot open annotation log " + log_path_->string());
}

const QueueItem& AnnotationSession::item(std::string_view review_id) const {
  auto it = index_.find(review_id);
  if (it == index_.end()) throw ValidationError("review " + std::string(review_id) + " is not in the queue");
  return queue_[it->second];
}

AnnotationTask& AnnotationSession::task(std::string_view review_id) {
  auto it = index_.find(review_id);
  if (it == index_.end()) throw ValidationError("review " + std::string(review_id) + " is not in the queue");
  return tasks_[it->second];
}

std::vector<std::string> AnnotationSession::pending(std::string_view annotator) const {
  std::vector<std::string> first, tiebreaks;
  for (const AnnotationTask& t : tasks_) {
    const bool assigned = std::find(t.assigned.begin(), t.assigned.end(), annotator) != t.assigned.end();
    if (assigned && !t.labels.count(std::string(annotator))) {
      first.push_back(t.review_id);
    } else if (t.tiebreaker == annotator && t.needs_tiebreak() && !t.tiebreak_label) {
      tiebreaks.push_back(t.review_id);
    }
  }
  first.insert(first.end(), tiebreaks.begin(), tiebreaks.end());
  return first;
}

bool AnnotationSession::is_tiebreak(std::string_view annotator, std::string_view review_id) const {
  auto it = index_.find(review_id);
  if (it == index_.end()) return false;
  const AnnotationTask& t = tasks_[it->second];
  return t.tiebreaker == annotator && t.needs_tiebreak() && !t.tiebreak_label;
}

void AnnotationSession::apply(std::string_view annotator, std::string_view review_id,
                              AnnotationLabel label) {
  AnnotationTask& t = task(review_id);
  const std::string who(annotator);
  const bool assigned = std::find(t.assigned.begin(), t.assigned.end(), who) != t.assigned.end();
  if (assigned && !t.labels.count(who)) {
    t.labels[who] = label;
  } else if (t.tiebreaker == who && t.needs_tiebreak() && !t.tiebreak_label) {
    t.tiebreak_label = label;
  } else {
    throw ValidationError("annotator " + who + " is not due to label review " + t.review_id);
  }
}

void AnnotationSession::record(std::string_view annotator, std::string_view review_id,
                               AnnotationLabel label) {
  apply(annotator, review_id, label);
  if (log_.is_open()) {
    log_ << json{{"annotator", annotator}, {"review", review_id}, {"label", to_string(label)}}.dump()
         << '\n';
    log_.flush();
  }
}

AnnotationOutcome AnnotationSession::outcome() const {
  AnnotationOutcome out;
  std::vector<int> lead, second;
  for (const AnnotationTask& t : tasks_) {
    if (auto label = t.final_label()) out.finals.push_back({t.review_id, *label});
    else out.leftovers.push_back(t.review_id);
    if (t.needs_tiebreak()) ++out.tiebreaks;
    if (t.first_round_done()) {
      lead.push_back(static_cast<int>(t.labels.at(t.assigned[0])));
      second.push_back(static_cast<int>(t.labels.at(t.assigned[1])));
      out.kappa_ids.push_back(t.review_id);
    }
  }
  if (!lead.empty()) out.kappa = cohen_kappa(lead, second);
  return out;
}

TerminalLabelSource::TerminalLabelSource(std::istream& in, std::ostream& out, std::string instructions)
    : in_(in), out_(out), instructions_(std::move(instructions)) {}

AnnotatorChoice TerminalLabelSource::ask(std::string_view annotator, const QueueItem& item,
                                         bool tiebreak) {
  if (!shown_instructions_) {
    out_ << instructions_ << "\n\n";
    shown_instructions_ = true;
  }
  const Review& r = item.review;
  out_ << "---- [" << annotator << "] review " << r.id << (tiebreak ? "  (tiebreak)" : "") << '\n'
       << r.app_name << " | " << to_string(r.store) << " | " << r.rating << " star(s)\n\n"
       << r.text_raw << "\n\n";
  if (!item.trigger_scores.empty()) {
    out_ << "hypotheses fired:";
    for (const auto& [id, score] : item.trigger_scores) out_ << ' ' << id << '(' << score << ')';
    out_ << '\n';
  }
  for (;;) {
    out_ << "privacy-related? [y]es / [n]o / [s]kip / [q]uit: " << std::flush;
    std::string line;
    if (!std::getline(in_, line)) return AnnotatorChoice::quit;
    const auto pos = line.find_first_not_of(" \t\r");
    const char c = pos == std::string::npos ? '\0' : static_cast<char>(std::tolower(line[pos]));
    switch (c) {
      case 'y': return AnnotatorChoice::privacy;
      case 'n': return AnnotatorChoice::non_privacy;
      case 's': return AnnotatorChoice::skip;
      case 'q': return AnnotatorChoice::quit;
      default: break;
    }
  }
}

ScriptedLabelSource::ScriptedLabelSource(AnnotatorChoice fallback) : fallback_(fallback) {}

void ScriptedLabelSource::set(std::string annotator, std::string review_id, AnnotatorChoice choice) {
  table_[{std::move(annotator), std::move(review_id)}] = choice;
}

AnnotatorChoice ScriptedLabelSource::ask(std::string_view annotator, const QueueItem& item, bool) {
  auto it = table_.find({std::string(annotator), item.review.id});
  return it == table_.end() ? fallback_ : it->second;
}

AnnotationOutcome run_annotation(AnnotationSession& session, LabelSource& source,
                                 std::span<const std::string> annotators) {
  if (session.roster().size() < 2) throw ValidationError("annotation needs at least two annotators");
  if (session.tasks().empty()) throw ValidationError("annotation queue is empty");
  std::vector<std::string> who(annotators.begin(), annotators.end());
  if (who.empty()) who = session.roster();
  for (const std::string& a : who) {
    if (std::find(session.roster().begin(), session.roster().end(), a) == session.roster().end()) {
      throw ValidationError("annotator \"" + a + "\" is not on the roster");
    }
  }

  // Skips hold for the rest of this call; a later session asks again.
  std::set<std::pair<std::string, std::string>> skipped;
  for (bool progress = true; progress;) {
    progress = false;
    for (const std::string& a : who) {
      for (const std::string& id : session.pending(a)) {
        if (skipped.count({a, id})) continue;
        const AnnotatorChoice choice = source.ask(a, session.item(id), session.is_tiebreak(a, id));
        switch (choice) {
          case AnnotatorChoice::quit: return session.outcome();
          case AnnotatorChoice::skip: skipped.insert({a, id}); break;
          case AnnotatorChoice::privacy:
            session.record(a, id, AnnotationLabel::privacy);
            progress = true;
            break;
          case AnnotatorChoice::non_privacy:
            session.record(a, id, AnnotationLabel::non_privacy);
            progress = true;
            break;
        }
      }
    }
  }
  return session.outcome();
}

const std::string& default_annotation_instructions() {
  static const std::string text =
      "Label each review as privacy-related (y) or not (n).\n"
      "A review is privacy-related when it raises a concern about personal data or\n"
      "personal space: collection, sharing, selling, leaking or misuse of data;\n"
      "tracking or surveillance; unwanted exposure; intrusive permissions or\n"
      "requests; weak data protection; or loss of control over one's information.\n"
      "Complaints about price, bugs, login trouble or content quality alone are not\n"
      "privacy-related. Use s to skip a review for now and q to stop; progress is saved.";
  return text;
}

json provenance(const ExportRecord& record) {
  const QueueItem& item = record.item;
  json triggered = json::array();
  for (const auto& [id, score] : item.trigger_scores) triggered.push_back({{"id", id}, {"score", score}});
  json trail = json::array();
  if (record.task) {
    for (const std::string& a : record.task->assigned) {
      auto it = record.task->labels.find(a);
      if (it != record.task->labels.end()) {
        trail.push_back({{"annotator", a}, {"label", to_string(it->second)}, {"round", "first"}});
      }
    }
    if (record.task->tiebreak_label) {
      trail.push_back({{"annotator", record.task->tiebreaker},
                       {"label", to_string(*record.task->tiebreak_label)},
                       {"round", "tiebreak"}});
    }
  }
  const VoteRecord& v = item.votes;
  return json{{"nli", {{"backend", item.nli_backend}, {"hypothesis_set", item.hypothesis_set},
                       {"triggered", triggered}}},
              {"llm", {{"yes", v.count(Vote::yes)}, {"no", v.count(Vote::no)},
                       {"abstain", v.count(Vote::abstain)}, {"decision", to_string(v.decision)},
                       {"tie", v.tie_flag}}},
              {"annotators", trail}};
}

void export_dataset(const std::filesystem::path& path, std::span<const ExportRecord> records,
                    ExportFormat format) {
  std::string out;
  if (format == ExportFormat::csv) out = "id,app,store,rating,text,label,date,provenance\n";
  for (const ExportRecord& rec : records) {
    const Review& r = rec.item.review;
    const int label = rec.final_label == AnnotationLabel::privacy ? 1 : 0;
    const std::string date = r.submitted_at ? format_date(*r.submitted_at) : "";
    const std::string prov = provenance(rec).dump();
    if (format == ExportFormat::csv) {
      out += csv_escape(r.id) + ',' + csv_escape(r.app_name) + ',' + csv_escape(to_string(r.store)) +
             ',' + std::to_string(r.rating) + ',' + csv_escape(r.text_raw) + ',' +
             std::to_string(label) + ',' + csv_escape(date) + ',' + csv_escape(prov) + '\n';
    } else {
      json obj{{"id", r.id},       {"app", r.app_name}, {"store", to_string(r.store)},
               {"rating", r.rating}, {"text", r.text_raw}, {"label", label},
               {"date", date.empty() ? json(nullptr) : json(date)},
               {"provenance", provenance(rec)}};
      out += obj.dump();
      out += '\n';
    }
  }
  write_file_atomic(path, out);
}

std::vector<ExportRecord> confirmed_records(const AnnotationSession& session) {
  std::vector<ExportRecord> out;
  for (const AnnotationTask& t : session.tasks()) {
    auto label = t.final_label();
    if (label != AnnotationLabel::privacy) continue;
    out.push_back({session.item(t.review_id), *label, &t});
  }
  return out;
}

}  // namespace revmine
