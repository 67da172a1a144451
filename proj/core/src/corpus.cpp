#include "revmine/corpus.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <sstream>
#include <unordered_map>
#include <unordered_set>
#include <variant>

#include "revmine/errors.hpp"
#include "revmine/util.hpp"

namespace revmine {

using nlohmann::json;

namespace {

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// One record after format-specific decoding; absent keys are nullopt.
struct RawRecord {
  std::size_t line_no = 0;
  std::optional<std::string> id, app, store, rating, text, label, date;
};

std::optional<int> parse_int(std::string_view s) {
  s = trim(s);
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return value;
}

bool missing(const std::optional<std::string>& field) {
  return !field || trim(*field).empty();
}

// Validates one record. Returns the reason on failure.
std::variant<Review, std::string> to_review(const RawRecord& rec) {
  if (missing(rec.id)) return std::string("missing required field: id");
  if (missing(rec.app)) return std::string("missing required field: app");
  if (missing(rec.store)) return std::string("missing required field: store");
  if (missing(rec.rating)) return std::string("missing required field: rating");
  if (missing(rec.text)) return std::string("missing required field: text");

  Review r;
  r.id = std::string(trim(*rec.id));
  r.app_name = std::string(trim(*rec.app));
  r.store = parse_store(*rec.store);
  auto rating = parse_int(*rec.rating);
  if (!rating) return "rating is not an integer: \"" + *rec.rating + "\"";
  if (*rating < 1 || *rating > 5) return "rating out of range [1,5]: " + std::to_string(*rating);
  r.rating = *rating;
  r.text_raw = *rec.text;
  if (!missing(rec.label)) {
    auto label = parse_int(*rec.label);
    if (!label || (*label != 0 && *label != 1)) return "label must be 0 or 1: \"" + *rec.label + "\"";
    r.gold_label = static_cast<GoldLabel>(*label);
  }
  if (!missing(rec.date)) r.submitted_at = parse_iso_date(trim(*rec.date));
  return r;
}

std::optional<std::string> json_field(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  if (it->is_boolean()) return std::string(it->get<bool>() ? "1" : "0");
  // Floats and containers are kept as JSON text so validation can report them.
  return it->dump();
}

RawRecord raw_from_json(const json& obj, std::size_t line_no) {
  RawRecord rec;
  rec.line_no = line_no;
  rec.id = json_field(obj, "id");
  rec.app = json_field(obj, "app");
  rec.store = json_field(obj, "store");
  rec.rating = json_field(obj, "rating");
  rec.text = json_field(obj, "text");
  rec.label = json_field(obj, "label");
  rec.date = json_field(obj, "date");
  return rec;
}

std::vector<RawRecord> decode_jsonl(std::string_view contents, std::vector<Reject>& rejects,
                                    std::size_t& total) {
  std::vector<RawRecord> records;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= contents.size()) {
    std::size_t end = contents.find('\n', pos);
    if (end == std::string_view::npos) end = contents.size();
    std::string_view line = contents.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (trim(line).empty()) {
      if (end == contents.size()) break;
      continue;
    }
    ++total;
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
      rejects.push_back({line_no, "line is not a JSON object"});
    } else {
      records.push_back(raw_from_json(obj, line_no));
    }
    if (end == contents.size()) break;
  }
  return records;
}

std::vector<RawRecord> decode_csv(std::string_view contents, std::vector<Reject>& rejects,
                                  std::size_t& total) {
  auto rows = parse_csv(contents);
  if (rows.empty()) throw ValidationError("CSV input has no header row");

  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < rows.front().fields.size(); ++i) {
    column.emplace(lower_ascii(trim(rows.front().fields[i])), i);
  }
  for (const char* required : {"id", "app", "store", "rating", "text"}) {
    if (!column.contains(required)) {
      throw ValidationError(std::string("CSV header lacks required column: ") + required);
    }
  }
  const std::size_t width = rows.front().fields.size();
  auto cell = [&](const CsvRow& row, const char* name) -> std::optional<std::string> {
    auto it = column.find(name);
    if (it == column.end()) return std::nullopt;
    return row.fields[it->second];
  };

  std::vector<RawRecord> records;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const CsvRow& row = rows[r];
    if (row.fields.size() == 1 && trim(row.fields[0]).empty()) continue;
    ++total;
    if (row.fields.size() != width) {
      rejects.push_back({row.line_no, "expected " + std::to_string(width) + " fields, got " +
                                          std::to_string(row.fields.size())});
      continue;
    }
    RawRecord rec;
    rec.line_no = row.line_no;
    rec.id = cell(row, "id");
    rec.app = cell(row, "app");
    rec.store = cell(row, "store");
    rec.rating = cell(row, "rating");
    rec.text = cell(row, "text");
    rec.label = cell(row, "label");
    rec.date = cell(row, "date");
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace

std::string_view to_string(Store store) {
  switch (store) {
    case Store::google_play: return "google_play";
    case Store::apple_app_store: return "apple_app_store";
    case Store::other: return "other";
  }
  return "other";
}

Store parse_store(std::string_view text) {
  const std::string s = lower_ascii(trim(text));
  if (s == "google_play" || s == "google play" || s == "play" || s == "google" || s == "android") {
    return Store::google_play;
  }
  if (s == "apple_app_store" || s == "app store" || s == "app_store" || s == "apple" ||
      s == "ios" || s == "appstore") {
    return Store::apple_app_store;
  }
  return Store::other;
}

ReviewCorpus ReviewCorpus::derived(const ReviewCorpus& parent, std::vector<Review> reviews) {
  ReviewCorpus out;
  out.provenance = parent.provenance;
  out.provenance.review_count = reviews.size();
  out.reviews = std::move(reviews);
  return out;
}

CorpusFormat parse_corpus_format(std::string_view text) {
  const std::string s = lower_ascii(trim(text));
  if (s == "csv") return CorpusFormat::csv;
  if (s == "jsonl" || s == "ndjson") return CorpusFormat::jsonl;
  throw ValidationError("unknown corpus format: \"" + std::string(text) + "\"");
}

CorpusFormat format_from_path(const std::filesystem::path& path) {
  const std::string ext = lower_ascii(path.extension().string());
  if (ext == ".csv") return CorpusFormat::csv;
  if (ext == ".jsonl" || ext == ".json" || ext == ".ndjson") return CorpusFormat::jsonl;
  throw ValidationError("cannot infer corpus format from extension of " + path.string());
}

IngestResult ingest_reviews_from_string(std::string_view contents, CorpusFormat format,
                                        std::string source_name) {
  if (contents.starts_with("\xEF\xBB\xBF")) contents.remove_prefix(3);

  IngestResult result;
  std::size_t total = 0;
  auto records = format == CorpusFormat::csv ? decode_csv(contents, result.rejects, total)
                                             : decode_jsonl(contents, result.rejects, total);

  std::unordered_set<std::string> seen;
  for (const RawRecord& rec : records) {
    auto outcome = to_review(rec);
    if (auto* reason = std::get_if<std::string>(&outcome)) {
      result.rejects.push_back({rec.line_no, std::move(*reason)});
      continue;
    }
    Review review = std::get<Review>(std::move(outcome));
    if (!seen.insert(review.id).second) {
      result.rejects.push_back({rec.line_no, "duplicate id: " + review.id});
      continue;
    }
    result.corpus.reviews.push_back(std::move(review));
  }
  std::sort(result.rejects.begin(), result.rejects.end(),
            [](const Reject& a, const Reject& b) { return a.line_no < b.line_no; });

  if (result.rejects.size() * 2 > total) {
    throw SchemaMismatchError("schema mismatch: rejected " + std::to_string(result.rejects.size()) +
                                  " of " + std::to_string(total) + " records in " + source_name,
                              result.rejects.size(), total);
  }

  result.corpus.provenance.source = std::move(source_name);
  result.corpus.provenance.ingested_at = utc_timestamp_now();
  result.corpus.provenance.review_count = result.corpus.reviews.size();
  result.corpus.provenance.rejected_count = result.rejects.size();
  return result;
}

IngestResult ingest_reviews(const std::filesystem::path& source, CorpusFormat format) {
  if (!std::filesystem::is_regular_file(source)) {
    throw ValidationError("cannot read review file: " + source.string());
  }
  return ingest_reviews_from_string(read_file(source), format, source.string());
}

void write_rejects(const std::filesystem::path& path, const std::vector<Reject>& rejects) {
  std::string out;
  for (const Reject& r : rejects) {
    out += json{{"line_no", r.line_no}, {"reason", r.reason}}.dump();
    out += '\n';
  }
  write_file_atomic(path, out);
}

std::string normalize_text(std::string_view text_raw) {
  std::string out;
  out.reserve(text_raw.size());
  bool pending_space = false;
  for (unsigned char c : text_raw) {
    if (c < 0x80 && std::isalnum(c)) {
      if (pending_space && !out.empty()) out.push_back(' ');
      pending_space = false;
      out.push_back(static_cast<char>(std::tolower(c)));
    } else {
      pending_space = true;
    }
  }
  return out;
}

bool is_normalized(std::string_view text) {
  if (text.empty()) return true;
  if (text.front() == ' ' || text.back() == ' ') return false;
  char prev = 'a';
  for (unsigned char c : text) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || (c == ' ' && prev != ' ');
    if (!ok) return false;
    prev = static_cast<char>(c);
  }
  return true;
}

ReviewCorpus normalize_corpus(ReviewCorpus corpus) {
  for (Review& r : corpus.reviews) r.text_norm = normalize_text(r.text_raw);
  return corpus;
}

ReviewCorpus filter_by_rating(const ReviewCorpus& corpus, int min, int max) {
  if (min < 1 || max > 5 || min > max) {
    throw ValidationError("invalid rating bounds [" + std::to_string(min) + "," +
                          std::to_string(max) + "]; need 1 <= min <= max <= 5");
  }
  std::vector<Review> kept;
  std::copy_if(corpus.reviews.begin(), corpus.reviews.end(), std::back_inserter(kept),
               [&](const Review& r) { return r.rating >= min && r.rating <= max; });
  return ReviewCorpus::derived(corpus, std::move(kept));
}

GoldPartition partition_gold(const ReviewCorpus& corpus) {
  std::vector<Review> labeled, unlabeled;
  for (const Review& r : corpus.reviews) {
    (r.gold_label ? labeled : unlabeled).push_back(r);
  }
  return {ReviewCorpus::derived(corpus, std::move(labeled)),
          ReviewCorpus::derived(corpus, std::move(unlabeled))};
}

nlohmann::json review_to_json(const Review& r) {
  json obj{{"id", r.id},
           {"app", r.app_name},
           {"store", to_string(r.store)},
           {"rating", r.rating},
           {"text", r.text_raw}};
  obj["label"] = r.gold_label ? json(static_cast<int>(*r.gold_label)) : json(nullptr);
  obj["date"] = r.submitted_at ? json(format_date(*r.submitted_at)) : json(nullptr);
  if (r.text_norm) obj["text_norm"] = *r.text_norm;
  return obj;
}

Review review_from_json(const nlohmann::json& obj) {
  if (!obj.is_object()) throw ValidationError("review record must be a JSON object");
  auto parsed = to_review(raw_from_json(obj, 0));
  if (auto* reason = std::get_if<std::string>(&parsed)) throw ValidationError("review record: " + *reason);
  Review r = std::get<Review>(std::move(parsed));
  if (auto it = obj.find("text_norm"); it != obj.end() && it->is_string()) {
    r.text_norm = it->get<std::string>();
  }
  return r;
}

void write_corpus_jsonl(const std::filesystem::path& path, const ReviewCorpus& corpus) {
  std::string out;
  for (const Review& r : corpus.reviews) {
    out += review_to_json(r).dump();
    out += '\n';
  }
  write_file_atomic(path, out);
}

std::string format_date(const std::chrono::year_month_day& date) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
  return buf;
}

std::optional<std::chrono::year_month_day> parse_iso_date(std::string_view text) {
  if (text.size() < 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  if (text.size() > 10 && text[10] != 'T' && text[10] != ' ') return std::nullopt;
  auto y = parse_int(text.substr(0, 4));
  auto m = parse_int(text.substr(5, 2));
  auto d = parse_int(text.substr(8, 2));
  if (!y || !m || !d || *m < 1 || *d < 1) return std::nullopt;
  std::chrono::year_month_day ymd{std::chrono::year{*y},
                                  std::chrono::month{static_cast<unsigned>(*m)},
                                  std::chrono::day{static_cast<unsigned>(*d)}};
  if (!ymd.ok()) return std::nullopt;
  return ymd;
}

std::vector<CsvRow> parse_csv(std::string_view contents) {
  std::vector<CsvRow> rows;
  CsvRow row;
  std::string field;
  std::size_t line = 1;
  row.line_no = 1;
  bool in_quotes = false;
  bool row_has_content = false;

  auto end_row = [&] {
    row.fields.push_back(std::move(field));
    field.clear();
    rows.push_back(std::move(row));
    row = CsvRow{};
    row_has_content = false;
  };

  for (std::size_t i = 0; i < contents.size(); ++i) {
    const char c = contents[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < contents.size() && contents[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        row_has_content = true;
        break;
      case ',':
        row.fields.push_back(std::move(field));
        field.clear();
        row_has_content = true;
        break;
      case '\r':
        break;
      case '\n':
        end_row();
        ++line;
        row.line_no = line;
        break;
      default:
        field.push_back(c);
        row_has_content = true;
    }
  }
  if (row_has_content || !field.empty()) end_row();
  return rows;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace revmine
