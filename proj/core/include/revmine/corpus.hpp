#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace revmine {

enum class Store { google_play, apple_app_store, other };

std::string_view to_string(Store store);
// Accepts the canonical names plus a few common spellings ("play", "ios", ...);
// anything else maps to Store::other.
Store parse_store(std::string_view text);

// Human gold label: 1 = privacy-related, 0 = not.
enum class GoldLabel : int { non_privacy = 0, privacy = 1 };

struct Review {
  std::string id;
  std::string app_name;
  Store store = Store::other;
  int rating = 1;
  std::string text_raw;
  // Derived from text_raw by normalize_text(); gold labels stay attached to
  // the raw record.
  std::optional<std::string> text_norm;
  std::optional<std::chrono::year_month_day> submitted_at;
  std::optional<GoldLabel> gold_label;

  // Normalized text when present, otherwise the raw text.
  const std::string& premise() const { return text_norm ? *text_norm : text_raw; }
};

struct Provenance {
  std::string source;
  std::string ingested_at;
  std::size_t review_count = 0;
  std::size_t rejected_count = 0;
};

struct ReviewCorpus {
  std::vector<Review> reviews;
  Provenance provenance;

  std::size_t size() const { return reviews.size(); }
  bool empty() const { return reviews.empty(); }

  // Builds a corpus whose provenance count matches `reviews`.
  static ReviewCorpus derived(const ReviewCorpus& parent, std::vector<Review> reviews);
};

enum class CorpusFormat { csv, jsonl };

CorpusFormat parse_corpus_format(std::string_view text);
// Picks the format from the file extension (.csv / .jsonl / .json).
CorpusFormat format_from_path(const std::filesystem::path& path);

struct Reject {
  std::size_t line_no = 0;
  std::string reason;
};

struct IngestResult {
  ReviewCorpus corpus;
  std::vector<Reject> rejects;
};

// Reads a review file. Records that violate the schema are collected into
// `rejects` rather than dropped. Throws ValidationError when the file cannot
// be read or lacks required columns, and SchemaMismatchError when more than
// half of the records are rejected.
IngestResult ingest_reviews(const std::filesystem::path& source, CorpusFormat format);

// Parses already-loaded CSV/JSONL text. `source_name` only lands in provenance.
IngestResult ingest_reviews_from_string(std::string_view contents, CorpusFormat format,
                                        std::string source_name = "<memory>");

// JSONL of {line_no, reason}.
void write_rejects(const std::filesystem::path& path, const std::vector<Reject>& rejects);

// Lowercases ASCII letters, replaces every other byte that is not an ASCII
// letter or digit with a space, collapses space runs and trims. Multi-byte
// UTF-8 sequences (emoji, accented letters) therefore become separators.
std::string normalize_text(std::string_view text_raw);

// True when `text` is a fixed point of normalize_text().
bool is_normalized(std::string_view text);

// Fills text_norm for every review.
ReviewCorpus normalize_corpus(ReviewCorpus corpus);

// Keeps reviews with min <= rating <= max, preserving order.
// Throws ValidationError unless 1 <= min <= max <= 5.
ReviewCorpus filter_by_rating(const ReviewCorpus& corpus, int min, int max);

struct GoldPartition {
  ReviewCorpus labeled;
  ReviewCorpus unlabeled;
};

GoldPartition partition_gold(const ReviewCorpus& corpus);

// One review in the ingestion schema (id, app, store, rating, text, label,
// date) plus "text_norm" when present.
nlohmann::json review_to_json(const Review& review);
// Inverse of review_to_json; throws ValidationError on an invalid record.
Review review_from_json(const nlohmann::json& doc);

// Writes the corpus as JSONL in the ingestion schema (id, app, store, rating,
// text, label, date) plus "text_norm" when present.
void write_corpus_jsonl(const std::filesystem::path& path, const ReviewCorpus& corpus);

std::string format_date(const std::chrono::year_month_day& date);
// ISO-8601 calendar date, optionally followed by a time part ("2021-10-06",
// "2021-10-06T12:00:00Z"). Returns nullopt for anything else.
std::optional<std::chrono::year_month_day> parse_iso_date(std::string_view text);

// RFC 4180 CSV reader: quoted fields may contain commas, doubled quotes and
// newlines. Each row carries the 1-based physical line it started on.
struct CsvRow {
  std::size_t line_no = 0;
  std::vector<std::string> fields;
};
std::vector<CsvRow> parse_csv(std::string_view contents);
std::string csv_escape(std::string_view field);

}  // namespace revmine
