#pragma once

// Synthetic corpora with mock backends whose expected outcomes are known by
// construction. Each generator returns a ledger: the counts the pipeline has
// to reproduce.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "revmine/evaluation.hpp"

namespace revmine::fixtures {

struct ExtractionPlan {
  std::size_t total = 500;
  std::size_t maybe_privacy = 60;
  std::size_t llm_yes = 25;
  std::size_t llm_ties = 5;
  std::size_t llm_failed = 5;
  std::size_t near_miss = 40;   // fire some hypotheses, but no rule
  std::size_t empty_text = 3;   // nothing left after normalization
  std::size_t disagreements = 7;  // yes reviews the second annotator labels differently
  std::uint64_t seed = 7;
};

struct ExtractionLedger {
  std::size_t ingested = 0;
  std::size_t rating_filtered = 0;
  std::size_t nli_scored = 0;
  std::size_t maybe_privacy = 0;
  std::size_t maybe_not_privacy = 0;
  std::size_t undetermined = 0;
  std::size_t llm_yes = 0;
  std::size_t llm_no = 0;
  std::size_t llm_ties = 0;
  std::size_t llm_failed = 0;
  std::vector<std::string> yes_ids;                  // corpus order
  std::map<std::string, std::vector<int>> triggers;  // maybe_privacy id -> hypotheses fired
  std::map<std::string, std::size_t> yes_votes;      // yes id -> number of yes samples
  std::vector<std::string> roster;
  std::vector<std::string> disagree_ids;  // subset of yes_ids
  std::size_t tiebreaks = 0;
};

// Writes reviews.csv, mock_nli.json, mock_llm.json and config.json into `dir`.
ExtractionLedger write_extraction_fixture(const std::filesystem::path& dir, const ExtractionPlan& plan = {});

struct GoldPlan {
  // Privacy reviews: caught by both models, by model-a only, by model-a on
  // the generic set only, by neither.
  std::size_t pos_both = 170, pos_a = 120, pos_a_generic = 20, pos_none = 104;
  // Non-privacy reviews: false positives of model-a, model-b, model-a on the
  // generic set only, and clean ones.
  std::size_t neg_a = 80, neg_b = 120, neg_a_generic = 160, neg_none = 602;
  std::uint64_t seed = 11;

  std::size_t positives() const { return pos_both + pos_a + pos_a_generic + pos_none; }
  std::size_t negatives() const { return neg_a + neg_b + neg_a_generic + neg_none; }
};

struct GoldLedger {
  std::map<std::string, ConfusionMatrix> confusion;  // "<model>/<set>"
  std::string best_model;
  std::string best_set;
};

// Writes labeled.csv, mock_a.json, mock_b.json and config.json (two mock
// models, generic then domain hypotheses).
GoldLedger write_gold_fixture(const std::filesystem::path& dir, const GoldPlan& plan = {});

struct AppCounts {
  std::string app;
  std::size_t total = 0;
  std::size_t low_rated = 0;  // 1 or 2 stars
};

struct TableOneLedger {
  std::vector<AppCounts> apps;
  std::size_t total = 0;
  std::size_t low_rated = 0;
};

// Per-app review counts of the mental-health app corpus divided by `divisor`,
// apportioned so the totals are floor(204,374 / divisor) and
// floor(43,647 / divisor). Writes reviews.csv.
TableOneLedger write_table_one_fixture(const std::filesystem::path& dir, std::size_t divisor = 100,
                                       std::uint64_t seed = 3);

// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

}  // namespace revmine::fixtures
