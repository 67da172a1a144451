#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "revmine/corpus.hpp"
#include "revmine/llm.hpp"
#include "revmine/nli.hpp"

namespace revmine {

struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

struct MetricsReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Harmonic mean of precision and recall; 0 when both are 0.
double f1_score(double precision, double recall);

// P = tp/(tp+fp), R = tp/(tp+fn); a 0/0 ratio counts as 0.
MetricsReport metrics(const ConfusionMatrix& cm);

// Metrics for a published (P, R) pair.
MetricsReport metrics_from_pr(double precision, double recall);

// NLI stage: a gold review counts as predicted positive exactly when its
// pseudo label is maybe_privacy; maybe_not_privacy and undetermined are both
// negative. Throws ValidationError when a gold review lacks a gold label or a
// pseudo label.
ConfusionMatrix confusion_from_nli(const ReviewCorpus& gold, const PseudoLabeledCorpus& pseudo);

// LLM stage: predicted positive exactly when the decision is yes.
ConfusionMatrix confusion_from_llm(const ReviewCorpus& gold, std::span<const VoteRecord> decisions);

// Random classifier: P = n_pos / n_total, R = 0.5. Throws ValidationError
// unless 0 < n_pos <= n_total.
MetricsReport random_baseline(std::size_t n_pos, std::size_t n_total);

struct KappaReport {
  double kappa = 0.0;
  double observed = 0.0;  // p_o
  double expected = 0.0;  // p_e
  std::vector<std::size_t> disagreements;  // indices where the raters differ
};

// Two-rater Cohen's kappa over binary (0/1) labels, with each rater's own
// marginals for chance agreement. When p_e = 1 both raters used one identical
// constant label, and kappa is 1. Throws ValidationError on empty input,
// length mismatch or non-binary labels.
KappaReport cohen_kappa(std::span<const int> labels_a, std::span<const int> labels_b);

nlohmann::json to_json(const KappaReport& report, std::span<const std::string> ids = {});

struct Candidate {
  std::string id;
  MetricsReport metrics;
};

struct ComparisonRow {
  std::string id;
  MetricsReport metrics;
  // candidate f1 / baseline f1 on unrounded values; empty when the baseline
  // f1 is 0.
  std::optional<double> improvement;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;
  std::string winner;
  std::string baseline;

  const ComparisonRow& row(std::string_view id) const;
};

// Winner = highest f1; ties go to higher precision, then the lexicographically
// smaller id. Improvement ratios are relative to `baseline_id`, or to the
// first candidate when empty. Throws ValidationError for an empty list or an
// unknown baseline id.
ComparisonTable select_best(std::span<const Candidate> candidates,
                            std::string_view baseline_id = {});

// {candidates:[{id, p, r, f1, improvement}], winner, baseline}
nlohmann::json to_json(const ComparisonTable& table);
std::string format_table(const ComparisonTable& table);

nlohmann::json to_json(const ConfusionMatrix& cm);
nlohmann::json to_json(const MetricsReport& m);

}  // namespace revmine
