#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace revmine {

// Heuristic outcome for one review after NLI scoring.
enum class PseudoLabel { maybe_not_privacy, undetermined, maybe_privacy };

std::string_view to_string(PseudoLabel label);
PseudoLabel parse_pseudo_label(std::string_view text);

// Where a hypothesis sentence comes from: Solove's taxonomy of privacy
// violations, Wang & Kobsa's privacy-enhancing-technology taxonomy, Iwaya et
// al.'s mental-health privacy concepts, generic privacy statements, or a user file.
enum class HypothesisSource { solove, wang_kobsa, iwaya, generic, custom };

std::string_view to_string(HypothesisSource source);
HypothesisSource parse_hypothesis_source(std::string_view text);

struct Hypothesis {
  int id = 0;
  std::string concept_name;
  std::string text;
  HypothesisSource source = HypothesisSource::custom;

  bool operator==(const Hypothesis&) const = default;
};

// "At least `min_count` hypotheses score above `threshold`."
struct PositiveRule {
  double threshold = 0.5;
  int min_count = 1;

  bool operator==(const PositiveRule&) const = default;
};

// Positive rules are OR-ed; any hit yields maybe_privacy. Otherwise, when a
// negative threshold is set and no hypothesis scores above it, the review is
// maybe_not_privacy. Everything else gets `default_label`.
struct HeuristicRuleSet {
  std::vector<PositiveRule> positive_rules;
  std::optional<double> negative_threshold;
  PseudoLabel default_label = PseudoLabel::undetermined;

  bool operator==(const HeuristicRuleSet&) const = default;
};

struct HypothesisSet {
  std::string set_id;
  std::string name;
  std::vector<Hypothesis> hypotheses;
  HeuristicRuleSet heuristics;
  // SHA-256 of the canonical JSON encoding (everything except this field).
  // Scores are cached under it, so any text or rule change invalidates them.
  std::string version_hash;

  std::size_t size() const { return hypotheses.size(); }
  bool operator==(const HypothesisSet&) const = default;
};

// The 31 generic privacy hypotheses with the threshold-count heuristics
// 0.8/1, 0.7/3, 0.6/5, 0.5/7, negative rule at 0.4, default undetermined.
const HypothesisSet& builtin_generic();

// The 21 mental-health domain hypotheses with heuristics 0.85/1, 0.75/3,
// 0.7/5 and every other review labeled maybe_not_privacy.
const HypothesisSet& builtin_domain_mh();

// Resolves "builtin:generic", "builtin:domain_mh" or a file path.
HypothesisSet resolve_hypothesis_set(std::string_view ref);

// Throws ValidationError on empty text, duplicate ids, thresholds outside
// (0,1), non-positive counts or counts above the set size.
void validate(const HypothesisSet& set);

// Non-fatal findings, e.g. two hypotheses with identical text.
std::vector<std::string> lint(const HypothesisSet& set);

std::string compute_version_hash(const HypothesisSet& set);

nlohmann::json to_json(const HypothesisSet& set);
// Parses and validates; recomputes version_hash.
HypothesisSet hypothesis_set_from_json(const nlohmann::json& doc);

HypothesisSet load_hypothesis_set(const std::filesystem::path& path);
void save_hypothesis_set(const std::filesystem::path& path, const HypothesisSet& set);

}  // namespace revmine
