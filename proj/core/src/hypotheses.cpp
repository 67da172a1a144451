#include "revmine/hypotheses.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <map>
#include <set>

#include "revmine/errors.hpp"
#include "revmine/util.hpp"

namespace revmine {

using nlohmann::json;

namespace {

using S = HypothesisSource;

HypothesisSet make_generic() {
  HypothesisSet set;
  set.set_id = "generic";
  set.name = "Generic privacy hypotheses (Solove / Wang-Kobsa / generic)";
  set.hypotheses = {
      {1, "Surveillance", "The user is facing a data surveillance issue.", S::solove},
      {2, "Interrogation", "The user is forced to provide information.", S::solove},
      {3, "Aggregation", "Personal user information is collected from other sources.", S::solove},
      {4, "Insecurity", "The user is concerned about protecting their personal data.", S::solove},
      {5, "Identification", "A data anonymity topic is discussed.", S::solove},
      {6, "Secondary Use", "The user is concerned about the purposes of personal data access.",
       S::solove},
      {7, "Exclusion", "The user wants to correct their personal information.", S::solove},
      {8, "Breach of Confidentiality", "A breach of data confidentiality is discussed.",
       S::solove},
      {9, "Disclosure", "Personal data disclosure is discussed.", S::solove},
      {10, "Exposure", "The app exposes a private aspect of the user life.", S::solove},
      {11, "Increased Accessibility", "User’s data has been made accessible to public.",
       S::solove},
      {12, "Blackmail", "A data blackmailing issue is discussed.", S::solove},
      {13, "Appropriation", "User data is being exploited for other purposes.", S::solove},
      {14, "Distortion", "False data is presented about the user.", S::solove},
      {15, "Intrusion", "Unwanted intrusion to personal info is discussed.", S::solove},
      {16, "Decisional Interference",
       "Intrusion by the government to the user’s life is discussed.", S::solove},
      {17, "Notice/Awareness", "Opting out from personal data collection is discussed.",
       S::wang_kobsa},
      {18, "Data Minimization", "More access than needed is required.", S::wang_kobsa},
      {19, "Purpose Specification", "The reason for data access is not provided.", S::wang_kobsa},
      {20, "Collection Limitation", "Too much personal data is collected.", S::wang_kobsa},
      {21, "Use Limitation", "The data is being used for unexpected purposes.", S::wang_kobsa},
      {22, "Onward Transfer", "Data sharing with third parties is discussed.", S::wang_kobsa},
      {23, "Choice/Consent", "User choice for personal data collection is discussed.",
       S::wang_kobsa},
      {24, "Choice/Consent", "User did not allow access to their personal data.", S::wang_kobsa},
      {25, "Generic Privacy Issues", "A data privacy topic is discussed.", S::generic},
      {26, "Generic Privacy Issues", "Protecting user’s personal data is discussed.",
       S::generic},
      {27, "Generic Privacy Issues", "This is about a privacy feature.", S::generic},
      {28, "Generic Privacy Issues", "The user is facing a privacy issue.", S::generic},
      {29, "Positive Privacy Issues", "The user likes that data privacy is provided.", S::generic},
      {30, "Positive Privacy Issues", "The user wants privacy.", S::generic},
      {31, "Positive Privacy Issues", "The app has privacy features.", S::generic},
  };
  set.heuristics.positive_rules = {{0.8, 1}, {0.7, 3}, {0.6, 5}, {0.5, 7}};
  set.heuristics.negative_threshold = 0.4;
  set.heuristics.default_label = PseudoLabel::undetermined;
  set.version_hash = compute_version_hash(set);
  return set;
}

HypothesisSet make_domain_mh() {
  HypothesisSet set;
  set.set_id = "domain_mh";
  set.name = "Mental-health domain privacy hypotheses (Iwaya et al. concepts)";
  set.hypotheses = {
      {1, "Linkability", "User data being linked across different services.", S::iwaya},
      {2, "Linkability", "Online user activities from various platforms can be connected.",
       S::iwaya},
      {3, "Linkability", "Personal user information is collected from other sources.", S::iwaya},
      {4, "Identifiability", "Anonymized user data could be used to reveal their identity.",
       S::iwaya},
      {5, "Identifiability", "Unique digital user data could lead to personal identification.",
       S::iwaya},
      {6, "Non-repudiation", "User is unable to deny their online actions.", S::iwaya},
      {7, "Non-repudiation",
       "User is concerned about the permanent storage of their digital transactions.", S::iwaya},
      {8, "Detectability",
       "User is concerned about others detecting their use of sensitive online services.",
       S::iwaya},
      {9, "Detectability",
       "User presence on certain platforms could be discovered from anonymized data.", S::iwaya},
      // 10 and 11 are identical in the published table; both are kept so the
      // set keeps its 21 entries. lint() reports the duplicate.
      {10, "Disclosure of information",
       "User device's communication patterns reveal private information.", S::iwaya},
      {11, "Disclosure of information",
       "User device's communication patterns reveal private information.", S::iwaya},
      {12, "Disclosure of information", "The app exposes a private aspect of the user life.",
       S::iwaya},
      {13, "Unawareness", "Unauthorized access to user's private information.", S::iwaya},
      {14, "Unawareness",
       "The user is not aware of how and why their data is being collected, processed, stored, "
       "and shared.",
       S::iwaya},
      {15, "Non-compliance",
       "The user is concerned about the processing or storing of their personal data against "
       "regulations or privacy policies.",
       S::iwaya},
      {16, "Non-compliance", "User data is being exploited for other purposes.", S::iwaya},
      {17, "Non-compliance", "Data sharing with third parties is discussed.", S::iwaya},
      {18, "General Privacy Issues", "The user is facing a privacy issue.", S::generic},
      {19, "General Privacy Issues", "The user is concerned about protecting their personal data.",
       S::generic},
      {20, "General Privacy Issues", "A data anonymity topic is discussed.", S::generic},
      {21, "General Privacy Issues", "A data privacy topic is discussed.", S::generic},
  };
  set.heuristics.positive_rules = {{0.85, 1}, {0.75, 3}, {0.7, 5}};
  set.heuristics.negative_threshold = std::nullopt;
  set.heuristics.default_label = PseudoLabel::maybe_not_privacy;
  set.version_hash = compute_version_hash(set);
  return set;
}

json rules_to_json(const HeuristicRuleSet& rules) {
  json positive = json::array();
  for (const PositiveRule& r : rules.positive_rules) positive.push_back({r.threshold, r.min_count});
  json out{{"positive_rules", positive}, {"default_label", to_string(rules.default_label)}};
  out["negative_rule"] =
      rules.negative_threshold ? json::array({*rules.negative_threshold}) : json(nullptr);
  return out;
}

template <typename T>
T require(const json& obj, const char* key, const char* where) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw ValidationError(std::string(where) + ": missing key \"" + key + "\"");
  }
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string(where) + ": key \"" + key + "\" has the wrong type");
  }
}

}  // namespace

std::string_view to_string(PseudoLabel label) {
  switch (label) {
    case PseudoLabel::maybe_privacy: return "maybe_privacy";
    case PseudoLabel::maybe_not_privacy: return "maybe_not_privacy";
    case PseudoLabel::undetermined: return "undetermined";
  }
  return "undetermined";
}

PseudoLabel parse_pseudo_label(std::string_view text) {
  std::string s(text);
  std::replace(s.begin(), s.end(), '-', '_');
  if (s == "maybe_privacy") return PseudoLabel::maybe_privacy;
  if (s == "maybe_not_privacy") return PseudoLabel::maybe_not_privacy;
  if (s == "undetermined") return PseudoLabel::undetermined;
  throw ValidationError("unknown pseudo label: \"" + std::string(text) + "\"");
}

std::string_view to_string(HypothesisSource source) {
  switch (source) {
    case S::solove: return "solove";
    case S::wang_kobsa: return "wang_kobsa";
    case S::iwaya: return "iwaya";
    case S::generic: return "generic";
    case S::custom: return "custom";
  }
  return "custom";
}

HypothesisSource parse_hypothesis_source(std::string_view text) {
  if (text == "solove") return S::solove;
  if (text == "wang_kobsa") return S::wang_kobsa;
  if (text == "iwaya") return S::iwaya;
  if (text == "generic") return S::generic;
  if (text == "custom") return S::custom;
  throw ValidationError("unknown hypothesis source: \"" + std::string(text) + "\"");
}

const HypothesisSet& builtin_generic() {
  static const HypothesisSet set = make_generic();
  return set;
}

const HypothesisSet& builtin_domain_mh() {
  static const HypothesisSet set = make_domain_mh();
  return set;
}

HypothesisSet resolve_hypothesis_set(std::string_view ref) {
  if (ref == "builtin:generic" || ref == "generic") return builtin_generic();
  if (ref == "builtin:domain_mh" || ref == "domain_mh") return builtin_domain_mh();
  if (ref.starts_with("builtin:")) {
    throw ValidationError("unknown builtin hypothesis set \"" + std::string(ref) +
                          "\" (have builtin:generic, builtin:domain_mh)");
  }
  return load_hypothesis_set(std::filesystem::path(std::string(ref)));
}

void validate(const HypothesisSet& set) {
  const std::string where = "hypothesis set \"" + set.set_id + "\"";
  if (set.set_id.empty()) throw ValidationError("hypothesis set has an empty set_id");
  if (set.hypotheses.empty()) throw ValidationError(where + " has no hypotheses");
  std::set<int> ids;
  for (const Hypothesis& h : set.hypotheses) {
    if (h.text.empty()) {
      throw ValidationError(where + ": hypothesis " + std::to_string(h.id) + " has empty text");
    }
    if (!ids.insert(h.id).second) {
      throw ValidationError(where + ": duplicate hypothesis id " + std::to_string(h.id));
    }
  }
  auto check_threshold = [&](double t) {
    if (!(t > 0.0 && t < 1.0)) {
      throw ValidationError(where + ": threshold " + std::to_string(t) +
                            " is not strictly between 0 and 1");
    }
  };
  for (const PositiveRule& rule : set.heuristics.positive_rules) {
    check_threshold(rule.threshold);
    if (rule.min_count < 1) {
      throw ValidationError(where + ": rule count must be positive, got " +
                            std::to_string(rule.min_count));
    }
    if (static_cast<std::size_t>(rule.min_count) > set.hypotheses.size()) {
      throw ValidationError(where + ": rule count " + std::to_string(rule.min_count) +
                            " exceeds the " + std::to_string(set.hypotheses.size()) +
                            " hypotheses in the set");
    }
  }
  if (set.heuristics.negative_threshold) check_threshold(*set.heuristics.negative_threshold);
}

std::vector<std::string> lint(const HypothesisSet& set) {
  std::vector<std::string> warnings;
  std::map<std::string, int> first_id;
  for (const Hypothesis& h : set.hypotheses) {
    auto [it, inserted] = first_id.emplace(h.text, h.id);
    if (!inserted) {
      warnings.push_back("hypotheses " + std::to_string(it->second) + " and " +
                         std::to_string(h.id) + " have identical text: \"" + h.text + "\"");
    }
  }
  return warnings;
}

json to_json(const HypothesisSet& set) {
  json hyps = json::array();
  for (const Hypothesis& h : set.hypotheses) {
    hyps.push_back({{"id", h.id},
                    {"concept", h.concept_name},
                    {"text", h.text},
                    {"source", to_string(h.source)}});
  }
  return json{{"set_id", set.set_id},
              {"name", set.name},
              {"hypotheses", hyps},
              {"heuristics", rules_to_json(set.heuristics)}};
}

std::string compute_version_hash(const HypothesisSet& set) {
  return sha256_hex(to_json(set).dump());
}

HypothesisSet hypothesis_set_from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("hypothesis set must be a JSON object");
  HypothesisSet set;
  set.set_id = require<std::string>(doc, "set_id", "hypothesis set");
  set.name = doc.value("name", set.set_id);

  const auto hyps = require<json>(doc, "hypotheses", "hypothesis set");
  if (!hyps.is_array()) throw ValidationError("hypothesis set: \"hypotheses\" must be an array");
  for (const json& h : hyps) {
    if (!h.is_object()) throw ValidationError("hypothesis entries must be objects");
    Hypothesis hyp;
    hyp.id = require<int>(h, "id", "hypothesis");
    hyp.concept_name = h.value("concept", std::string());
    hyp.text = require<std::string>(h, "text", "hypothesis");
    hyp.source = parse_hypothesis_source(h.value("source", std::string("custom")));
    set.hypotheses.push_back(std::move(hyp));
  }

  const auto rules = require<json>(doc, "heuristics", "hypothesis set");
  if (!rules.is_object()) throw ValidationError("\"heuristics\" must be an object");
  const auto positive = require<json>(rules, "positive_rules", "heuristics");
  if (!positive.is_array()) throw ValidationError("\"positive_rules\" must be an array");
  for (const json& r : positive) {
    if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number_integer()) {
      throw ValidationError("positive rule must be [threshold, min_count]: " + r.dump());
    }
    set.heuristics.positive_rules.push_back({r[0].get<double>(), r[1].get<int>()});
  }
  if (auto it = rules.find("negative_rule"); it != rules.end() && !it->is_null()) {
    if (it->is_array() && it->size() == 1 && (*it)[0].is_number()) {
      set.heuristics.negative_threshold = (*it)[0].get<double>();
    } else if (it->is_number()) {
      set.heuristics.negative_threshold = it->get<double>();
    } else {
      throw ValidationError("negative_rule must be [threshold] or null: " + it->dump());
    }
  }
  set.heuristics.default_label =
      parse_pseudo_label(require<std::string>(rules, "default_label", "heuristics"));

  validate(set);
  set.version_hash = compute_version_hash(set);
  return set;
}

HypothesisSet load_hypothesis_set(const std::filesystem::path& path) {
  json doc = json::parse(read_file(path), nullptr, false);
  if (doc.is_discarded()) throw ValidationError(path.string() + " is not valid JSON");
  return hypothesis_set_from_json(doc);
}

void save_hypothesis_set(const std::filesystem::path& path, const HypothesisSet& set) {
  write_file_atomic(path, to_json(set).dump(2) + "\n");
}

}  // namespace revmine
