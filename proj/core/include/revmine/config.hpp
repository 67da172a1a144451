#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "revmine/corpus.hpp"
#include "revmine/llm.hpp"
#include "revmine/nli.hpp"

namespace revmine {

struct NliBackendConfig {
  NliBackendDescriptor descriptor;
  NliFieldMap fields;
  RetryPolicy retry;
  std::optional<MockNliTable> mock;  // required when endpoint == "mock"
};

struct LlmBackendConfig {
  LlmBackendDescriptor descriptor;
  RetryPolicy retry;
  std::optional<MockLlmScript> mock;  // required when endpoint == "mock"
};

struct CorpusConfig {
  std::optional<std::filesystem::path> labeled;
  std::optional<std::filesystem::path> unlabeled;
  std::optional<CorpusFormat> format;  // inferred from the extension when unset
  int rating_min = 1;
  int rating_max = 2;
};

// One JSON file drives every subcommand. Relative paths resolve against the
// config file's directory. See configs/ for annotated examples.
struct PipelineConfig {
  std::filesystem::path work_dir = "revmine-run";
  std::optional<std::uint64_t> seed;
  CorpusConfig corpus;

  std::vector<NliBackendConfig> nli_backends;
  std::string nli_selected;  // backend name used by extract / nli-score

  // The first set is the baseline that models are compared on.
  std::vector<std::string> hypothesis_sets{"builtin:generic", "builtin:domain_mh"};
  std::string hypotheses_selected = "builtin:domain_mh";

  std::optional<LlmBackendConfig> llm;
  SamplingSettings sampling;
  std::optional<std::filesystem::path> prompt_template;

  std::vector<std::string> annotators;
  std::string annotation_instructions;

  // The parsed document after path resolution and overrides; its digest
  // excludes work_dir so relocating output does not change run identity.
  nlohmann::json resolved;

  const NliBackendConfig& selected_nli() const;
  std::string digest() const;
};

struct ConfigOverrides {
  std::optional<std::string> hypotheses;
  std::optional<std::string> nli_endpoint;
  std::optional<std::string> llm_endpoint;
  std::optional<std::uint64_t> seed;
  std::optional<int> max_inflight;
  std::optional<std::filesystem::path> work_dir;
};

// Throws ValidationError on malformed or inconsistent configuration.
PipelineConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir,
                            const ConfigOverrides& overrides = {});
PipelineConfig load_config(const std::filesystem::path& path, const ConfigOverrides& overrides = {});

std::unique_ptr<NliBackend> make_nli_backend(const NliBackendConfig& config);
std::unique_ptr<LlmBackend> make_llm_backend(const LlmBackendConfig& config);

nlohmann::json to_json(const NliBackendDescriptor& d);
nlohmann::json to_json(const LlmBackendDescriptor& d);
nlohmann::json to_json(const SamplingSettings& s);

}  // namespace revmine
