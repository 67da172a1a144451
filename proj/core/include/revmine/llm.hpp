#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "revmine/corpus.hpp"
#include "revmine/http_client.hpp"
#include "revmine/hypotheses.hpp"
#include "revmine/nli.hpp"

namespace revmine {

enum class Vote { yes, no, abstain };
enum class BinaryLabel { no, yes };

std::string_view to_string(Vote vote);
std::string_view to_string(BinaryLabel label);
Vote parse_vote(std::string_view text);
BinaryLabel parse_binary_label(std::string_view text);

struct SamplingSettings {
  double temperature = 0.3;
  double top_p = 0.9;
  int num_samples = 5;
  int max_response_tokens = 64;

  // Throws ValidationError unless temperature >= 0, 0 < top_p <= 1,
  // num_samples is odd and positive, and max_response_tokens > 0.
  void validate() const;
};

// System-message template. `{hypotheses}` is replaced by the numbered
// hypothesis list, one "N. text" line per hypothesis.
struct PromptTemplate {
  std::string version;
  std::string text;

  static const PromptTemplate& builtin();
  // Plain-text template file; version is "file:<sha256 prefix>".
  static PromptTemplate load(const std::filesystem::path& path);
};

struct PromptMessages {
  std::string system;
  std::string user;
};

// Depends only on the set and template, never on the review.
std::string build_system_message(const HypothesisSet& set,
                                 const PromptTemplate& tmpl = PromptTemplate::builtin());

// System message from the template, user message = the normalized review
// text verbatim. Throws ValidationError for an empty set or a review without
// normalized text.
PromptMessages build_prompt(const HypothesisSet& set, const Review& review,
                            const PromptTemplate& tmpl = PromptTemplate::builtin());

// Looks at the first alphabetic token only, case-insensitively: "yes" -> yes,
// "no" -> no, anything else (or no token) -> abstain.
Vote parse_response(std::string_view raw);

struct MajorityResult {
  BinaryLabel decision = BinaryLabel::no;
  bool tie = false;

  bool operator==(const MajorityResult&) const = default;
};

// Majority over the non-abstain votes. A tie, including all-abstain, resolves
// to no with the tie flag set.
MajorityResult majority_vote(std::span<const Vote> votes);

struct VoteRecord {
  std::string review_id;
  std::vector<std::string> raw_responses;
  std::vector<Vote> votes;
  BinaryLabel decision = BinaryLabel::no;
  bool tie_flag = false;

  std::size_t count(Vote v) const;
};

nlohmann::json to_json(const VoteRecord& record);
VoteRecord vote_record_from_json(const nlohmann::json& doc);

struct LlmBackendDescriptor {
  std::string name;
  std::string model;
  std::string endpoint = "mock";  // URL or "mock"
  std::chrono::milliseconds timeout{60000};
  int max_inflight = 4;
  // Environment variable holding a bearer token, if the service needs one.
  std::string api_key_env;

  void validate() const;
};

struct CompletionRequest {
  std::string_view review_id;
  int sample_index = 0;
  const PromptMessages& prompt;
  const SamplingSettings& settings;
};

// Implementations must be safe to call from several threads at once.
class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  virtual const LlmBackendDescriptor& descriptor() const = 0;
  // One completion. Throws BackendError on failure.
  virtual std::string complete(const CompletionRequest& request) = 0;
  virtual std::size_t call_count() const = 0;
};

// Scripted offline backend: review id -> canned responses, sample k answers
// responses[k % size]. Ids without a script use `default_responses`. The
// response "!fail" makes that request throw BackendError.
struct MockLlmScript {
  std::map<std::string, std::vector<std::string>, std::less<>> responses;
  std::vector<std::string> default_responses{"no"};

  // JSON object of id -> [responses]; the key "*" sets the default.
  static MockLlmScript from_json(const nlohmann::json& doc);
  static MockLlmScript load(const std::filesystem::path& path);
};

class MockLlmBackend final : public LlmBackend {
 public:
  MockLlmBackend(LlmBackendDescriptor descriptor, MockLlmScript script);

  const LlmBackendDescriptor& descriptor() const override { return descriptor_; }
  std::string complete(const CompletionRequest& request) override;
  std::size_t call_count() const override { return calls_.load(); }

 private:
  LlmBackendDescriptor descriptor_;
  MockLlmScript script_;
  std::atomic<std::size_t> calls_{0};
};

// Chat-completions client: POST {model, messages, temperature, top_p,
// max_tokens} and read choices[0].message.content.
class HttpLlmBackend final : public LlmBackend {
 public:
  HttpLlmBackend(LlmBackendDescriptor descriptor, RetryPolicy retry = {});

  const LlmBackendDescriptor& descriptor() const override { return descriptor_; }
  std::string complete(const CompletionRequest& request) override;
  std::size_t call_count() const override { return calls_.load(); }

  // The JSON body sent for `request`.
  nlohmann::json request_body(const CompletionRequest& request) const;

 private:
  LlmBackendDescriptor descriptor_;
  HttpRequestOptions options_;
  HttpEndpoint endpoint_;
  std::atomic<std::size_t> calls_{0};
};

// Requests settings.num_samples independent completions and assembles the
// record via parse_response and majority_vote. Throws BackendError if any
// sample fails.
VoteRecord classify_review(LlmBackend& backend, std::string_view review_id,
                           const PromptMessages& prompt, const SamplingSettings& settings);

// Append-only JSONL of finished VoteRecords; lets classify_corpus resume.
class VoteLog {
 public:
  explicit VoteLog(std::filesystem::path path);

  std::optional<VoteRecord> find(std::string_view review_id) const;
  void append(const VoteRecord& record);
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, VoteRecord, std::less<>> records_;
  std::filesystem::path path_;
  std::ofstream out_;
};

struct FailedReview {
  std::string review_id;
  std::string reason;
};

struct ClassificationResult {
  std::vector<VoteRecord> records;  // input order, failed reviews excluded
  std::vector<FailedReview> failed;

  std::size_t count(BinaryLabel decision) const;
};

struct ClassifyOptions {
  const PromptTemplate* prompt_template = nullptr;  // builtin when null
  std::optional<int> max_inflight;
  VoteLog* log = nullptr;
};

// Classifies every candidate. Each candidate must be labeled maybe_privacy in
// `pseudo`, otherwise ValidationError. Per-review backend failures are
// collected in `failed`, never turned into a label.
ClassificationResult classify_corpus(LlmBackend& backend, const ReviewCorpus& candidates,
                                     const PseudoLabeledCorpus& pseudo, const HypothesisSet& set,
                                     const SamplingSettings& settings,
                                     const ClassifyOptions& options = {});

// Candidates for the LLM stage: reviews whose pseudo label is maybe_privacy.
ReviewCorpus select_maybe_privacy(const ReviewCorpus& corpus, const PseudoLabeledCorpus& pseudo);

void write_vote_records(const std::filesystem::path& path, std::span<const VoteRecord> records);
std::vector<VoteRecord> read_vote_records(const std::filesystem::path& path);

}  // namespace revmine
