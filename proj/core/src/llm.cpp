#include "revmine/llm.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <exception>
#include <thread>
#include <unordered_map>

#include "revmine/errors.hpp"
#include "revmine/util.hpp"

namespace revmine {

using nlohmann::json;

namespace {

constexpr char kBuiltinTemplate[] =
    R"(You are a scholarly researcher who studies privacy concerns that users raise in mobile app reviews. The user will give you one app review. Annotate the review with a yes or no label. Answer strictly with the single word "yes" or the single word "no" and nothing else.

Answer yes if the review supports any hypothesis below, that is, if the review entails at least one of the listed privacy hypotheses. Otherwise answer no.

Privacy hypotheses:
{hypotheses})";

constexpr std::string_view kPlaceholder = "{hypotheses}";
constexpr std::string_view kFailToken = "!fail";

}  // namespace

std::string_view to_string(Vote vote) {
  switch (vote) {
    case Vote::yes: return "yes";
    case Vote::no: return "no";
    case Vote::abstain: return "abstain";
  }
  return "abstain";
}

std::string_view to_string(BinaryLabel label) {
  return label == BinaryLabel::yes ? "yes" : "no";
}

Vote parse_vote(std::string_view text) {
  if (text == "yes") return Vote::yes;
  if (text == "no") return Vote::no;
  if (text == "abstain") return Vote::abstain;
  throw ValidationError("unknown vote: \"" + std::string(text) + "\"");
}

BinaryLabel parse_binary_label(std::string_view text) {
  if (text == "yes") return BinaryLabel::yes;
  if (text == "no") return BinaryLabel::no;
  throw ValidationError("unknown decision: \"" + std::string(text) + "\"");
}

void SamplingSettings::validate() const {
  if (!(temperature >= 0.0)) throw ValidationError("temperature must be >= 0");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw ValidationError("top_p must be in (0, 1]");
  if (num_samples < 1 || num_samples % 2 == 0) {
    throw ValidationError("num_samples must be a positive odd number, got " +
                          std::to_string(num_samples));
  }
  if (max_response_tokens < 1) throw ValidationError("max_response_tokens must be positive");
}

const PromptTemplate& PromptTemplate::builtin() {
  static const PromptTemplate tmpl{"builtin-v1", kBuiltinTemplate};
  return tmpl;
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
  std::string text = read_file(path);
  if (text.find(kPlaceholder) == std::string::npos) {
    throw ValidationError(path.string() + ": prompt template lacks the {hypotheses} placeholder");
  }
  return {"file:" + sha256_hex(text).substr(0, 12), std::move(text)};
}

std::string build_system_message(const HypothesisSet& set, const PromptTemplate& tmpl) {
  if (set.hypotheses.empty()) throw ValidationError("cannot build a prompt from an empty hypothesis set");
  std::string list;
  for (std::size_t i = 0; i < set.hypotheses.size(); ++i) {
    if (i) list += '\n';
    list += std::to_string(i + 1) + ". " + set.hypotheses[i].text;
  }
  std::string out = tmpl.text;
  const auto pos = out.find(kPlaceholder);
  if (pos == std::string::npos) {
    throw ValidationError("prompt template " + tmpl.version + " lacks the {hypotheses} placeholder");
  }
  out.replace(pos, kPlaceholder.size(), list);
  return out;
}

PromptMessages build_prompt(const HypothesisSet& set, const Review& review,
                            const PromptTemplate& tmpl) {
  if (!review.text_norm) throw ValidationError("review " + review.id + " is not normalized");
  return {build_system_message(set, tmpl), *review.text_norm};
}

Vote parse_response(std::string_view raw) {
  std::size_t i = 0;
  while (i < raw.size() && !std::isalpha(static_cast<unsigned char>(raw[i]))) ++i;
  std::string token;
  while (i < raw.size() && std::isalpha(static_cast<unsigned char>(raw[i]))) {
    token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(raw[i]))));
    ++i;
  }
  if (token == "yes") return Vote::yes;
  if (token == "no") return Vote::no;
  return Vote::abstain;
}

MajorityResult majority_vote(std::span<const Vote> votes) {
  const auto yes = std::count(votes.begin(), votes.end(), Vote::yes);
  const auto no = std::count(votes.begin(), votes.end(), Vote::no);
  if (yes > no) return {BinaryLabel::yes, false};
  if (no > yes) return {BinaryLabel::no, false};
  return {BinaryLabel::no, true};
}

std::size_t VoteRecord::count(Vote v) const {
  return static_cast<std::size_t>(std::count(votes.begin(), votes.end(), v));
}

json to_json(const VoteRecord& record) {
  json votes = json::array();
  for (Vote v : record.votes) votes.push_back(to_string(v));
  return json{{"id", record.review_id},
              {"responses", record.raw_responses},
              {"votes", votes},
              {"decision", to_string(record.decision)},
              {"tie", record.tie_flag}};
}

VoteRecord vote_record_from_json(const json& doc) {
  try {
    VoteRecord r;
    r.review_id = doc.at("id").get<std::string>();
    r.raw_responses = doc.at("responses").get<std::vector<std::string>>();
    for (const json& v : doc.at("votes")) r.votes.push_back(parse_vote(v.get<std::string>()));
    r.decision = parse_binary_label(doc.at("decision").get<std::string>());
    r.tie_flag = doc.at("tie").get<bool>();
    if (r.votes.size() != r.raw_responses.size()) {
      throw ValidationError("vote record " + r.review_id + ": votes and responses differ in length");
    }
    return r;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed vote record: ") + e.what());
  }
}

void LlmBackendDescriptor::validate() const {
  if (name.empty()) throw ValidationError("LLM backend needs a name");
  if (timeout.count() <= 0) throw ValidationError("LLM backend timeout must be positive");
  if (max_inflight < 1) throw ValidationError("LLM backend max_inflight must be >= 1");
}

// --- mock backend -------------------------------------------------------------

MockLlmScript MockLlmScript::from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("mock LLM script must be a JSON object");
  MockLlmScript script;
  for (const auto& [id, responses] : doc.items()) {
    auto list = responses.is_array() ? responses.get<std::vector<std::string>>()
                                     : std::vector<std::string>{responses.get<std::string>()};
    if (list.empty()) throw ValidationError("mock LLM script for \"" + id + "\" is empty");
    if (id == "*") {
      script.default_responses = std::move(list);
    } else {
      script.responses.emplace(id, std::move(list));
    }
  }
  return script;
}

MockLlmScript MockLlmScript::load(const std::filesystem::path& path) {
  json doc = json::parse(read_file(path), nullptr, false);
  if (doc.is_discarded()) throw ValidationError(path.string() + " is not valid JSON");
  return from_json(doc);
}

MockLlmBackend::MockLlmBackend(LlmBackendDescriptor descriptor, MockLlmScript script)
    : descriptor_(std::move(descriptor)), script_(std::move(script)) {
  descriptor_.validate();
  if (script_.default_responses.empty()) script_.default_responses = {"no"};
}

std::string MockLlmBackend::complete(const CompletionRequest& request) {
  calls_.fetch_add(1);
  auto it = script_.responses.find(request.review_id);
  const auto& list = it == script_.responses.end() ? script_.default_responses : it->second;
  const std::string& response = list[static_cast<std::size_t>(request.sample_index) % list.size()];
  if (response == kFailToken) {
    throw BackendError("mock LLM backend: scripted failure for review " +
                       std::string(request.review_id));
  }
  return response;
}

// --- HTTP backend ---------------------------------------------------------------

HttpLlmBackend::HttpLlmBackend(LlmBackendDescriptor descriptor, RetryPolicy retry)
    : descriptor_(std::move(descriptor)) {
  descriptor_.validate();
  endpoint_ = parse_endpoint(descriptor_.endpoint);
  options_.timeout = descriptor_.timeout;
  options_.retry = retry;
  if (!descriptor_.api_key_env.empty()) {
    const char* key = std::getenv(descriptor_.api_key_env.c_str());
    if (!key || !*key) {
      throw ValidationError("environment variable " + descriptor_.api_key_env + " is not set");
    }
    options_.headers.emplace_back("Authorization", std::string("Bearer ") + key);
  }
}

json HttpLlmBackend::request_body(const CompletionRequest& request) const {
  return json{{"model", descriptor_.model},
              {"messages", json::array({{{"role", "system"}, {"content", request.prompt.system}},
                                        {{"role", "user"}, {"content", request.prompt.user}}})},
              {"temperature", request.settings.temperature},
              {"top_p", request.settings.top_p},
              {"max_tokens", request.settings.max_response_tokens}};
}

std::string HttpLlmBackend::complete(const CompletionRequest& request) {
  calls_.fetch_add(1);
  const json res = post_json(endpoint_, request_body(request), options_);
  try {
    return res.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw BackendError("malformed chat-completions response: " + res.dump().substr(0, 200));
  }
}

// --- classification -------------------------------------------------------------

VoteRecord classify_review(LlmBackend& backend, std::string_view review_id,
                           const PromptMessages& prompt, const SamplingSettings& settings) {
  settings.validate();
  VoteRecord record;
  record.review_id = std::string(review_id);
  for (int k = 0; k < settings.num_samples; ++k) {
    record.raw_responses.push_back(backend.complete({review_id, k, prompt, settings}));
    record.votes.push_back(parse_response(record.raw_responses.back()));
  }
  const MajorityResult m = majority_vote(record.votes);
  record.decision = m.decision;
  record.tie_flag = m.tie;
  return record;
}

VoteLog::VoteLog(std::filesystem::path path) : path_(std::move(path)) {
  if (std::filesystem::exists(path_)) {
    std::ifstream in(path_);
    std::string line;
    while (std::getline(in, line)) {
      json obj = json::parse(line, nullptr, false);
      if (obj.is_discarded()) continue;  // torn trailing line
      try {
        VoteRecord r = vote_record_from_json(obj);
        records_.insert_or_assign(r.review_id, std::move(r));
      } catch (const ValidationError&) {
        continue;
      }
    }
  } else if (path_.has_parent_path()) {
    std::filesystem::create_directories(path_.parent_path());
  }
  out_.open(path_, std::ios::app);
  if (!out_) throw Error("cannot open vote log " + path_.string());
}

std::optional<VoteRecord> VoteLog::find(std::string_view review_id) const {
  std::lock_guard lock(mu_);
  auto it = records_.find(review_id);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

void VoteLog::append(const VoteRecord& record) {
  std::lock_guard lock(mu_);
  records_.insert_or_assign(record.review_id, record);
  out_ << to_json(record).dump() << '\n';
  out_.flush();
}

std::size_t VoteLog::size() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

std::size_t ClassificationResult::count(BinaryLabel decision) const {
  return static_cast<std::size_t>(std::count_if(
      records.begin(), records.end(), [&](const VoteRecord& r) { return r.decision == decision; }));
}

ClassificationResult classify_corpus(LlmBackend& backend, const ReviewCorpus& candidates,
                                     const PseudoLabeledCorpus& pseudo, const HypothesisSet& set,
                                     const SamplingSettings& settings,
                                     const ClassifyOptions& options) {
  settings.validate();
  std::unordered_map<std::string_view, PseudoLabel> label_by_id;
  for (std::size_t i = 0; i < pseudo.size(); ++i) label_by_id[pseudo.review_ids[i]] = pseudo.labels[i];
  for (const Review& r : candidates.reviews) {
    auto it = label_by_id.find(r.id);
    if (it == label_by_id.end() || it->second != PseudoLabel::maybe_privacy) {
      throw ValidationError("review " + r.id + " is not labeled maybe_privacy");
    }
    if (!r.text_norm) throw ValidationError("review " + r.id + " is not normalized");
  }

  const PromptTemplate& tmpl = options.prompt_template ? *options.prompt_template
                                                       : PromptTemplate::builtin();
  ClassificationResult result;
  if (candidates.empty()) return result;
  const std::string system = build_system_message(set, tmpl);

  const std::size_t n = candidates.size();
  std::vector<std::optional<VoteRecord>> records(n);
  std::vector<std::optional<std::string>> errors(n);
  std::atomic<std::size_t> next{0};
  std::mutex fatal_mu;
  std::exception_ptr fatal;

  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      const Review& review = candidates.reviews[i];
      if (options.log) {
        if (auto cached = options.log->find(review.id)) {
          records[i] = std::move(cached);
          continue;
        }
      }
      try {
        const PromptMessages prompt{system, *review.text_norm};
        records[i] = classify_review(backend, review.id, prompt, settings);
        if (options.log) options.log->append(*records[i]);
      } catch (const BackendError& e) {
        errors[i] = e.what();
      } catch (...) {
        std::lock_guard lock(fatal_mu);
        if (!fatal) fatal = std::current_exception();
      }
    }
  };

  const int inflight = options.max_inflight.value_or(backend.descriptor().max_inflight);
  if (inflight < 1) throw ValidationError("max_inflight must be >= 1");
  const std::size_t n_workers = std::min<std::size_t>(static_cast<std::size_t>(inflight), n);
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> threads;
    for (std::size_t t = 0; t < n_workers; ++t) threads.emplace_back(worker);
  }
  if (fatal) std::rethrow_exception(fatal);

  for (std::size_t i = 0; i < n; ++i) {
    if (records[i]) {
      result.records.push_back(std::move(*records[i]));
    } else {
      result.failed.push_back({candidates.reviews[i].id, errors[i].value_or("unknown failure")});
    }
  }
  return result;
}

ReviewCorpus select_maybe_privacy(const ReviewCorpus& corpus, const PseudoLabeledCorpus& pseudo) {
  std::unordered_map<std::string_view, PseudoLabel> label_by_id;
  for (std::size_t i = 0; i < pseudo.size(); ++i) label_by_id[pseudo.review_ids[i]] = pseudo.labels[i];
  std::vector<Review> kept;
  for (const Review& r : corpus.reviews) {
    auto it = label_by_id.find(r.id);
    if (it != label_by_id.end() && it->second == PseudoLabel::maybe_privacy) kept.push_back(r);
  }
  return ReviewCorpus::derived(corpus, std::move(kept));
}

void write_vote_records(const std::filesystem::path& path, std::span<const VoteRecord> records) {
  std::string out;
  for (const VoteRecord& r : records) {
    out += to_json(r).dump();
    out += '\n';
  }
  write_file_atomic(path, out);
}

std::vector<VoteRecord> read_vote_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read vote records " + path.string());
  std::vector<VoteRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded()) throw ValidationError(path.string() + ": malformed JSONL line");
    out.push_back(vote_record_from_json(obj));
  }
  return out;
}

}  // namespace revmine
