#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "revmine/corpus.hpp"
#include "revmine/http_client.hpp"
#include "revmine/hypotheses.hpp"

namespace revmine {

// "Above a threshold" means strictly greater. Flip this to count scores equal
// to the threshold as well.
inline constexpr bool kStrictAboveThreshold = true;

struct EntailmentScore {
  double entail = 0.0;
  // Present when the backend reports the full three-way distribution.
  std::optional<double> neutral;
  std::optional<double> contradict;
};

// Throws BackendError unless every probability is in [0,1] and, for a full
// distribution, the three sum to within [0.99, 1.01].
void validate_score(const EntailmentScore& score);

struct NliBackendDescriptor {
  std::string name;
  std::string model;
  std::string endpoint = "mock";  // URL or "mock"
  std::chrono::milliseconds timeout{30000};
  int max_inflight = 8;

  void validate() const;
};

// Implementations must be safe to call from several threads at once.
class NliBackend {
 public:
  virtual ~NliBackend() = default;
  virtual const NliBackendDescriptor& descriptor() const = 0;
  virtual EntailmentScore infer(std::string_view premise, const Hypothesis& hypothesis) = 0;
  // Requests issued so far, including failed ones.
  virtual std::size_t call_count() const = 0;
};

// Scores one premise/hypothesis pair. Throws ValidationError for an empty
// premise and BackendError when the backend fails or answers out of range.
EntailmentScore infer_pair(NliBackend& backend, std::string_view premise,
                           const Hypothesis& hypothesis);

// Deterministic offline backend. A premise containing a trigger phrase scores
// `score` for the trigger's hypotheses (all hypotheses when the list is
// empty); everything else scores `default_score`. A seeded jitter in
// [-jitter, +jitter], derived from the premise and hypothesis id, is added
// and the result clamped to [0,1].
struct MockNliTrigger {
  std::string phrase;
  std::vector<int> hypothesis_ids;
  double score = 0.9;
};

struct MockNliTable {
  std::vector<MockNliTrigger> triggers;
  double default_score = 0.05;
  double jitter = 0.02;
  std::uint64_t seed = 0;
  // Premises containing this phrase make the backend throw, for failure tests.
  std::optional<std::string> fail_phrase;

  static MockNliTable from_json(const nlohmann::json& doc);
  static MockNliTable load(const std::filesystem::path& path);
};

class MockNliBackend final : public NliBackend {
 public:
  MockNliBackend(NliBackendDescriptor descriptor, MockNliTable table);

  const NliBackendDescriptor& descriptor() const override { return descriptor_; }
  EntailmentScore infer(std::string_view premise, const Hypothesis& hypothesis) override;
  std::size_t call_count() const override { return calls_.load(); }

  // The entailment value infer() would return, without counting a call.
  double expected_entail(std::string_view premise, int hypothesis_id) const;

 private:
  NliBackendDescriptor descriptor_;
  MockNliTable table_;
  std::atomic<std::size_t> calls_{0};
};

// Request/response key names for HTTP NLI services.
struct NliFieldMap {
  std::string premise = "premise";
  std::string hypothesis = "hypothesis";
  std::string entailment = "entailment";
  std::string neutral = "neutral";
  std::string contradiction = "contradiction";
};

// POST {premise, hypothesis} -> {entailment, neutral, contradiction}.
class HttpNliBackend final : public NliBackend {
 public:
  HttpNliBackend(NliBackendDescriptor descriptor, NliFieldMap fields = {},
                 RetryPolicy retry = {});

  const NliBackendDescriptor& descriptor() const override { return descriptor_; }
  EntailmentScore infer(std::string_view premise, const Hypothesis& hypothesis) override;
  std::size_t call_count() const override { return calls_.load(); }

 private:
  NliBackendDescriptor descriptor_;
  NliFieldMap fields_;
  HttpRequestOptions options_;
  HttpEndpoint endpoint_;
  std::atomic<std::size_t> calls_{0};
};

struct ScoreKey {
  std::string backend;
  std::string model;
  std::string set_hash;
  std::string review_id;
  int hypothesis_id = 0;
};

// Append-only entailment cache. With a path, existing entries are loaded on
// construction and every insert is appended to the file immediately, so an
// interrupted run resumes from what it finished. A torn trailing line is
// ignored on load. Inserts are serialized through one writer.
class ScoreCache {
 public:
  ScoreCache() = default;
  explicit ScoreCache(std::filesystem::path path);

  std::optional<float> lookup(const ScoreKey& key) const;
  void insert(const ScoreKey& key, float entail);
  std::size_t size() const;

 private:
  static std::string flatten(const ScoreKey& key);

  mutable std::mutex mu_;
  std::unordered_map<std::string, float> entries_;
  std::optional<std::filesystem::path> path_;
  std::ofstream out_;
};

struct EntailmentMatrix {
  std::vector<std::string> review_ids;
  std::vector<int> hypothesis_ids;
  std::string backend;
  std::string set_hash;
  std::vector<float> scores;  // row-major, review x hypothesis

  std::size_t rows() const { return review_ids.size(); }
  std::size_t cols() const { return hypothesis_ids.size(); }
  std::span<const float> row(std::size_t r) const {
    return std::span<const float>(scores).subspan(r * cols(), cols());
  }
  float at(std::size_t r, std::size_t c) const { return scores[r * cols() + c]; }

  // Throws ValidationError on dimension mismatch or cells outside [0,1].
  void validate() const;
};

struct ScoringOptions {
  // Overrides the backend descriptor's max_inflight when set.
  std::optional<int> max_inflight;
  // Called after each freshly computed cell with (done, total).
  std::function<void(std::size_t, std::size_t)> progress;
};

// Scores every review against every hypothesis. Cached cells are taken from
// `cache` without a backend call; new cells are inserted as they finish.
// Reviews whose normalized text is empty score 0 without a call. Requires
// every review to carry text_norm. Backend failures abort with ScoringError.
EntailmentMatrix score_corpus(NliBackend& backend, const ReviewCorpus& corpus,
                              const HypothesisSet& set, ScoreCache* cache = nullptr,
                              const ScoringOptions& options = {});

// Matrix file: one JSON header line {reviews, hypotheses, backend, set_hash}
// followed by little-endian float32 cells in row-major order.
void write_matrix(const std::filesystem::path& path, const EntailmentMatrix& matrix);
EntailmentMatrix read_matrix(const std::filesystem::path& path);

// Streams rows out of a matrix file without loading the whole grid.
class MatrixFileReader {
 public:
  explicit MatrixFileReader(const std::filesystem::path& path);

  const std::vector<std::string>& review_ids() const { return review_ids_; }
  const std::vector<int>& hypothesis_ids() const { return hypothesis_ids_; }
  const std::string& backend() const { return backend_; }
  const std::string& set_hash() const { return set_hash_; }

  // Reads the next row into `row`; returns false at the end.
  bool next_row(std::vector<float>& row);

 private:
  std::ifstream in_;
  std::vector<std::string> review_ids_;
  std::vector<int> hypothesis_ids_;
  std::string backend_;
  std::string set_hash_;
  std::size_t next_ = 0;
};

// Number of scores strictly above `threshold`. Scores are float32, so the
// threshold is compared at float precision. Throws ValidationError unless
// threshold is in (0,1).
std::size_t n_above(std::span<const float> row, double threshold);

PseudoLabel label_row(std::span<const float> row, const HeuristicRuleSet& rules);

// Hypothesis ids that made a positive rule fire: those scoring above the
// lowest threshold among the satisfied rules. Empty when no rule fired.
std::vector<int> triggering_hypotheses(std::span<const float> row,
                                       std::span<const int> hypothesis_ids,
                                       const HeuristicRuleSet& rules);

struct PseudoLabeledCorpus {
  std::vector<std::string> review_ids;
  std::vector<PseudoLabel> labels;
  std::vector<std::vector<int>> triggered;

  std::size_t size() const { return review_ids.size(); }
  std::size_t count(PseudoLabel label) const;
  std::optional<PseudoLabel> label_of(std::string_view review_id) const;
};

// Throws ValidationError when a rule needs more hypotheses than the matrix has
// columns or a threshold is outside (0,1).
PseudoLabeledCorpus apply_heuristics(const EntailmentMatrix& matrix, const HeuristicRuleSet& rules);
PseudoLabeledCorpus apply_heuristics(MatrixFileReader& reader, const HeuristicRuleSet& rules);

// JSONL of {id, label, triggered}.
void write_pseudo_labels(const std::filesystem::path& path, const PseudoLabeledCorpus& labels);
PseudoLabeledCorpus read_pseudo_labels(const std::filesystem::path& path);

}  // namespace revmine
