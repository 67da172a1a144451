#include "revmine/nli.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cstring>
#include <thread>

#include "revmine/errors.hpp"
#include "revmine/util.hpp"

namespace revmine {

using nlohmann::json;

namespace {

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

bool above(float score, double threshold) {
  const float t = static_cast<float>(threshold);
  if constexpr (kStrictAboveThreshold) {
    return score > t;
  } else {
    return score >= t;
  }
}

void check_threshold(double t) {
  if (!(t > 0.0 && t < 1.0)) {
    throw ValidationError("threshold " + std::to_string(t) + " is not strictly between 0 and 1");
  }
}

void check_rules_fit(const HeuristicRuleSet& rules, std::size_t cols) {
  for (const PositiveRule& r : rules.positive_rules) {
    check_threshold(r.threshold);
    if (r.min_count < 1 || static_cast<std::size_t>(r.min_count) > cols) {
      throw ValidationError("dimension mismatch: rule needs " + std::to_string(r.min_count) +
                            " hypotheses but the matrix has " + std::to_string(cols) +
                            " columns");
    }
  }
  if (rules.negative_threshold) check_threshold(*rules.negative_threshold);
}

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  }
}

void write_floats_le(std::ostream& out, std::span<const float> values) {
  std::vector<char> buf(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::uint32_t bits = to_le(std::bit_cast<std::uint32_t>(values[i]));
    std::memcpy(buf.data() + i * 4, &bits, 4);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

bool read_floats_le(std::istream& in, std::span<float> values) {
  std::vector<char> buf(values.size() * 4);
  in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in.gcount()) != buf.size()) return false;
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, buf.data() + i * 4, 4);
    values[i] = std::bit_cast<float>(to_le(bits));
  }
  return true;
}

json matrix_header(const EntailmentMatrix& m) {
  return json{{"reviews", m.review_ids},
              {"hypotheses", m.hypothesis_ids},
              {"backend", m.backend},
              {"set_hash", m.set_hash}};
}

}  // namespace

void validate_score(const EntailmentScore& score) {
  if (!in_unit(score.entail)) {
    throw BackendError("entailment probability out of [0,1]: " + std::to_string(score.entail));
  }
  if (score.neutral && score.contradict) {
    if (!in_unit(*score.neutral) || !in_unit(*score.contradict)) {
      throw BackendError("neutral/contradiction probability out of [0,1]");
    }
    const double sum = score.entail + *score.neutral + *score.contradict;
    if (sum < 0.99 || sum > 1.01) {
      throw BackendError("label distribution sums to " + std::to_string(sum) +
                         ", expected 1 +/- 0.01");
    }
  }
}

void NliBackendDescriptor::validate() const {
  if (name.empty()) throw ValidationError("NLI backend needs a name");
  if (timeout.count() <= 0) throw ValidationError("NLI backend timeout must be positive");
  if (max_inflight < 1) throw ValidationError("NLI backend max_inflight must be >= 1");
}

EntailmentScore infer_pair(NliBackend& backend, std::string_view premise,
                           const Hypothesis& hypothesis) {
  if (premise.empty()) throw ValidationError("premise must be non-empty");
  EntailmentScore score = backend.infer(premise, hypothesis);
  validate_score(score);
  return score;
}

// --- mock backend ---------------------------------------------------------

MockNliTable MockNliTable::from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("mock NLI table must be a JSON object");
  MockNliTable table;
  table.default_score = doc.value("default_score", table.default_score);
  table.jitter = doc.value("jitter", table.jitter);
  table.seed = doc.value("seed", table.seed);
  if (auto it = doc.find("fail_phrase"); it != doc.end() && it->is_string()) {
    table.fail_phrase = it->get<std::string>();
  }
  for (const json& t : doc.value("triggers", json::array())) {
    MockNliTrigger trig;
    trig.phrase = t.at("phrase").get<std::string>();
    trig.hypothesis_ids = t.value("hypotheses", std::vector<int>{});
    trig.score = t.value("score", trig.score);
    if (trig.phrase.empty()) throw ValidationError("mock trigger phrase must be non-empty");
    table.triggers.push_back(std::move(trig));
  }
  if (!in_unit(table.default_score) || table.jitter < 0.0) {
    throw ValidationError("mock NLI table has an invalid default_score or jitter");
  }
  return table;
}

MockNliTable MockNliTable::load(const std::filesystem::path& path) {
  json doc = json::parse(read_file(path), nullptr, false);
  if (doc.is_discarded()) throw ValidationError(path.string() + " is not valid JSON");
  return from_json(doc);
}

MockNliBackend::MockNliBackend(NliBackendDescriptor descriptor, MockNliTable table)
    : descriptor_(std::move(descriptor)), table_(std::move(table)) {
  descriptor_.validate();
}

double MockNliBackend::expected_entail(std::string_view premise, int hypothesis_id) const {
  double base = table_.default_score;
  for (const MockNliTrigger& t : table_.triggers) {
    const bool targets = t.hypothesis_ids.empty() ||
                         std::find(t.hypothesis_ids.begin(), t.hypothesis_ids.end(),
                                   hypothesis_id) != t.hypothesis_ids.end();
    if (targets && premise.find(t.phrase) != std::string_view::npos) base = std::max(base, t.score);
  }
  if (table_.jitter > 0.0) {
    std::uint64_t h = fnv1a64(premise, fnv1a64(descriptor_.model, table_.seed ^ 0x9e3779b97f4a7c15ULL));
    h ^= static_cast<std::uint64_t>(hypothesis_id) * 0xff51afd7ed558ccdULL;
    h ^= h >> 33;
    h *= 0xc4ceb9fe1a85ec53ULL;
    h ^= h >> 33;
    const double unit = static_cast<double>(h >> 11) * 0x1.0p-53;  // [0,1)
    base += (2.0 * unit - 1.0) * table_.jitter;
  }
  return std::clamp(base, 0.0, 1.0);
}

EntailmentScore MockNliBackend::infer(std::string_view premise, const Hypothesis& hypothesis) {
  calls_.fetch_add(1);
  if (table_.fail_phrase && premise.find(*table_.fail_phrase) != std::string_view::npos) {
    throw BackendError("mock NLI backend: scripted failure for premise \"" +
                       std::string(premise.substr(0, 60)) + "\"");
  }
  const double entail = expected_entail(premise, hypothesis.id);
  const double rest = 1.0 - entail;
  return {entail, rest * 0.6, rest * 0.4};
}

// --- HTTP backend -----------------------------------------------------------

HttpNliBackend::HttpNliBackend(NliBackendDescriptor descriptor, NliFieldMap fields,
                               RetryPolicy retry)
    : descriptor_(std::move(descriptor)), fields_(std::move(fields)) {
  descriptor_.validate();
  endpoint_ = parse_endpoint(descriptor_.endpoint);
  options_.timeout = descriptor_.timeout;
  options_.retry = retry;
}

EntailmentScore HttpNliBackend::infer(std::string_view premise, const Hypothesis& hypothesis) {
  calls_.fetch_add(1);
  json body{{fields_.premise, std::string(premise)}, {fields_.hypothesis, hypothesis.text}};
  const json res = post_json(endpoint_, body, options_);
  auto number = [&](const std::string& key) -> std::optional<double> {
    if (!res.is_object()) return std::nullopt;
    auto it = res.find(key);
    if (it == res.end() || !it->is_number()) return std::nullopt;
    return it->get<double>();
  };
  auto entail = number(fields_.entailment);
  if (!entail) {
    throw BackendError("malformed NLI response, missing numeric \"" + fields_.entailment +
                       "\": " + res.dump().substr(0, 200));
  }
  EntailmentScore score{*entail, number(fields_.neutral), number(fields_.contradiction)};
  if (score.neutral.has_value() != score.contradict.has_value()) {
    score.neutral.reset();
    score.contradict.reset();
  }
  return score;
}

// --- cache -----------------------------------------------------------------

ScoreCache::ScoreCache(std::filesystem::path path) : path_(std::move(path)) {
  if (std::filesystem::exists(*path_)) {
    std::ifstream in(*path_);
    std::string line;
    while (std::getline(in, line)) {
      json obj = json::parse(line, nullptr, false);
      if (obj.is_discarded() || !obj.is_object()) continue;
      try {
        ScoreKey key{obj.at("backend").get<std::string>(), obj.at("model").get<std::string>(),
                     obj.at("set").get<std::string>(), obj.at("review").get<std::string>(),
                     obj.at("hyp").get<int>()};
        entries_[flatten(key)] = obj.at("entail").get<float>();
      } catch (const json::exception&) {
        continue;
      }
    }
  } else if (path_->has_parent_path()) {
    std::filesystem::create_directories(path_->parent_path());
  }
  out_.open(*path_, std::ios::app);
  if (!out_) throw Error("cannot open score cache " + path_->string());
}

std::string ScoreCache::flatten(const ScoreKey& key) {
  std::string s;
  s.reserve(key.backend.size() + key.model.size() + key.set_hash.size() + key.review_id.size() + 16);
  for (const std::string* part : {&key.backend, &key.model, &key.set_hash, &key.review_id}) {
    s += *part;
    s += '\x1f';
  }
  s += std::to_string(key.hypothesis_id);
  return s;
}

std::optional<float> ScoreCache::lookup(const ScoreKey& key) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(flatten(key));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ScoreCache::insert(const ScoreKey& key, float entail) {
  std::lock_guard lock(mu_);
  if (!entries_.emplace(flatten(key), entail).second) return;
  if (path_) {
    out_ << json{{"backend", key.backend}, {"model", key.model}, {"set", key.set_hash},
                 {"review", key.review_id}, {"hyp", key.hypothesis_id},
                 {"entail", static_cast<double>(entail)}}
                .dump()
         << '\n';
    out_.flush();
  }
}

std::size_t ScoreCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

// --- matrix ------------------------------------------------------------------

void EntailmentMatrix::validate() const {
  if (scores.size() != rows() * cols()) {
    throw ValidationError("entailment matrix has " + std::to_string(scores.size()) +
                          " cells, expected " + std::to_string(rows()) + " x " +
                          std::to_string(cols()));
  }
  for (float v : scores) {
    if (!(v >= 0.0f && v <= 1.0f)) throw ValidationError("entailment matrix cell outside [0,1]");
  }
}

EntailmentMatrix score_corpus(NliBackend& backend, const ReviewCorpus& corpus,
                              const HypothesisSet& set, ScoreCache* cache,
                              const ScoringOptions& options) {
  validate(set);
  for (const Review& r : corpus.reviews) {
    if (!r.text_norm) throw ValidationError("review " + r.id + " is not normalized");
  }

  const NliBackendDescriptor& desc = backend.descriptor();
  EntailmentMatrix m;
  m.backend = desc.name;
  m.set_hash = set.version_hash.empty() ? compute_version_hash(set) : set.version_hash;
  m.review_ids.reserve(corpus.size());
  for (const Review& r : corpus.reviews) m.review_ids.push_back(r.id);
  for (const Hypothesis& h : set.hypotheses) m.hypothesis_ids.push_back(h.id);
  const std::size_t cols = m.cols();
  const std::size_t total = m.rows() * cols;
  m.scores.assign(total, 0.0f);

  auto key_for = [&](std::size_t cell) {
    return ScoreKey{desc.name, desc.model, m.set_hash, m.review_ids[cell / cols],
                    m.hypothesis_ids[cell % cols]};
  };

  std::vector<std::size_t> pending;
  for (std::size_t cell = 0; cell < total; ++cell) {
    if (corpus.reviews[cell / cols].text_norm->empty()) continue;  // stays 0
    if (cache) {
      if (auto hit = cache->lookup(key_for(cell))) {
        m.scores[cell] = *hit;
        continue;
      }
    }
    pending.push_back(cell);
  }

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::atomic<bool> failed{false};
  std::mutex err_mu;
  std::string first_error;

  auto worker = [&] {
    while (!failed.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= pending.size()) return;
      const std::size_t cell = pending[i];
      try {
        const Review& review = corpus.reviews[cell / cols];
        const EntailmentScore s = infer_pair(backend, *review.text_norm, set.hypotheses[cell % cols]);
        const auto value = static_cast<float>(s.entail);
        m.scores[cell] = value;
        if (cache) cache->insert(key_for(cell), value);
        const std::size_t n = done.fetch_add(1) + 1;
        if (options.progress) options.progress(n, pending.size());
      } catch (const std::exception& e) {
        std::lock_guard lock(err_mu);
        if (!failed.exchange(true)) first_error = e.what();
        return;
      }
    }
  };

  const int inflight = options.max_inflight.value_or(desc.max_inflight);
  if (inflight < 1) throw ValidationError("max_inflight must be >= 1");
  const std::size_t n_workers = std::min<std::size_t>(static_cast<std::size_t>(inflight), pending.size());
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> threads;
    threads.reserve(n_workers);
    for (std::size_t i = 0; i < n_workers; ++i) threads.emplace_back(worker);
  }

  if (failed.load()) {
    const std::size_t completed = total - pending.size() + done.load();
    throw ScoringError("NLI scoring failed after " + std::to_string(completed) + " of " +
                           std::to_string(total) + " cells: " + first_error,
                       completed, total);
  }
  return m;
}

void write_matrix(const std::filesystem::path& path, const EntailmentMatrix& matrix) {
  matrix.validate();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write matrix file " + tmp.string());
    out << matrix_header(matrix).dump() << '\n';
    for (std::size_t r = 0; r < matrix.rows(); ++r) write_floats_le(out, matrix.row(r));
    if (!out) throw Error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

MatrixFileReader::MatrixFileReader(const std::filesystem::path& path)
    : in_(path, std::ios::binary) {
  if (!in_) throw ValidationError("cannot read matrix file " + path.string());
  std::string header_line;
  std::getline(in_, header_line);
  json header = json::parse(header_line, nullptr, false);
  if (header.is_discarded() || !header.is_object()) {
    throw ValidationError(path.string() + ": matrix header is not a JSON object");
  }
  try {
    review_ids_ = header.at("reviews").get<std::vector<std::string>>();
    hypothesis_ids_ = header.at("hypotheses").get<std::vector<int>>();
    backend_ = header.at("backend").get<std::string>();
    set_hash_ = header.at("set_hash").get<std::string>();
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": bad matrix header: " + e.what());
  }
}

bool MatrixFileReader::next_row(std::vector<float>& row) {
  if (next_ >= review_ids_.size()) return false;
  row.resize(hypothesis_ids_.size());
  if (!read_floats_le(in_, row)) {
    throw ValidationError("matrix file truncated at row " + std::to_string(next_));
  }
  ++next_;
  return true;
}

EntailmentMatrix read_matrix(const std::filesystem::path& path) {
  MatrixFileReader reader(path);
  EntailmentMatrix m;
  m.review_ids = reader.review_ids();
  m.hypothesis_ids = reader.hypothesis_ids();
  m.backend = reader.backend();
  m.set_hash = reader.set_hash();
  m.scores.reserve(m.rows() * m.cols());
  std::vector<float> row;
  while (reader.next_row(row)) m.scores.insert(m.scores.end(), row.begin(), row.end());
  m.validate();
  return m;
}

// --- heuristics -----------------------------------------------------------------

std::size_t n_above(std::span<const float> row, double threshold) {
  check_threshold(threshold);
  return static_cast<std::size_t>(
      std::count_if(row.begin(), row.end(), [&](float s) { return above(s, threshold); }));
}

PseudoLabel label_row(std::span<const float> row, const HeuristicRuleSet& rules) {
  for (const PositiveRule& r : rules.positive_rules) {
    if (n_above(row, r.threshold) >= static_cast<std::size_t>(r.min_count)) {
      return PseudoLabel::maybe_privacy;
    }
  }
  if (rules.negative_threshold && n_above(row, *rules.negative_threshold) == 0) {
    return PseudoLabel::maybe_not_privacy;
  }
  return rules.default_label;
}

std::vector<int> triggering_hypotheses(std::span<const float> row,
                                       std::span<const int> hypothesis_ids,
                                       const HeuristicRuleSet& rules) {
  std::optional<double> lowest;
  for (const PositiveRule& r : rules.positive_rules) {
    if (n_above(row, r.threshold) >= static_cast<std::size_t>(r.min_count)) {
      lowest = lowest ? std::min(*lowest, r.threshold) : r.threshold;
    }
  }
  std::vector<int> ids;
  if (!lowest) return ids;
  for (std::size_t i = 0; i < row.size() && i < hypothesis_ids.size(); ++i) {
    if (above(row[i], *lowest)) ids.push_back(hypothesis_ids[i]);
  }
  return ids;
}

std::size_t PseudoLabeledCorpus::count(PseudoLabel label) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
}

std::optional<PseudoLabel> PseudoLabeledCorpus::label_of(std::string_view review_id) const {
  for (std::size_t i = 0; i < review_ids.size(); ++i) {
    if (review_ids[i] == review_id) return labels[i];
  }
  return std::nullopt;
}

PseudoLabeledCorpus apply_heuristics(const EntailmentMatrix& matrix,
                                     const HeuristicRuleSet& rules) {
  if (matrix.scores.size() != matrix.rows() * matrix.cols()) {
    throw ValidationError("dimension mismatch: matrix cell count does not match its ids");
  }
  check_rules_fit(rules, matrix.cols());
  PseudoLabeledCorpus out;
  out.review_ids = matrix.review_ids;
  out.labels.reserve(matrix.rows());
  out.triggered.reserve(matrix.rows());
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    out.labels.push_back(label_row(matrix.row(r), rules));
    out.triggered.push_back(triggering_hypotheses(matrix.row(r), matrix.hypothesis_ids, rules));
  }
  return out;
}

PseudoLabeledCorpus apply_heuristics(MatrixFileReader& reader, const HeuristicRuleSet& rules) {
  check_rules_fit(rules, reader.hypothesis_ids().size());
  PseudoLabeledCorpus out;
  out.review_ids = reader.review_ids();
  std::vector<float> row;
  while (reader.next_row(row)) {
    out.labels.push_back(label_row(row, rules));
    out.triggered.push_back(triggering_hypotheses(row, reader.hypothesis_ids(), rules));
  }
  return out;
}

void write_pseudo_labels(const std::filesystem::path& path, const PseudoLabeledCorpus& labels) {
  std::string out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    json obj{{"id", labels.review_ids[i]}, {"label", to_string(labels.labels[i])}};
    obj["triggered"] = i < labels.triggered.size() ? json(labels.triggered[i]) : json::array();
    out += obj.dump();
    out += '\n';
  }
  write_file_atomic(path, out);
}

PseudoLabeledCorpus read_pseudo_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read pseudo-label file " + path.string());
  PseudoLabeledCorpus out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.contains("id") || !obj.contains("label")) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": expected {id, label, triggered}");
    }
    out.review_ids.push_back(obj["id"].get<std::string>());
    out.labels.push_back(parse_pseudo_label(obj["label"].get<std::string>()));
    out.triggered.push_back(obj.value("triggered", std::vector<int>{}));
  }
  return out;
}

}  // namespace revmine
