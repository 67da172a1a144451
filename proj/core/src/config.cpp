#include "revmine/config.hpp"

#include <algorithm>

#include "revmine/errors.hpp"
#include "revmine/util.hpp"

namespace revmine {

using nlohmann::json;

namespace {

std::filesystem::path resolve_path(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative()) path = base / path;
  return path.lexically_normal();
}

bool is_file_ref(const std::string& ref) { return !ref.starts_with("builtin:"); }

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("config: key \"") + key + "\" has the wrong type");
  }
}

RetryPolicy parse_retry(const json& obj) {
  RetryPolicy r;
  if (!obj.is_object()) return r;
  r.max_attempts = get_or(obj, "max_attempts", r.max_attempts);
  r.initial_backoff = std::chrono::milliseconds(
      get_or<long long>(obj, "initial_backoff_ms", r.initial_backoff.count()));
  r.multiplier = get_or(obj, "multiplier", r.multiplier);
  r.max_backoff =
      std::chrono::milliseconds(get_or<long long>(obj, "max_backoff_ms", r.max_backoff.count()));
  if (r.max_attempts < 1) throw ValidationError("config: retry.max_attempts must be >= 1");
  return r;
}

// Replaces a "mock_table"/"mock_script" path with the parsed file so the
// resolved document (and its digest) captures the mock contents.
json inline_mock(json& backend, const char* path_key, const std::filesystem::path& base) {
  if (backend.contains("mock") && backend["mock"].is_object()) return backend["mock"];
  auto it = backend.find(path_key);
  if (it == backend.end() || !it->is_string()) return json(nullptr);
  const auto path = resolve_path(base, it->get<std::string>());
  json doc = json::parse(read_file(path), nullptr, false);
  if (doc.is_discarded()) throw ValidationError(path.string() + " is not valid JSON");
  backend.erase(path_key);
  backend["mock"] = doc;
  return doc;
}

NliBackendConfig parse_nli_backend(json& obj, const std::filesystem::path& base) {
  if (!obj.is_object()) throw ValidationError("config: NLI backend entries must be objects");
  NliBackendConfig c;
  c.descriptor.name = get_or<std::string>(obj, "name", "");
  c.descriptor.model = get_or<std::string>(obj, "model", c.descriptor.name);
  c.descriptor.endpoint = get_or<std::string>(obj, "endpoint", "mock");
  c.descriptor.timeout = std::chrono::milliseconds(get_or<long long>(obj, "timeout_ms", 30000));
  c.descriptor.max_inflight = get_or(obj, "max_inflight", 8);
  if (auto f = obj.find("fields"); f != obj.end() && f->is_object()) {
    c.fields.premise = get_or(*f, "premise", c.fields.premise);
    c.fields.hypothesis = get_or(*f, "hypothesis", c.fields.hypothesis);
    c.fields.entailment = get_or(*f, "entailment", c.fields.entailment);
    c.fields.neutral = get_or(*f, "neutral", c.fields.neutral);
    c.fields.contradiction = get_or(*f, "contradiction", c.fields.contradiction);
  }
  c.retry = parse_retry(obj.value("retry", json::object()));
  json mock = inline_mock(obj, "mock_table", base);
  if (!mock.is_null()) c.mock = MockNliTable::from_json(mock);
  return c;
}

LlmBackendConfig parse_llm_backend(json& obj, const std::filesystem::path& base) {
  if (!obj.is_object()) throw ValidationError("config: llm.backend must be an object");
  LlmBackendConfig c;
  c.descriptor.name = get_or<std::string>(obj, "name", "");
  c.descriptor.model = get_or<std::string>(obj, "model", c.descriptor.name);
  c.descriptor.endpoint = get_or<std::string>(obj, "endpoint", "mock");
  c.descriptor.timeout = std::chrono::milliseconds(get_or<long long>(obj, "timeout_ms", 60000));
  c.descriptor.max_inflight = get_or(obj, "max_inflight", 4);
  c.descriptor.api_key_env = get_or<std::string>(obj, "api_key_env", "");
  c.retry = parse_retry(obj.value("retry", json::object()));
  json mock = inline_mock(obj, "mock_script", base);
  if (!mock.is_null()) c.mock = MockLlmScript::from_json(mock);
  return c;
}

}  // namespace

const NliBackendConfig& PipelineConfig::selected_nli() const {
  for (const NliBackendConfig& b : nli_backends) {
    if (b.descriptor.name == nli_selected) return b;
  }
  throw ValidationError("config: selected NLI backend \"" + nli_selected + "\" is not configured");
}

std::string PipelineConfig::digest() const {
  json doc = resolved;
  doc.erase("work_dir");
  return sha256_hex(doc.dump());
}

PipelineConfig parse_config(const json& input, const std::filesystem::path& base_dir,
                            const ConfigOverrides& ov) {
  if (!input.is_object()) throw ValidationError("config must be a JSON object");
  json doc = input;
  PipelineConfig cfg;

  try {
    if (doc.contains("work_dir")) {
      doc["work_dir"] = resolve_path(base_dir, doc["work_dir"].get<std::string>()).string();
    }
    if (ov.work_dir) doc["work_dir"] = std::filesystem::absolute(*ov.work_dir).lexically_normal().string();
    if (ov.seed) doc["seed"] = *ov.seed;

    json& corpus = doc["corpus"];
    if (corpus.is_null()) corpus = json::object();
    for (const char* key : {"labeled", "unlabeled"}) {
      if (corpus.contains(key) && corpus[key].is_string()) {
        corpus[key] = resolve_path(base_dir, corpus[key].get<std::string>()).string();
      }
    }

    json& nli = doc["nli"];
    if (nli.is_null()) nli = json::object();
    json& backends = nli["backends"];
    if (backends.is_null()) backends = json::array();
    const std::string selected_name =
        get_or<std::string>(nli, "selected", backends.empty() ? "" : backends[0].value("name", ""));
    for (json& b : backends) {
      if (b.is_object() && ov.max_inflight) b["max_inflight"] = *ov.max_inflight;
      if (b.is_object() && ov.nli_endpoint && b.value("name", "") == selected_name) {
        b["endpoint"] = *ov.nli_endpoint;
      }
    }
    nli["selected"] = selected_name;

    json& hyp = doc["hypotheses"];
    if (hyp.is_null()) hyp = json::object();
    if (ov.hypotheses) hyp["selected"] = *ov.hypotheses;
    if (hyp.contains("sets")) {
      for (json& s : hyp["sets"]) {
        const auto ref = s.get<std::string>();
        if (is_file_ref(ref)) s = resolve_path(base_dir, ref).string();
      }
    }
    if (hyp.contains("selected") && hyp["selected"].is_string()) {
      const auto ref = hyp["selected"].get<std::string>();
      if (is_file_ref(ref)) hyp["selected"] = resolve_path(base_dir, ref).string();
    }

    if (doc.contains("llm") && doc["llm"].is_object()) {
      json& llm = doc["llm"];
      if (llm.contains("backend") && llm["backend"].is_object()) {
        if (ov.llm_endpoint) llm["backend"]["endpoint"] = *ov.llm_endpoint;
        if (ov.max_inflight) llm["backend"]["max_inflight"] = *ov.max_inflight;
      }
      if (llm.contains("prompt_template") && llm["prompt_template"].is_string()) {
        llm["prompt_template"] =
            resolve_path(base_dir, llm["prompt_template"].get<std::string>()).string();
      }
    }

    // --- typed view -----------------------------------------------------------
    cfg.work_dir = doc.value("work_dir", (base_dir / "revmine-run").lexically_normal().string());
    if (doc.contains("seed") && !doc["seed"].is_null()) cfg.seed = doc["seed"].get<std::uint64_t>();

    if (corpus.contains("labeled") && corpus["labeled"].is_string()) {
      cfg.corpus.labeled = corpus["labeled"].get<std::string>();
    }
    if (corpus.contains("unlabeled") && corpus["unlabeled"].is_string()) {
      cfg.corpus.unlabeled = corpus["unlabeled"].get<std::string>();
    }
    if (corpus.contains("format") && corpus["format"].is_string()) {
      cfg.corpus.format = parse_corpus_format(corpus["format"].get<std::string>());
    }
    cfg.corpus.rating_min = get_or(corpus, "rating_min", 1);
    cfg.corpus.rating_max = get_or(corpus, "rating_max", 2);
    if (cfg.corpus.rating_min < 1 || cfg.corpus.rating_max > 5 ||
        cfg.corpus.rating_min > cfg.corpus.rating_max) {
      throw ValidationError("config: invalid rating bounds");
    }

    for (json& b : backends) {
      NliBackendConfig bc = parse_nli_backend(b, base_dir);
      if (bc.mock && cfg.seed) {
        bc.mock->seed = *cfg.seed;
        b["mock"]["seed"] = *cfg.seed;
      }
      bc.descriptor.validate();
      if (bc.descriptor.endpoint == "mock" && !bc.mock) {
        throw ValidationError("config: mock NLI backend \"" + bc.descriptor.name +
                              "\" needs mock_table or mock");
      }
      cfg.nli_backends.push_back(std::move(bc));
    }
    std::vector<std::string> names;
    for (const auto& b : cfg.nli_backends) names.push_back(b.descriptor.name);
    std::sort(names.begin(), names.end());
    if (std::adjacent_find(names.begin(), names.end()) != names.end()) {
      throw ValidationError("config: NLI backend names must be unique");
    }
    cfg.nli_selected = selected_name;

    if (hyp.contains("sets")) cfg.hypothesis_sets = hyp["sets"].get<std::vector<std::string>>();
    if (cfg.hypothesis_sets.empty()) throw ValidationError("config: hypotheses.sets is empty");
    cfg.hypotheses_selected = get_or<std::string>(hyp, "selected", cfg.hypotheses_selected);

    if (doc.contains("llm") && doc["llm"].is_object()) {
      json& llm = doc["llm"];
      if (llm.contains("backend")) {
        LlmBackendConfig lc = parse_llm_backend(llm["backend"], base_dir);
        if (lc.descriptor.endpoint == "mock" && !lc.mock) {
          throw ValidationError("config: mock LLM backend needs mock_script or mock");
        }
        cfg.llm = std::move(lc);
      }
      if (auto s = llm.find("sampling"); s != llm.end() && s->is_object()) {
        cfg.sampling.temperature = get_or(*s, "temperature", cfg.sampling.temperature);
        cfg.sampling.top_p = get_or(*s, "top_p", cfg.sampling.top_p);
        cfg.sampling.num_samples = get_or(*s, "num_samples", cfg.sampling.num_samples);
        cfg.sampling.max_response_tokens =
            get_or(*s, "max_response_tokens", cfg.sampling.max_response_tokens);
      }
      cfg.sampling.validate();
      if (llm.contains("prompt_template") && llm["prompt_template"].is_string()) {
        cfg.prompt_template = llm["prompt_template"].get<std::string>();
      }
    }

    if (auto a = doc.find("annotation"); a != doc.end() && a->is_object()) {
      cfg.annotators = get_or(*a, "annotators", std::vector<std::string>{});
      cfg.annotation_instructions = get_or<std::string>(*a, "instructions", "");
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }

  cfg.resolved = std::move(doc);
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path, const ConfigOverrides& overrides) {
  json doc = json::parse(read_file(path), nullptr, false);
  if (doc.is_discarded()) throw ValidationError(path.string() + " is not valid JSON");
  auto base = std::filesystem::absolute(path).parent_path();
  return parse_config(doc, base, overrides);
}

std::unique_ptr<NliBackend> make_nli_backend(const NliBackendConfig& config) {
  if (config.descriptor.endpoint == "mock") {
    if (!config.mock) throw ValidationError("mock NLI backend without a table");
    return std::make_unique<MockNliBackend>(config.descriptor, *config.mock);
  }
  return std::make_unique<HttpNliBackend>(config.descriptor, config.fields, config.retry);
}

std::unique_ptr<LlmBackend> make_llm_backend(const LlmBackendConfig& config) {
  if (config.descriptor.endpoint == "mock") {
    if (!config.mock) throw ValidationError("mock LLM backend without a script");
    return std::make_unique<MockLlmBackend>(config.descriptor, *config.mock);
  }
  return std::make_unique<HttpLlmBackend>(config.descriptor, config.retry);
}

json to_json(const NliBackendDescriptor& d) {
  return json{{"name", d.name},
              {"model", d.model},
              {"endpoint", d.endpoint},
              {"timeout_ms", d.timeout.count()},
              {"max_inflight", d.max_inflight}};
}

json to_json(const LlmBackendDescriptor& d) {
  return json{{"name", d.name},
              {"model", d.model},
              {"endpoint", d.endpoint},
              {"timeout_ms", d.timeout.count()},
              {"max_inflight", d.max_inflight}};
}

json to_json(const SamplingSettings& s) {
  return json{{"temperature", s.temperature},
              {"top_p", s.top_p},
              {"num_samples", s.num_samples},
              {"max_response_tokens", s.max_response_tokens}};
}

}  // namespace revmine
