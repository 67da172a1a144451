#pragma once

#include <chrono>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace revmine {

// Exponential backoff: attempt k (0-based) sleeps initial * multiplier^k,
// capped at max_backoff, before attempt k+1.
struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds initial_backoff{200};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{5000};

  std::chrono::milliseconds backoff_before(int attempt) const;
};

struct HttpEndpoint {
  std::string scheme_host_port;  // "http://localhost:8080"
  std::string path;              // "/v1/chat/completions"
};

// Splits "http://host:port/path" into its origin and path. Throws
// ValidationError for anything that is not an http(s) URL.
HttpEndpoint parse_endpoint(const std::string& url);

struct HttpRequestOptions {
  std::chrono::milliseconds timeout{30000};
  RetryPolicy retry;
  std::vector<std::pair<std::string, std::string>> headers;
};

// POSTs `body` as JSON and returns the parsed JSON response. Connection
// failures, 429 and 5xx responses are retried per the policy; other 4xx
// responses and non-JSON bodies fail immediately. Throws BackendError.
nlohmann::json post_json(const HttpEndpoint& endpoint, const nlohmann::json& body,
                         const HttpRequestOptions& options);

}  // namespace revmine
