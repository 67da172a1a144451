#include "revmine/http_client.hpp"

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <thread>

#include "revmine/errors.hpp"

namespace revmine {

std::chrono::milliseconds RetryPolicy::backoff_before(int attempt) const {
  const double ms = static_cast<double>(initial_backoff.count()) * std::pow(multiplier, attempt);
  return std::min(max_backoff, std::chrono::milliseconds(static_cast<long long>(ms)));
}

HttpEndpoint parse_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ValidationError("endpoint is not a URL: \"" + url + "\"");
  }
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw ValidationError("unsupported endpoint scheme: \"" + scheme + "\"");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  HttpEndpoint ep;
  if (path_start == std::string::npos) {
    ep.scheme_host_port = url;
    ep.path = "/";
  } else {
    ep.scheme_host_port = url.substr(0, path_start);
    ep.path = url.substr(path_start);
  }
  if (ep.scheme_host_port.size() <= scheme_end + 3) {
    throw ValidationError("endpoint has no host: \"" + url + "\"");
  }
  return ep;
}

nlohmann::json post_json(const HttpEndpoint& endpoint, const nlohmann::json& body,
                         const HttpRequestOptions& options) {
  const std::string payload = body.dump();
  httplib::Headers headers;
  for (const auto& [k, v] : options.headers) headers.emplace(k, v);

  const int attempts = std::max(1, options.retry.max_attempts);
  std::string last_error;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(options.retry.backoff_before(attempt - 1));

    httplib::Client client(endpoint.scheme_host_port);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options.timeout);
    const auto usecs =
        std::chrono::duration_cast<std::chrono::microseconds>(options.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    auto res = client.Post(endpoint.path, headers, payload, "application/json");
    if (!res) {
      last_error = "request to " + endpoint.scheme_host_port + endpoint.path +
                   " failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status) + " from " + endpoint.scheme_host_port +
                   endpoint.path;
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      throw BackendError("HTTP " + std::to_string(res->status) + " from " +
                         endpoint.scheme_host_port + endpoint.path + ": " +
                         res->body.substr(0, 200));
    }
    auto parsed = nlohmann::json::parse(res->body, nullptr, false);
    if (parsed.is_discarded()) {
      throw BackendError("malformed backend response (not JSON): " + res->body.substr(0, 200));
    }
    return parsed;
  }
  throw BackendError(last_error + " (after " + std::to_string(attempts) + " attempts)");
}

}  // namespace revmine
