#include "evsel/http.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

#include "httplib.h"

#include "evsel/errors.hpp"
#include "evsel/log.hpp"

namespace evsel {

RateLimiter::RateLimiter(double requests_per_second) {
  if (requests_per_second > 0.0) {
    interval_ = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(1.0 / requests_per_second));
  }
}

void RateLimiter::acquire() {
  if (interval_.count() == 0) return;
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(mutex_);
    const auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_);
    next_ = slot + interval_;
  }
  std::this_thread::sleep_until(slot);
}

namespace {

struct ParsedUrl {
  std::string scheme_host_port;
  std::string path;
};

ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw TransportError("invalid URL '" + url + "'", false);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

bool retryable_status(int status) { return status == 429 || status >= 500; }

nlohmann::json post_once(const HttpEndpoint& endpoint, const std::string& body) {
  const ParsedUrl url = parse_url(endpoint.url);
  httplib::Client client(url.scheme_host_port);
  client.set_connection_timeout(endpoint.timeout);
  client.set_read_timeout(endpoint.timeout);
  client.set_write_timeout(endpoint.timeout);

  httplib::Headers headers;
  if (!endpoint.api_key_env.empty()) {
    const char* token = std::getenv(endpoint.api_key_env.c_str());
    if (token == nullptr || *token == '\0') {
      throw TransportError("environment variable " + endpoint.api_key_env + " is not set", false);
    }
    headers.emplace("Authorization", std::string("Bearer ") + token);
  }

  auto res = client.Post(url.path, headers, body, "application/json");
  if (!res) {
    throw TransportError(endpoint.url + ": " + httplib::to_string(res.error()), true);
  }
  if (res->status < 200 || res->status >= 300) {
    std::string snippet = res->body.substr(0, 300);
    throw TransportError(endpoint.url + ": HTTP " + std::to_string(res->status) + ": " + snippet,
                         retryable_status(res->status), res->status);
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::parse_error& e) {
    throw TransportError(endpoint.url + ": response is not JSON: " + e.what(), false, res->status);
  }
}

}  // namespace

nlohmann::json post_json(const HttpEndpoint& endpoint, const nlohmann::json& body, const RetryPolicy& retry,
                         RateLimiter* limiter) {
  const std::string payload = body.dump();
  auto backoff = std::chrono::duration<double, std::milli>(retry.initial_backoff);
  for (int attempt = 0;; ++attempt) {
    if (limiter != nullptr) limiter->acquire();
    try {
      return post_once(endpoint, payload);
    } catch (const TransportError& e) {
      if (!e.retryable() || attempt >= retry.max_retries) throw;
      warn(std::string(e.what()) + " (retry " + std::to_string(attempt + 1) + "/" +
           std::to_string(retry.max_retries) + ")");
      std::this_thread::sleep_for(backoff);
      backoff *= retry.backoff_multiplier;
    }
  }
}

}  // namespace evsel
