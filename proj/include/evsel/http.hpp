#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <string>

#include "json.hpp"

namespace evsel {

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{500};
  double backoff_multiplier = 2.0;
};

/// Spaces out requests so that at most `requests_per_second` start per
/// second across every provider sharing the limiter. 0 disables limiting.
class RateLimiter {
 public:
  explicit RateLimiter(double requests_per_second);
  void acquire();

 private:
  std::mutex mutex_;
  std::chrono::steady_clock::duration interval_{};
  std::chrono::steady_clock::time_point next_{};
};

struct HttpEndpoint {
  std::string url;          // scheme://host[:port]/path
  std::string api_key_env;  // bearer token variable; empty means no auth
  std::chrono::seconds timeout{120};
};

/// POSTs a JSON body and returns the parsed JSON response. Transport
/// failures, HTTP 429 and 5xx are retried with exponential backoff; other
/// statuses fail immediately. Exhausted retries rethrow the last
/// TransportError.
nlohmann::json post_json(const HttpEndpoint& endpoint, const nlohmann::json& body, const RetryPolicy& retry,
                         RateLimiter* limiter = nullptr);

}  // namespace evsel
