#pragma once

#include <memory>
#include <string>

#include "evsel/embedding.hpp"
#include "evsel/http.hpp"

namespace evsel {

/// Client for an OpenAI-compatible embedding endpoint:
/// request {"model", "input": [...]}, response {"data": [{"index", "embedding"}]}.
class HttpEmbeddingProvider final : public EmbeddingProvider {
 public:
  struct Options {
    HttpEndpoint endpoint;
    std::string model;
    std::size_t dim = 0;  // expected dimension; 0 accepts the first response's
    std::size_t batch_size = 64;
    RetryPolicy retry;
    std::shared_ptr<RateLimiter> limiter;
  };

  explicit HttpEmbeddingProvider(Options options);

  std::string name() const override { return "http:" + options_.model; }
  std::size_t dim() const override;

 protected:
  std::vector<Embedding> do_embed(std::span<const std::string> texts) const override;

 private:
  std::vector<Embedding> embed_one_batch(std::span<const std::string> texts) const;

  Options options_;
  mutable std::mutex dim_mutex_;
  mutable std::size_t dim_ = 0;
};

}  // namespace evsel
