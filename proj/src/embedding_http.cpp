#include "evsel/embedding_http.hpp"

#include <algorithm>
#include <iterator>
#include <optional>

#include "evsel/errors.hpp"

namespace evsel {

HttpEmbeddingProvider::HttpEmbeddingProvider(Options options) : options_(std::move(options)), dim_(options_.dim) {
  if (options_.batch_size == 0) options_.batch_size = 1;
}

std::size_t HttpEmbeddingProvider::dim() const {
  std::lock_guard lock(dim_mutex_);
  return dim_;
}

std::vector<Embedding> HttpEmbeddingProvider::do_embed(std::span<const std::string> texts) const {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (std::size_t start = 0; start < texts.size(); start += options_.batch_size) {
    const std::size_t len = std::min(options_.batch_size, texts.size() - start);
    auto batch = embed_one_batch(texts.subspan(start, len));
    std::move(batch.begin(), batch.end(), std::back_inserter(out));
  }
  return out;
}

std::vector<Embedding> HttpEmbeddingProvider::embed_one_batch(std::span<const std::string> texts) const {
  const nlohmann::json body{{"model", options_.model},
                            {"input", std::vector<std::string>(texts.begin(), texts.end())}};
  const nlohmann::json resp = post_json(options_.endpoint, body, options_.retry, options_.limiter.get());

  const auto data = resp.find("data");
  if (data == resp.end() || !data->is_array()) throw Error(name() + ": response has no 'data' array");
  if (data->size() != texts.size()) {
    throw Error(name() + ": response has " + std::to_string(data->size()) + " embeddings for " +
                std::to_string(texts.size()) + " inputs");
  }

  std::vector<std::optional<Embedding>> slots(texts.size());
  for (std::size_t pos = 0; pos < data->size(); ++pos) {
    const auto& item = (*data)[pos];
    const std::size_t index =
        item.contains("index") ? item.at("index").get<std::size_t>() : pos;
    if (index >= slots.size() || slots[index]) throw Error(name() + ": bad or duplicate index in response");
    const auto emb = item.find("embedding");
    if (emb == item.end() || !emb->is_array()) throw Error(name() + ": response item has no embedding");
    slots[index] = Embedding(emb->get<std::vector<double>>());
  }

  std::vector<Embedding> out;
  out.reserve(slots.size());
  {
    std::lock_guard lock(dim_mutex_);
    for (auto& s : slots) {
      if (dim_ == 0) dim_ = s->dim();
      out.push_back(std::move(*s));
    }
  }
  return out;
}

}  // namespace evsel
