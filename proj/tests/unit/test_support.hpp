#pragma once

#include <filesystem>
#include <functional>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "evsel/corpus.hpp"
#include "evsel/embedding.hpp"
#include "evsel/llm.hpp"

namespace evsel::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng{std::random_device{}()};
    path_ = std::filesystem::temp_directory_path() / ("evsel-test-" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::filesystem::path test_data(const std::string& rel) { return std::filesystem::path(EVSEL_TEST_DATA) / rel; }

/// "w0 w1 ... w{n-1}"
inline std::string words(std::size_t n, const std::string& prefix = "w") {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) out += ' ';
    out += prefix + std::to_string(i);
  }
  return out;
}

inline EvidenceChunk chunk(std::string doc, std::size_t index, std::string text = {}) {
  EvidenceChunk c;
  c.doc_id = std::move(doc);
  c.chunk_index = index;
  c.text = text.empty() ? c.doc_id + "#" + std::to_string(index) : std::move(text);
  c.token_count = 1;
  return c;
}

/// Mock embedder with every chunk text pinned to the given vector.
inline MockEmbeddingProvider pinned(std::size_t dim,
                                    const std::vector<std::pair<std::string, std::vector<double>>>& pins) {
  MockEmbeddingProvider p({dim, 3});
  for (const auto& [text, v] : pins) p.pin(text, v);
  return p;
}

/// Chat provider answering through a callback; records every request.
class FunctionChatProvider final : public ChatProvider {
 public:
  using Fn = std::function<std::string(const ChatRequest&)>;
  explicit FunctionChatProvider(Fn fn) : fn_(std::move(fn)) {}
  std::string name() const override { return "function"; }
  std::vector<ChatRequest> requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
  }

 protected:
  std::string do_complete(const ChatRequest& request) const override {
    {
      std::lock_guard lock(mutex_);
      requests_.push_back(request);
    }
    return fn_(request);
  }

 private:
  Fn fn_;
  mutable std::mutex mutex_;
  mutable std::vector<ChatRequest> requests_;
};

/// Text of the chunk embedded in a verifier prompt built from the default
/// template.
inline std::string verified_chunk_text(const ChatRequest& request) {
  const std::string marker = "- Chunk to Verify:\n";
  const auto start = request.user_prompt.find(marker);
  if (start == std::string::npos) return {};
  const auto begin = start + marker.size();
  const auto end = request.user_prompt.find("\n\nInstructions:", begin);
  return request.user_prompt.substr(begin, end - begin);
}

}  // namespace evsel::testing
