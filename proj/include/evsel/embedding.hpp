#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace evsel {

/// Dense embedding vector. All vectors from one provider share a dimension.
class Embedding {
 public:
  Embedding() = default;
  explicit Embedding(std::vector<double> values) : values_(std::move(values)) {}

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double norm() const;

  bool operator==(const Embedding&) const = default;

 private:
  std::vector<double> values_;
};

/// Embedding provider contract. Implementations must be deterministic for
/// a fixed configuration and safe to call from several threads.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual std::string name() const = 0;
  virtual std::size_t dim() const = 0;

  /// Validates inputs, calls the backend, and checks the output shape.
  /// Empty texts are rejected before any transport happens.
  std::vector<Embedding> embed_batch(std::span<const std::string> texts) const;
  Embedding embed(const std::string& text) const;

 protected:
  virtual std::vector<Embedding> do_embed(std::span<const std::string> texts) const = 0;
};

/// Cosine similarity. Zero-norm inputs give 0 and emit a warning;
/// mismatched dimensions throw.
double cosine_similarity(const Embedding& a, const Embedding& b);

/// Component-wise mean of a non-empty list of equal-dimension vectors.
Embedding pool_mean(std::span<const Embedding> vectors);

/// Deterministic test embedder: hashes character n-grams (FNV-1a) into
/// `dim` buckets with a hash-derived sign, then L2-normalizes. Texts with a
/// pinned vector return that vector verbatim.
class MockEmbeddingProvider final : public EmbeddingProvider {
 public:
  struct Options {
    std::size_t dim = 64;
    std::size_t ngram = 3;
  };

  MockEmbeddingProvider();
  explicit MockEmbeddingProvider(Options options);

  /// Pins `text` to an exact vector; its dimension must equal dim().
  void pin(std::string text, std::vector<double> values);
  /// Loads pins from a JSON object {"text": [numbers], ...}.
  void load_pins(const std::filesystem::path& path);

  std::string name() const override;
  std::size_t dim() const override { return options_.dim; }

 protected:
  std::vector<Embedding> do_embed(std::span<const std::string> texts) const override;

 private:
  Embedding hash_embed(const std::string& text) const;

  Options options_;
  std::map<std::string, Embedding> pins_;
};

/// Decorator that stores embeddings in a content-addressed on-disk cache
/// keyed by (provider name, SHA-256 of the text). Each entry is a raw
/// little-endian float64 vector file `<hash>.bin` with a `<hash>.json`
/// sidecar.
class CachedEmbeddingProvider final : public EmbeddingProvider {
 public:
  CachedEmbeddingProvider(std::shared_ptr<const EmbeddingProvider> inner, std::filesystem::path cache_dir);

  std::string name() const override { return inner_->name(); }
  std::size_t dim() const override { return inner_->dim(); }

  std::size_t hits() const;
  std::size_t misses() const;

 protected:
  std::vector<Embedding> do_embed(std::span<const std::string> texts) const override;

 private:
  std::filesystem::path entry_stem(const std::string& text) const;
  std::optional<Embedding> read_entry(const std::string& text) const;
  void write_entry(const std::string& text, const Embedding& e) const;
  std::mutex& lock_for(const std::filesystem::path& stem) const;

  std::shared_ptr<const EmbeddingProvider> inner_;
  std::filesystem::path dir_;
  mutable std::array<std::mutex, 64> stripes_;
  mutable std::mutex stats_mutex_;
  mutable std::size_t hits_ = 0;
  mutable std::size_t misses_ = 0;
};

}  // namespace evsel
