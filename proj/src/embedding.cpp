#include "evsel/embedding.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>

#include "evsel/digest.hpp"
#include "evsel/errors.hpp"
#include "evsel/log.hpp"
#include "jsonl.hpp"

namespace evsel {

double Embedding::norm() const {
  double sum = 0.0;
  for (double v : values_) sum += v * v;
  return std::sqrt(sum);
}

std::vector<Embedding> EmbeddingProvider::embed_batch(std::span<const std::string> texts) const {
  if (texts.empty()) throw Error("embed_batch: no texts");
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (texts[i].empty()) throw Error("embed_batch: text " + std::to_string(i) + " is empty");
  }
  auto out = do_embed(texts);
  if (out.size() != texts.size()) {
    throw Error(name() + ": returned " + std::to_string(out.size()) + " embeddings for " +
                std::to_string(texts.size()) + " inputs");
  }
  const std::size_t expected = dim();
  for (const auto& e : out) {
    if (e.dim() != expected) {
      throw Error(name() + ": embedding has dimension " + std::to_string(e.dim()) + ", expected " +
                  std::to_string(expected));
    }
    for (double v : e.values()) {
      if (!std::isfinite(v)) throw Error(name() + ": non-finite embedding component");
    }
  }
  return out;
}

Embedding EmbeddingProvider::embed(const std::string& text) const {
  return std::move(embed_batch(std::span<const std::string>(&text, 1)).front());
}

double cosine_similarity(const Embedding& a, const Embedding& b) {
  if (a.dim() != b.dim()) {
    throw Error("cosine_similarity: dimension mismatch (" + std::to_string(a.dim()) + " vs " +
                std::to_string(b.dim()) + ")");
  }
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    warn("cosine_similarity: zero-norm vector, similarity defined as 0");
    return 0.0;
  }
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

Embedding pool_mean(std::span<const Embedding> vectors) {
  if (vectors.empty()) throw Error("pool_mean: empty input");
  const std::size_t dim = vectors.front().dim();
  std::vector<double> sum(dim, 0.0);
  for (const auto& v : vectors) {
    if (v.dim() != dim) throw Error("pool_mean: mixed dimensions");
    for (std::size_t i = 0; i < dim; ++i) sum[i] += v[i];
  }
  const double n = static_cast<double>(vectors.size());
  for (double& x : sum) x /= n;
  return Embedding(std::move(sum));
}

// ---------------------------------------------------------------------------
// Mock provider

namespace {

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

MockEmbeddingProvider::MockEmbeddingProvider() : MockEmbeddingProvider(Options{}) {}

MockEmbeddingProvider::MockEmbeddingProvider(Options options) : options_(options) {
  if (options_.dim == 0) throw Error("mock embedder: dim must be positive");
  if (options_.ngram == 0) throw Error("mock embedder: ngram must be positive");
}

void MockEmbeddingProvider::pin(std::string text, std::vector<double> values) {
  if (values.size() != options_.dim) {
    throw Error("mock embedder: pinned vector for '" + text + "' has dimension " + std::to_string(values.size()) +
                ", expected " + std::to_string(options_.dim));
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw Error("mock embedder: non-finite pinned component for '" + text + "'");
  }
  pins_.insert_or_assign(std::move(text), Embedding(std::move(values)));
}

void MockEmbeddingProvider::load_pins(const std::filesystem::path& path) {
  const auto doc = detail::json::parse(detail::read_file(path));
  if (!doc.is_object()) throw Error(path.string() + ": pins must be a JSON object");
  for (const auto& [text, vec] : doc.items()) {
    if (!vec.is_array()) throw Error(path.string() + ": pin '" + text + "' must be an array");
    pin(text, vec.get<std::vector<double>>());
  }
}

std::string MockEmbeddingProvider::name() const {
  std::string n = "mock-d" + std::to_string(options_.dim) + "-n" + std::to_string(options_.ngram);
  if (!pins_.empty()) {
    std::string all;
    for (const auto& [text, e] : pins_) {
      all += text;
      all += '\x1f';
      for (double v : e.values()) all += std::to_string(v) + ",";
      all += '\x1e';
    }
    n += "-pins" + sha256_hex(all).substr(0, 12);
  }
  return n;
}

Embedding MockEmbeddingProvider::hash_embed(const std::string& text) const {
  std::vector<double> v(options_.dim, 0.0);
  const std::size_t n = std::min(options_.ngram, text.size());
  const std::string_view sv(text);
  for (std::size_t i = 0; i + n <= sv.size(); ++i) {
    const std::uint64_t h = fnv1a64(sv.substr(i, n));
    const double sign = (h >> 63) != 0 ? -1.0 : 1.0;
    v[h % options_.dim] += sign;
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
  }
  return Embedding(std::move(v));
}

std::vector<Embedding> MockEmbeddingProvider::do_embed(std::span<const std::string> texts) const {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    auto it = pins_.find(t);
    out.push_back(it != pins_.end() ? it->second : hash_embed(t));
  }
  return out;
}

// ---------------------------------------------------------------------------
// On-disk cache

namespace {

std::string safe_dir_name(std::string_view name) {
  std::string out;
  for (char c : name) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '-' || c == '_' || c == '.';
    out.push_back(ok ? c : '_');
  }
  return out;
}

}  // namespace

CachedEmbeddingProvider::CachedEmbeddingProvider(std::shared_ptr<const EmbeddingProvider> inner,
                                                 std::filesystem::path cache_dir)
    : inner_(std::move(inner)), dir_(std::move(cache_dir)) {
  if (!inner_) throw Error("cached embedder: null inner provider");
  std::filesystem::create_directories(dir_ / safe_dir_name(inner_->name()));
}

std::filesystem::path CachedEmbeddingProvider::entry_stem(const std::string& text) const {
  return dir_ / safe_dir_name(inner_->name()) / sha256_hex(text);
}

std::mutex& CachedEmbeddingProvider::lock_for(const std::filesystem::path& stem) const {
  return stripes_[std::hash<std::string>{}(stem.filename().string()) % stripes_.size()];
}

std::optional<Embedding> CachedEmbeddingProvider::read_entry(const std::string& text) const {
  const auto stem = entry_stem(text);
  auto bin = stem;
  bin += ".bin";
  std::lock_guard lock(lock_for(stem));
  std::ifstream in(bin, std::ios::binary);
  if (!in) return std::nullopt;
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() != inner_->dim() * sizeof(double)) {
    warn("embedding cache: ignoring malformed entry " + bin.string());
    return std::nullopt;
  }
  std::vector<double> values(inner_->dim());
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t raw;
    std::memcpy(&raw, bytes.data() + i * sizeof(double), sizeof(raw));
    if constexpr (std::endian::native == std::endian::big) raw = __builtin_bswap64(raw);
    values[i] = std::bit_cast<double>(raw);
  }
  return Embedding(std::move(values));
}

void CachedEmbeddingProvider::write_entry(const std::string& text, const Embedding& e) const {
  const auto stem = entry_stem(text);
  std::string bytes(e.dim() * sizeof(double), '\0');
  for (std::size_t i = 0; i < e.dim(); ++i) {
    auto raw = std::bit_cast<std::uint64_t>(e[i]);
    if constexpr (std::endian::native == std::endian::big) raw = __builtin_bswap64(raw);
    std::memcpy(bytes.data() + i * sizeof(double), &raw, sizeof(raw));
  }
  const detail::json sidecar{{"provider", inner_->name()},
                             {"dim", e.dim()},
                             {"content_sha256", stem.filename().string()},
                             {"format", "float64-le"}};
  auto json_path = stem;
  json_path += ".json";
  auto bin_path = stem;
  bin_path += ".bin";
  std::lock_guard lock(lock_for(stem));
  detail::write_file(json_path, sidecar.dump(2) + "\n");
  detail::write_file(bin_path, bytes);
}

std::vector<Embedding> CachedEmbeddingProvider::do_embed(std::span<const std::string> texts) const {
  std::vector<std::optional<Embedding>> found(texts.size());
  std::vector<std::string> missing;
  std::map<std::string, std::size_t> missing_slot;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    found[i] = read_entry(texts[i]);
    if (!found[i] && !missing_slot.contains(texts[i])) {
      missing_slot.emplace(texts[i], missing.size());
      missing.push_back(texts[i]);
    }
  }
  std::vector<Embedding> fresh;
  if (!missing.empty()) {
    fresh = inner_->embed_batch(missing);
    for (std::size_t i = 0; i < missing.size(); ++i) write_entry(missing[i], fresh[i]);
  }
  std::size_t hits = 0;
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (found[i]) {
      ++hits;
      out.push_back(std::move(*found[i]));
    } else {
      out.push_back(fresh[missing_slot.at(texts[i])]);
    }
  }
  std::lock_guard lock(stats_mutex_);
  hits_ += hits;
  misses_ += texts.size() - hits;
  return out;
}

std::size_t CachedEmbeddingProvider::hits() const {
  std::lock_guard lock(stats_mutex_);
  return hits_;
}

std::size_t CachedEmbeddingProvider::misses() const {
  std::lock_guard lock(stats_mutex_);
  return misses_;
}

}  // namespace evsel
