#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace evsel {

/// Stable identity of an evidence chunk. Ordering is lexicographic on
/// (doc_id, chunk_index) and is the tie-break used everywhere.
struct ChunkKey {
  std::string doc_id;
  std::size_t chunk_index = 0;

  auto operator<=>(const ChunkKey&) const = default;
  bool operator==(const ChunkKey&) const = default;

  /// "doc_id#chunk_index", used as a JSON object key in reports.
  std::string str() const;
};

using ChunkKeySet = std::set<ChunkKey>;

struct Document {
  std::string doc_id;
  std::string text;
  std::map<std::string, std::string> metadata;

  bool operator==(const Document&) const = default;
};

struct EvidenceChunk {
  std::string doc_id;
  std::size_t chunk_index = 0;
  std::string text;
  std::size_t token_count = 0;
  std::optional<bool> poison_label;
  // Character span in the source document; absent for injected chunks.
  std::optional<std::size_t> char_start;
  std::optional<std::size_t> char_end;

  ChunkKey key() const { return {doc_id, chunk_index}; }
  bool poisoned() const { return poison_label.value_or(false); }
  bool operator==(const EvidenceChunk&) const = default;
};

/// Character-span gold annotation, resolved to chunk keys after chunking.
struct GoldSpan {
  std::string doc_id;
  std::size_t char_start = 0;
  std::size_t char_end = 0;
  bool operator==(const GoldSpan&) const = default;
};

struct QaInstance {
  std::string query_id;
  std::string query_text;
  ChunkKeySet gold_chunk_keys;
  std::vector<GoldSpan> gold_spans;  // pending until resolve_gold_spans
  std::optional<std::string> gold_answer;
  // Restricts the candidate documents for this query; empty means the
  // whole corpus.
  std::vector<std::string> doc_ids;

  bool operator==(const QaInstance&) const = default;
};

struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// Token-counting contract used by the chunker.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::string name() const = 0;
  /// Byte spans of each token in `text`, in order.
  virtual std::vector<TokenSpan> tokenize(std::string_view text) const = 0;

  std::size_t count(std::string_view text) const { return tokenize(text).size(); }
};

/// Tokens are maximal runs of non-whitespace bytes.
class WhitespaceTokenizer final : public Tokenizer {
 public:
  std::string name() const override { return "whitespace"; }
  std::vector<TokenSpan> tokenize(std::string_view text) const override;
};

struct ChunkOptions {
  std::size_t chunk_size = 512;
  // Fold a trailing remainder shorter than chunk_size / 2 into the previous
  // chunk. Off by default so that token_count <= chunk_size always holds.
  bool merge_short_tail = false;
};

/// Splits a document into consecutive non-overlapping token windows.
std::vector<EvidenceChunk> chunk_document(const Document& doc, const Tokenizer& tokenizer,
                                          const ChunkOptions& options);

/// Chunks every document in order; rejects duplicate doc_ids.
std::vector<EvidenceChunk> chunk_corpus(const std::vector<Document>& docs, const Tokenizer& tokenizer,
                                        const ChunkOptions& options);

/// Replaces every QA instance's character-span golds with the keys of all
/// chunks overlapping the span. Spans naming unknown documents are an error.
void resolve_gold_spans(std::vector<QaInstance>& qa, const std::vector<EvidenceChunk>& chunks);

/// Chunks belonging to the instance's candidate documents (all chunks when
/// the instance names none), in corpus order.
std::vector<EvidenceChunk> candidate_chunks(const QaInstance& qa, const std::vector<EvidenceChunk>& chunks);

/// Lookup table from key to chunk plus per-document chunk counts.
class ChunkIndex {
 public:
  explicit ChunkIndex(const std::vector<EvidenceChunk>& chunks);

  const EvidenceChunk* find(const ChunkKey& key) const;
  bool contains(const ChunkKey& key) const { return find(key) != nullptr; }
  std::size_t doc_chunk_count(const std::string& doc_id) const;

 private:
  std::map<ChunkKey, const EvidenceChunk*> by_key_;
  std::map<std::string, std::size_t> counts_;
};

// JSON-Lines persistence. Loaders throw SchemaError naming the line and
// offending field.
std::vector<Document> load_documents(const std::filesystem::path& path);
void save_documents(const std::vector<Document>& docs, const std::filesystem::path& path);

std::vector<QaInstance> load_qa(const std::filesystem::path& path);
void save_qa(const std::vector<QaInstance>& qa, const std::filesystem::path& path);

std::vector<EvidenceChunk> load_chunks(const std::filesystem::path& path);
void save_chunks(const std::vector<EvidenceChunk>& chunks, const std::filesystem::path& path);

// Same parsers over in-memory text; `source` names the input in errors.
std::vector<Document> parse_documents(std::string_view jsonl, const std::string& source = "<memory>");
std::vector<QaInstance> parse_qa(std::string_view jsonl, const std::string& source = "<memory>");
std::vector<EvidenceChunk> parse_chunks(std::string_view jsonl, const std::string& source = "<memory>");

}  // namespace evsel
