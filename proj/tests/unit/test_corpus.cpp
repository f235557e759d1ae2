#include <random>

#include "doctest.h"
#include "evsel/corpus.hpp"
#include "evsel/errors.hpp"
#include "evsel/log.hpp"
#include "test_support.hpp"

using namespace evsel;
using evsel::testing::TempDir;
using evsel::testing::words;

namespace {

const WhitespaceTokenizer tok;

std::vector<std::string> tokens_of(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& s : tok.tokenize(text)) out.emplace_back(text.substr(s.begin, s.end - s.begin));
  return out;
}

}  // namespace

TEST_CASE("whitespace tokenizer spans") {
  const std::string text = "  alpha\tbeta\n\ngamma ";
  const auto spans = tok.tokenize(text);
  REQUIRE(spans.size() == 3);
  CHECK(text.substr(spans[0].begin, spans[0].end - spans[0].begin) == "alpha");
  CHECK(text.substr(spans[2].begin, spans[2].end - spans[2].begin) == "gamma");
  CHECK(tok.count("") == 0);
  CHECK(tok.count("   ") == 0);
}

TEST_CASE("chunk_document splits into fixed windows") {
  SUBCASE("exact division") {
    const auto chunks = chunk_document({"d", words(1024), {}}, tok, {512});
    REQUIRE(chunks.size() == 2);
    CHECK(chunks[0].token_count == 512);
    CHECK(chunks[1].token_count == 512);
    CHECK(chunks[0].chunk_index == 0);
    CHECK(chunks[1].chunk_index == 1);
  }
  SUBCASE("short document") {
    const auto chunks = chunk_document({"d", words(5), {}}, tok, {512});
    REQUIRE(chunks.size() == 1);
    CHECK(chunks[0].token_count == 5);
    CHECK(chunks[0].text == words(5));
  }
  SUBCASE("remainder chunk") {
    const auto chunks = chunk_document({"d", words(25), {}}, tok, {10});
    REQUIRE(chunks.size() == 3);
    CHECK(chunks[2].token_count == 5);
  }
  SUBCASE("text is the source substring") {
    const Document doc{"d", "a  b\tc\nd e", {}};
    const auto chunks = chunk_document(doc, tok, {2});
    REQUIRE(chunks.size() == 3);
    CHECK(chunks[0].text == "a  b");
    CHECK(chunks[1].text == "c\nd");
    CHECK(chunks[2].text == "e");
    for (const auto& c : chunks) CHECK(doc.text.substr(*c.char_start, *c.char_end - *c.char_start) == c.text);
  }
}

TEST_CASE("chunk_document rejects bad input") {
  CHECK_THROWS_AS(chunk_document({"empty", "   ", {}}, tok, {8}), Error);
  CHECK_THROWS_WITH_AS(chunk_document({"empty", "", {}}, tok, {8}), doctest::Contains("empty"), Error);
  CHECK_THROWS_AS(chunk_document({"d", "a b", {}}, tok, {0}), Error);
}

TEST_CASE("merge_short_tail folds a short remainder") {
  const auto merged = chunk_document({"d", words(23), {}}, tok, {10, true});
  REQUIRE(merged.size() == 2);
  CHECK(merged[1].token_count == 13);
  const auto kept = chunk_document({"d", words(26), {}}, tok, {10, true});
  CHECK(kept.size() == 3);
}

TEST_CASE("chunking round-trip property") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 700;
    std::string text;
    for (std::size_t i = 0; i < n; ++i) {
      text += std::string(1 + rng() % 3, " \t\n"[rng() % 3]);
      text += "t" + std::to_string(rng() % 1000);
    }
    const std::size_t size = std::array<std::size_t, 4>{128, 256, 512, 1 + rng() % 50}[trial % 4];
    const auto chunks = chunk_document({"d", text, {}}, tok, {size});
    std::vector<std::string> joined;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      CHECK(chunks[i].chunk_index == i);
      CHECK(chunks[i].token_count <= size);
      CHECK(chunks[i].token_count > 0);
      if (i + 1 < chunks.size()) CHECK(chunks[i].token_count == size);
      for (auto& t : tokens_of(chunks[i].text)) joined.push_back(std::move(t));
    }
    CHECK(joined == tokens_of(text));
  }
}

TEST_CASE("chunk_corpus rejects duplicate doc ids") {
  CHECK_THROWS_AS(chunk_corpus({{"a", "x", {}}, {"a", "y", {}}}, tok, {4}), Error);
  CHECK(chunk_corpus({{"a", "x", {}}, {"b", "y", {}}}, tok, {4}).size() == 2);
}

TEST_CASE("gold spans resolve to overlapping chunks") {
  const auto chunks = chunk_document({"d", "aa bb cc dd ee ff", {}}, tok, {2});
  // chunks: "aa bb" [0,5), "cc dd" [6,11), "ee ff" [12,17)
  std::vector<QaInstance> qa(1);
  qa[0].query_id = "q";
  qa[0].gold_spans = {{"d", 3, 8}};
  resolve_gold_spans(qa, chunks);
  CHECK(qa[0].gold_chunk_keys == ChunkKeySet{{"d", 0}, {"d", 1}});
  CHECK(qa[0].gold_spans.empty());

  std::vector<QaInstance> gap(1);
  gap[0].gold_spans = {{"d", 5, 6}};
  ScopedWarningCapture warnings;
  resolve_gold_spans(gap, chunks);
  CHECK(gap[0].gold_chunk_keys.empty());
  CHECK(warnings.contains("overlaps no chunk"));

  std::vector<QaInstance> unknown(1);
  unknown[0].gold_spans = {{"zz", 0, 1}};
  CHECK_THROWS_AS(resolve_gold_spans(unknown, chunks), Error);
}

TEST_CASE("candidate_chunks filters by document") {
  const std::vector<EvidenceChunk> all{evsel::testing::chunk("a", 0), evsel::testing::chunk("b", 0),
                                       evsel::testing::chunk("a", 1)};
  QaInstance q;
  CHECK(candidate_chunks(q, all).size() == 3);
  q.doc_ids = {"a"};
  const auto only_a = candidate_chunks(q, all);
  REQUIRE(only_a.size() == 2);
  CHECK(only_a[1].key() == ChunkKey{"a", 1});
}

TEST_CASE("chunk index lookups") {
  const std::vector<EvidenceChunk> all{evsel::testing::chunk("a", 0), evsel::testing::chunk("a", 1),
                                       evsel::testing::chunk("b", 0)};
  const ChunkIndex index(all);
  CHECK(index.contains({"a", 1}));
  CHECK_FALSE(index.contains({"a", 2}));
  CHECK(index.find({"b", 0})->text == "b#0");
  CHECK(index.doc_chunk_count("a") == 2);
  CHECK(index.doc_chunk_count("zz") == 0);
}

TEST_CASE("chunk keys order lexicographically") {
  CHECK(ChunkKey{"a", 9} < ChunkKey{"b", 0});
  CHECK(ChunkKey{"a", 1} < ChunkKey{"a", 2});
  CHECK(ChunkKey{"doc", 3}.str() == "doc#3");
}

TEST_CASE("document loading") {
  const auto docs = parse_documents(R"({"doc_id": "d1", "text": "hello"})");
  REQUIRE(docs.size() == 1);
  CHECK(docs[0].doc_id == "d1");

  try {
    parse_documents(R"({"doc_id": "d1"})", "docs.jsonl");
    FAIL("expected a schema error");
  } catch (const SchemaError& e) {
    CHECK(e.line() == 1);
    CHECK(e.field() == "text");
    CHECK(e.source() == "docs.jsonl");
  }
  try {
    parse_documents("{\"doc_id\": \"a\", \"text\": \"x\"}\n\nnot json\n");
    FAIL("expected a schema error");
  } catch (const SchemaError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(parse_documents(R"({"doc_id": 3, "text": "x"})"), SchemaError);
}

TEST_CASE("qa loading") {
  const auto qa = parse_qa(
      R"({"query_id": "q1", "query_text": "what?", "gold": [], "gold_answer": "x"})"
      "\n"
      R"({"query_id": "q2", "query_text": "why?", "gold": [{"doc_id": "d", "chunk_index": 2}, {"doc_id": "d", "char_start": 0, "char_end": 4}], "doc_ids": ["d"]})");
  REQUIRE(qa.size() == 2);
  CHECK(qa[0].gold_chunk_keys.empty());
  CHECK(qa[0].gold_answer == "x");
  CHECK(qa[1].gold_chunk_keys == ChunkKeySet{{"d", 2}});
  CHECK(qa[1].gold_spans == std::vector<GoldSpan>{{"d", 0, 4}});
  CHECK(qa[1].doc_ids == std::vector<std::string>{"d"});

  try {
    parse_qa(R"({"query_id": "q", "query_text": "t", "gold": [{"chunk_index": 1}]})");
    FAIL("expected a schema error");
  } catch (const SchemaError& e) {
    CHECK(e.field() == "gold[0].doc_id");
  }
}

TEST_CASE("jsonl round trips") {
  TempDir dir;
  const auto chunks = chunk_corpus({{"a", words(7), {}}, {"b", "x y", {}}}, tok, {3});
  save_chunks(chunks, dir / "c.jsonl");
  CHECK(load_chunks(dir / "c.jsonl") == chunks);

  std::vector<QaInstance> qa(1);
  qa[0].query_id = "q";
  qa[0].query_text = "t";
  qa[0].gold_chunk_keys = {{"a", 1}};
  qa[0].doc_ids = {"a", "b"};
  save_qa(qa, dir / "q.jsonl");
  CHECK(load_qa(dir / "q.jsonl") == qa);

  const std::vector<Document> docs{{"a", "text", {{"source", "s"}}}};
  save_documents(docs, dir / "d.jsonl");
  CHECK(load_documents(dir / "d.jsonl") == docs);
  CHECK_THROWS_AS(load_documents(dir / "missing.jsonl"), Error);
}
