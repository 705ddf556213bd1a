#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "betr/corpus.hpp"
#include "betr/sampling.hpp"
#include "temp_path.hpp"

using namespace betr;
using betr_test::TempFile;

TEST_CASE("ingest preserves file order and identity") {
  TempFile f(R"({"id":"a","text":"one","token_count":1}
{"id":"b","text":"two words","token_count":2}
{"id":"c","text":"x","token_count":1}
)");
  auto docs = read_documents_jsonl(f.path);
  REQUIRE(docs.size() == 3);
  CHECK(docs[0].id == "a");
  CHECK(docs[1].id == "b");
  CHECK(docs[2].id == "c");
}

TEST_CASE("missing token_count filled by whitespace counter") {
  TempFile f(R"({"id":"a","text":"a b c"}
)");
  auto docs = read_documents_jsonl(f.path);
  CHECK(docs[0].token_count == 3);
}

TEST_CASE("duplicate id rejected with line number") {
  TempFile f(R"({"id":"x","text":"1"}
{"id":"x","text":"2"}
)");
  CHECK_THROWS_WITH_AS(read_documents_jsonl(f.path),
                       doctest::Contains(":2: duplicate id \"x\""), CorpusError);
}

TEST_CASE("malformed line names its line number") {
  TempFile f("{\"id\":\"a\",\"text\":\"ok\"}\nnot json\n");
  CHECK_THROWS_AS(read_documents_jsonl(f.path), CorpusError);
}

TEST_CASE("ingest then serialize round-trips byte-identically") {
  const std::string body =
      "{\"id\":\"a\",\"text\":\"hello world\",\"token_count\":2}\n"
      "{\"id\":\"b\",\"text\":\"x y z\",\"token_count\":3,\"source\":\"web\"}\n";
  TempFile f(body);
  auto docs = read_documents_jsonl(f.path);
  std::string round;
  for (const auto& d : docs) round += document_to_json_line(d) + "\n";
  CHECK(round == body);
}

TEST_CASE("render_fields concatenates in schema order") {
  CHECK(render_fields({{"q", "Q?"}, {"a", "A"}}) == "Q?\nA");
  CHECK(render_fields({{"q", "Q?"}, {"a", "A"}, {"support", "S"}}) == "Q?\nA\nS");
  CHECK_THROWS_AS(render_fields({{"q", ""}}), CorpusError);
}

TEST_CASE("whitespace token count") {
  CHECK(whitespace_token_count("a b c") == 3);
  CHECK(whitespace_token_count("  a\t\nb ") == 2);
  CHECK(whitespace_token_count("") == 0);
}

TEST_CASE("exhaustive sample returns the whole pool") {
  std::vector<std::string> ids{"a", "b", "c", "d", "e"};
  auto m = sample_ids(ids, 5, 123);
  CHECK(m.sampled_ids.size() == 5);
  auto sorted = m.sampled_ids;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == ids);
}

TEST_CASE("sampling is deterministic per (seed, order)") {
  std::vector<std::string> ids;
  for (int i = 0; i < 100000; ++i) ids.push_back("doc" + std::to_string(i));
  auto m1 = sample_ids(ids, 10000, 42);
  auto m2 = sample_ids(ids, 10000, 42);
  CHECK(m1.sampled_ids == m2.sampled_ids);
  auto m3 = sample_ids(ids, 10000, 43);
  CHECK(m1.sampled_ids != m3.sampled_ids);
}

TEST_CASE("oversampling is an error") {
  std::vector<std::string> ids{"a", "b", "c"};
  CHECK_THROWS_AS(sample_ids(ids, 4, 0), std::invalid_argument);
}

TEST_CASE("reservoir sampling is uniform over seeds") {
  // 100-doc pool, n=10: each doc's inclusion rate should be 0.1 within 3 sigma
  std::vector<std::string> ids;
  for (int i = 0; i < 100; ++i) ids.push_back("d" + std::to_string(i));
  const int trials = 10000;
  std::vector<int> hits(100, 0);
  for (int s = 0; s < trials; ++s) {
    auto m = sample_ids(ids, 10, static_cast<std::uint64_t>(s));
    for (const auto& id : m.sampled_ids) ++hits[std::stoul(id.substr(1))];
  }
  const double p = 0.1;
  const double sigma = std::sqrt(p * (1 - p) / trials);
  for (int i = 0; i < 100; ++i) {
    const double freq = static_cast<double>(hits[i]) / trials;
    CHECK(std::abs(freq - p) <= 3 * sigma + 1e-12);
  }
}
