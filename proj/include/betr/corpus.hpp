#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace betr {

struct Document {
  std::string id;
  std::string text;
  std::uint64_t token_count = 0;
  std::optional<std::string> source;
};

enum class Split { Train, Test, Unsplit };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct BenchmarkExample {
  std::string benchmark_id;
  std::string example_id;
  Split split = Split::Unsplit;
  std::string rendered_text;

  std::string key() const { return benchmark_id + "/" + example_id; }
};

// Token counter applied to documents that arrive without a token_count.
using TokenCounter = std::function<std::uint64_t(const std::string&)>;

// Default counter: number of whitespace-separated tokens.
std::uint64_t whitespace_token_count(const std::string& text);

std::vector<std::string> whitespace_tokens(const std::string& text);

class CorpusError : public std::runtime_error {
 public:
  explicit CorpusError(const std::string& msg) : std::runtime_error(msg) {}
};

// Reads a JSONL document file. Every line must hold {"id", "text"} with
// optional "token_count" and "source". Missing token_count is filled from
// `counter`. Duplicate ids and malformed lines raise CorpusError with the
// offending line number.
std::vector<Document> read_documents_jsonl(const std::string& path,
                                           const TokenCounter& counter = whitespace_token_count);

// Streaming variant: invokes `sink` per document in file order.
void for_each_document_jsonl(const std::string& path,
                             const TokenCounter& counter,
                             const std::function<void(Document&&)>& sink);

void write_documents_jsonl(const std::string& path, const std::vector<Document>& docs);

std::string document_to_json_line(const Document& doc);

// Renders a raw benchmark example into embeddable text: fields joined by
// "\n" in their declared order, question first. Empty question is an error.
std::string render_fields(const std::vector<std::pair<std::string, std::string>>& fields);

// Benchmark JSONL: {"benchmark_id", "example_id", "split", "fields": {...}}.
// Field order inside "fields" is preserved as declared in the file.
std::vector<BenchmarkExample> read_benchmarks_jsonl(const std::string& path);

void write_benchmarks_jsonl(const std::string& path, const std::vector<BenchmarkExample>& examples);

}  // namespace betr
