#include "betr/corpus.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

namespace betr {

using ordered_json = nlohmann::ordered_json;

std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Test: return "test";
    case Split::Unsplit: return "unsplit";
  }
  return "unsplit";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "test") return Split::Test;
  if (s == "unsplit") return Split::Unsplit;
  throw CorpusError("unknown split: " + s);
}

std::vector<std::string> whitespace_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < n && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

std::uint64_t whitespace_token_count(const std::string& text) {
  std::uint64_t count = 0;
  bool in_token = false;
  for (char c : text) {
    const bool space = std::isspace(static_cast<unsigned char>(c));
    if (!space && !in_token) ++count;
    in_token = !space;
  }
  return count;
}

void for_each_document_jsonl(const std::string& path, const TokenCounter& counter,
                             const std::function<void(Document&&)>& sink) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open " + path);
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const std::exception& e) {
      throw CorpusError(path + ":" + std::to_string(lineno) + ": malformed JSON: " + e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j.contains("text"))
      throw CorpusError(path + ":" + std::to_string(lineno) + ": missing id or text");
    Document doc;
    doc.id = j.at("id").get<std::string>();
    doc.text = j.at("text").get<std::string>();
    if (!seen.insert(doc.id).second)
      throw CorpusError(path + ":" + std::to_string(lineno) + ": duplicate id \"" + doc.id + "\"");
    if (j.contains("token_count")) {
      doc.token_count = j.at("token_count").get<std::uint64_t>();
    } else if (counter) {
      doc.token_count = counter(doc.text);
    }
    if (j.contains("source") && !j.at("source").is_null())
      doc.source = j.at("source").get<std::string>();
    sink(std::move(doc));
  }
}

std::vector<Document> read_documents_jsonl(const std::string& path, const TokenCounter& counter) {
  std::vector<Document> docs;
  for_each_document_jsonl(path, counter, [&](Document&& d) { docs.push_back(std::move(d)); });
  return docs;
}

std::string document_to_json_line(const Document& doc) {
  ordered_json j;
  j["id"] = doc.id;
  j["text"] = doc.text;
  j["token_count"] = doc.token_count;
  if (doc.source) j["source"] = *doc.source;
  return j.dump();
}

void write_documents_jsonl(const std::string& path, const std::vector<Document>& docs) {
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot write " + path);
  for (const auto& d : docs) out << document_to_json_line(d) << '\n';
}

std::string render_fields(const std::vector<std::pair<std::string, std::string>>& fields) {
  if (fields.empty() || fields.front().second.empty())
    throw CorpusError("benchmark example has an empty question/prompt field");
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += '\n';
    out += fields[i].second;
  }
  return out;
}

std::vector<BenchmarkExample> read_benchmarks_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open " + path);
  std::vector<BenchmarkExample> out;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const std::exception& e) {
      throw CorpusError(path + ":" + std::to_string(lineno) + ": malformed JSON: " + e.what());
    }
    BenchmarkExample ex;
    ex.benchmark_id = j.at("benchmark_id").get<std::string>();
    ex.example_id = j.at("example_id").get<std::string>();
    ex.split = j.contains("split") ? split_from_string(j.at("split").get<std::string>())
                                   : Split::Unsplit;
    if (!seen.insert(ex.key()).second)
      throw CorpusError(path + ":" + std::to_string(lineno) + ": duplicate example " + ex.key());
    if (j.contains("rendered_text")) {
      ex.rendered_text = j.at("rendered_text").get<std::string>();
    } else {
      std::vector<std::pair<std::string, std::string>> fields;
      for (const auto& [k, v] : j.at("fields").items())
        fields.emplace_back(k, v.get<std::string>());
      ex.rendered_text = render_fields(fields);
    }
    if (ex.rendered_text.empty())
      throw CorpusError(path + ":" + std::to_string(lineno) + ": empty rendered_text");
    out.push_back(std::move(ex));
  }
  return out;
}

void write_benchmarks_jsonl(const std::string& path, const std::vector<BenchmarkExample>& examples) {
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot write " + path);
  for (const auto& ex : examples) {
    ordered_json j;
    j["benchmark_id"] = ex.benchmark_id;
    j["example_id"] = ex.example_id;
    j["split"] = to_string(ex.split);
    j["rendered_text"] = ex.rendered_text;
    out << j.dump() << '\n';
  }
}

}  // namespace betr
