#include "betr/decontam.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>
#include <unordered_map>

namespace betr {

std::vector<NormalizedToken> normalize_tokens(const std::string& text) {
  std::vector<NormalizedToken> out;
  const std::size_t n = text.size();
  std::size_t i = 0;
  while (i < n) {
    while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t start = i;
    while (i < n && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i == start) continue;
    NormalizedToken tok;
    tok.byte_begin = start;
    tok.byte_end = i;
    for (std::size_t j = start; j < i; ++j) {
      const unsigned char c = static_cast<unsigned char>(text[j]);
      if (std::ispunct(c)) continue;  // strip punctuation
      tok.text.push_back(static_cast<char>(std::tolower(c)));
    }
    if (!tok.text.empty()) out.push_back(std::move(tok));
  }
  return out;
}

namespace {

std::string join_ngram(const std::vector<NormalizedToken>& toks, std::size_t start, int n) {
  std::string key = toks[start].text;
  for (int j = 1; j < n; ++j) {
    key += ' ';
    key += toks[start + static_cast<std::size_t>(j)].text;
  }
  return key;
}

template <typename Fn>
void for_each_window(const std::vector<NormalizedToken>& toks, const DecontamConfig& cfg, Fn fn) {
  for (int n = cfg.ngram_min; n <= cfg.ngram_max; ++n) {
    if (toks.size() < static_cast<std::size_t>(n)) break;
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= toks.size(); ++i)
      fn(i, n);
  }
}

}  // namespace

ContaminationIndex build_index(const std::vector<std::string>& benchmark_texts,
                               const std::vector<Document>& corpus, const DecontamConfig& cfg) {
  if (cfg.ngram_min < 1 || cfg.ngram_min > cfg.ngram_max)
    throw std::invalid_argument("require 1 <= ngram_min <= ngram_max");

  ContaminationIndex index;
  index.cfg_ = cfg;

  std::unordered_set<std::string> candidates;
  for (const auto& text : benchmark_texts) {
    const auto toks = normalize_tokens(text);
    for_each_window(toks, cfg, [&](std::size_t i, int n) { candidates.insert(join_ngram(toks, i, n)); });
  }

  // corpus frequencies, counted only for candidate n-grams
  std::unordered_map<std::string, std::uint64_t> freq;
  for (const auto& doc : corpus) {
    const auto toks = normalize_tokens(doc.text);
    for_each_window(toks, cfg, [&](std::size_t i, int n) {
      auto key = join_ngram(toks, i, n);
      if (candidates.count(key)) ++freq[key];
    });
  }

  for (auto& key : candidates) {
    auto it = freq.find(key);
    if (it != freq.end() && it->second > cfg.common_ngram_skip_count) {
      ++index.skipped_;
    } else {
      index.ngrams_.insert(key);
    }
  }
  return index;
}

std::vector<Document> decontaminate(const Document& doc, const ContaminationIndex& index,
                                    DecontamStats* stats) {
  const DecontamConfig& cfg = index.config();
  if (stats) *stats = {};

  const auto toks = normalize_tokens(doc.text);
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  for_each_window(toks, cfg, [&](std::size_t i, int n) {
    if (!index.contains(join_ngram(toks, i, n))) return;
    const std::size_t radius = static_cast<std::size_t>(cfg.excision_radius_chars);
    const std::size_t begin =
        toks[i].byte_begin > radius ? toks[i].byte_begin - radius : 0;
    const std::size_t end =
        std::min(doc.text.size(), toks[i + static_cast<std::size_t>(n) - 1].byte_end + radius);
    spans.emplace_back(begin, end);
  });

  if (spans.empty()) {
    if (stats) stats->matches = 0;
    return {doc};
  }

  // merge overlapping excisions; split count = number of merged regions
  std::sort(spans.begin(), spans.end());
  std::vector<std::pair<std::size_t, std::size_t>> merged;
  for (const auto& s : spans) {
    if (!merged.empty() && s.first <= merged.back().second) {
      merged.back().second = std::max(merged.back().second, s.second);
    } else {
      merged.push_back(s);
    }
  }

  if (stats) {
    stats->matches = merged.size();
    stats->modified = true;
  }
  if (merged.size() > static_cast<std::size_t>(cfg.max_splits)) {
    if (stats) stats->discarded = true;
    return {};
  }

  std::vector<Document> fragments;
  std::size_t cursor = 0;
  std::size_t k = 0;
  auto emit = [&](std::size_t begin, std::size_t end) {
    if (begin >= end) return;
    Document frag;
    frag.id = doc.id + "#" + std::to_string(k++);
    frag.text = doc.text.substr(begin, end - begin);
    frag.token_count = whitespace_token_count(frag.text);
    frag.source = doc.source;
    fragments.push_back(std::move(frag));
  };
  for (const auto& [begin, end] : merged) {
    emit(cursor, begin);
    cursor = end;
  }
  emit(cursor, doc.text.size());
  return fragments;
}

}  // namespace betr
