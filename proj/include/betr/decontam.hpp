#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "betr/corpus.hpp"

namespace betr {

struct DecontamConfig {
  int ngram_min = 8;
  int ngram_max = 13;
  int excision_radius_chars = 200;
  int max_splits = 10;
  std::uint64_t common_ngram_skip_count = 10'000;
};

// Matching normalization: lowercase, punctuation stripped per token, tokens
// joined by single spaces. Excision operates on original byte offsets.
struct NormalizedToken {
  std::string text;          // normalized token
  std::size_t byte_begin = 0;  // span in the original string
  std::size_t byte_end = 0;
};

std::vector<NormalizedToken> normalize_tokens(const std::string& text);

class ContaminationIndex {
 public:
  ContaminationIndex() = default;

  const DecontamConfig& config() const { return cfg_; }
  std::size_t size() const { return ngrams_.size(); }
  bool contains(const std::string& joined_ngram) const { return ngrams_.count(joined_ngram) != 0; }
  std::size_t skip_set_size() const { return skipped_; }

  friend ContaminationIndex build_index(const std::vector<std::string>& benchmark_texts,
                                        const std::vector<Document>& corpus,
                                        const DecontamConfig& cfg);

 private:
  DecontamConfig cfg_;
  std::unordered_set<std::string> ngrams_;
  std::size_t skipped_ = 0;
};

// Benchmark n-grams of length in [min, max], minus those occurring more than
// `common_ngram_skip_count` times in the corpus. Corpus frequencies come from
// one streaming pass counting only candidate benchmark n-grams.
ContaminationIndex build_index(const std::vector<std::string>& benchmark_texts,
                               const std::vector<Document>& corpus, const DecontamConfig& cfg);

struct DecontamStats {
  std::size_t matches = 0;           // merged excised regions
  bool modified = false;
  bool discarded = false;
};

// Excises every indexed n-gram match plus the flanking radius, splitting the
// document at each excision. Documents with more than max_splits excised
// regions are dropped. Fragment ids are parent_id#k.
std::vector<Document> decontaminate(const Document& doc, const ContaminationIndex& index,
                                    DecontamStats* stats = nullptr);

struct DecontamReport {
  std::size_t docs_seen = 0;
  std::size_t docs_modified = 0;
  std::size_t docs_discarded = 0;
  std::size_t total_matches = 0;
};

}  // namespace betr
