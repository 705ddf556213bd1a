#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace betr {

struct ScoredDoc {
  std::string id;
  double score = 0.0;
  std::uint64_t token_count = 0;
};

struct ThresholdCalibration {
  double target_fraction = 0.0;
  std::size_t holdout_size = 0;
  double threshold = 0.0;
  double achieved_fraction = 0.0;
  std::uint64_t seed = 0;
  bool warning = false;  // set when granularity prevents reaching the target
};

// Sorts the holdout by descending score (ascending-id tie-break), accumulates
// token counts, and picks the score of the last document needed for the
// cumulative token share to first reach the target.
ThresholdCalibration calibrate_threshold(std::vector<ScoredDoc> scored_holdout,
                                         double target_fraction);

struct FilterStats {
  std::size_t docs_seen = 0;
  std::size_t docs_kept = 0;
  std::uint64_t tokens_seen = 0;
  std::uint64_t tokens_kept = 0;

  double token_fraction() const {
    return tokens_seen == 0 ? 0.0 : static_cast<double>(tokens_kept) / static_cast<double>(tokens_seen);
  }
};

// Keep iff score >= threshold; order preserved. `keep` receives kept docs.
template <typename Doc, typename ScoreOf, typename TokensOf, typename Keep>
FilterStats filter_stream(const std::vector<Doc>& docs, ScoreOf score_of, TokensOf tokens_of,
                          double threshold, Keep keep) {
  FilterStats stats;
  for (const auto& d : docs) {
    ++stats.docs_seen;
    stats.tokens_seen += tokens_of(d);
    if (score_of(d) >= threshold) {
      ++stats.docs_kept;
      stats.tokens_kept += tokens_of(d);
      keep(d);
    }
  }
  return stats;
}

}  // namespace betr
