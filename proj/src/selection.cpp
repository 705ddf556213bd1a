#include "betr/selection.hpp"

#include <algorithm>
#include <stdexcept>

namespace betr {

ThresholdCalibration calibrate_threshold(std::vector<ScoredDoc> scored_holdout,
                                         double target_fraction) {
  if (scored_holdout.empty()) throw std::invalid_argument("empty holdout");
  if (!(target_fraction > 0.0 && target_fraction <= 1.0))
    throw std::invalid_argument("target fraction must lie in (0, 1]");

  std::uint64_t total_tokens = 0;
  for (const auto& d : scored_holdout) total_tokens += d.token_count;
  if (total_tokens == 0) throw std::invalid_argument("holdout carries zero tokens");

  std::sort(scored_holdout.begin(), scored_holdout.end(),
            [](const ScoredDoc& a, const ScoredDoc& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.id < b.id;
            });

  ThresholdCalibration cal;
  cal.target_fraction = target_fraction;
  cal.holdout_size = scored_holdout.size();

  std::uint64_t cum = 0;
  for (const auto& d : scored_holdout) {
    cum += d.token_count;
    const double share = static_cast<double>(cum) / static_cast<double>(total_tokens);
    if (share >= target_fraction) {
      cal.threshold = d.score;
      cal.achieved_fraction = share;
      // document granularity can force a large overshoot (e.g. one huge doc);
      // flag anything more than a percentage point past the target
      cal.warning = share - target_fraction > 0.01;
      return cal;
    }
  }
  // target 1.0 exactly, or floating-point slack: keep everything
  cal.threshold = scored_holdout.back().score;
  cal.achieved_fraction = 1.0;
  return cal;
}

}  // namespace betr
