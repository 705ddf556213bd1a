#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace betr {

struct ScorerHyper {
  double lr = 0.03;
  int dim = 128;
  int epochs = 5;
  int min_count = 5;
  int ngram_order = 2;
  std::int64_t bucket_count = 2'000'000;
  int window_size = 10;  // accepted for config fidelity; no effect on bag-of-ngrams training
};

enum class Balancing { DownsampleMajority, None };

struct TrainingExample {
  std::string text;
  bool positive = false;
};

struct TrainingSet {
  std::vector<TrainingExample> examples;
  Balancing balancing = Balancing::DownsampleMajority;
  double holdout_fraction = 0.1;
};

// FNV-1a 64-bit, the fixed feature hash.
std::uint64_t fnv1a64(const std::string& s);

// Hashed bag-of-n-grams linear softmax classifier over {positive, negative}.
class NGramLinearClassifier {
 public:
  using Matrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  NGramLinearClassifier() = default;

  // Feature ids: vocab unigrams in [0, vocab_size), hashed n-grams in
  // [vocab_size, vocab_size + bucket_count).
  std::vector<std::int64_t> featurize(const std::string& text) const;

  double predict(const std::string& text) const;

  double holdout_accuracy() const { return holdout_accuracy_; }
  const ScorerHyper& hyper() const { return hyper_; }
  std::size_t vocab_size() const { return vocab_.size(); }

  void save(const std::string& path) const;
  static NGramLinearClassifier load(const std::string& path);

  friend NGramLinearClassifier train_classifier(const TrainingSet& ts, const ScorerHyper& hyper,
                                                std::uint64_t seed);

 private:
  ScorerHyper hyper_;
  std::unordered_map<std::string, std::int64_t> vocab_;  // token -> unigram id
  Matrix input_weights_;   // (vocab_size + bucket_count) x dim
  Matrix output_weights_;  // 2 x dim, row 0 = positive class
  double holdout_accuracy_ = 0.0;
};

// Balances (if configured), splits off the holdout, then runs single-threaded
// SGD with a linearly decaying learning rate. Deterministic per
// (examples, hyper, seed). Throws if one class is empty after balancing.
NGramLinearClassifier train_classifier(const TrainingSet& ts, const ScorerHyper& hyper,
                                       std::uint64_t seed);

// Downsample-majority balancing as a pure function of (examples, seed):
// keeps all minority examples plus a seeded uniform subset of the majority,
// in original order. Post-balance class counts are equal.
std::vector<TrainingExample> balance_downsample(const std::vector<TrainingExample>& examples,
                                                std::uint64_t seed);

}  // namespace betr
