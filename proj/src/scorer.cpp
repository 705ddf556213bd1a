#include "betr/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "betr/corpus.hpp"
#include "betr/rng.hpp"

namespace betr {

namespace {
constexpr char kMagic[8] = {'B', 'E', 'T', 'R', 'N', 'G', 'C', '1'};

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}
}  // namespace

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<std::int64_t> NGramLinearClassifier::featurize(const std::string& text) const {
  std::vector<std::int64_t> features;
  const auto tokens = whitespace_tokens(text);
  // retained unigrams (tokens below min_count were dropped from the vocab)
  std::vector<const std::string*> retained;
  for (const auto& tok : tokens) {
    auto it = vocab_.find(tok);
    if (it == vocab_.end()) continue;
    features.push_back(it->second);
    retained.push_back(&tok);
  }
  const std::int64_t base = static_cast<std::int64_t>(vocab_.size());
  for (int n = 2; n <= hyper_.ngram_order; ++n) {
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= retained.size(); ++i) {
      std::string joined = *retained[i];
      for (int j = 1; j < n; ++j) {
        joined += ' ';
        joined += *retained[i + static_cast<std::size_t>(j)];
      }
      features.push_back(base + static_cast<std::int64_t>(
                                    fnv1a64(joined) %
                                    static_cast<std::uint64_t>(hyper_.bucket_count)));
    }
  }
  return features;
}

double NGramLinearClassifier::predict(const std::string& text) const {
  const auto features = featurize(text);
  if (features.empty() || input_weights_.rows() == 0) return 0.5;
  Eigen::VectorXf hidden = Eigen::VectorXf::Zero(hyper_.dim);
  for (std::int64_t f : features) hidden += input_weights_.row(f).transpose();
  hidden /= static_cast<float>(features.size());
  const Eigen::Vector2f logits = output_weights_ * hidden;
  const float mx = logits.maxCoeff();
  const float e0 = std::exp(logits(0) - mx);
  const float e1 = std::exp(logits(1) - mx);
  return static_cast<double>(e0 / (e0 + e1));
}

std::vector<TrainingExample> balance_downsample(const std::vector<TrainingExample>& examples,
                                                std::uint64_t seed) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < examples.size(); ++i)
    (examples[i].positive ? pos : neg).push_back(i);
  auto& minority = pos.size() <= neg.size() ? pos : neg;
  auto& majority = pos.size() <= neg.size() ? neg : pos;
  std::vector<std::size_t> kept_major = majority;
  Rng rng(seed);
  rng.shuffle(kept_major);
  kept_major.resize(minority.size());
  std::vector<std::size_t> kept = minority;
  kept.insert(kept.end(), kept_major.begin(), kept_major.end());
  std::sort(kept.begin(), kept.end());  // original order
  std::vector<TrainingExample> out;
  out.reserve(kept.size());
  for (std::size_t i : kept) out.push_back(examples[i]);
  return out;
}

NGramLinearClassifier train_classifier(const TrainingSet& ts, const ScorerHyper& hyper,
                                       std::uint64_t seed) {
  std::vector<TrainingExample> examples = ts.balancing == Balancing::DownsampleMajority
                                              ? balance_downsample(ts.examples, seed)
                                              : ts.examples;
  if (examples.empty()) throw std::invalid_argument("empty training set");

  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  const std::size_t holdout_n =
      static_cast<std::size_t>(std::llround(ts.holdout_fraction * static_cast<double>(order.size())));
  std::vector<std::size_t> holdout(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(holdout_n));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(holdout_n), order.end());

  bool has_pos = false, has_neg = false;
  for (std::size_t i : train) (examples[i].positive ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg)
    throw std::invalid_argument("training set must contain both classes after balancing/split");

  NGramLinearClassifier model;
  model.hyper_ = hyper;

  // vocab: tokens with count >= min_count, ids in first-seen order
  {
    std::unordered_map<std::string, std::int64_t> counts;
    std::vector<std::string> first_seen;
    for (std::size_t i : train) {
      for (const auto& tok : whitespace_tokens(examples[i].text)) {
        if (counts[tok]++ == 0) first_seen.push_back(tok);
      }
    }
    std::int64_t next_id = 0;
    for (const auto& tok : first_seen)
      if (counts[tok] >= hyper.min_count) model.vocab_.emplace(tok, next_id++);
  }

  const Eigen::Index rows =
      static_cast<Eigen::Index>(model.vocab_.size()) + static_cast<Eigen::Index>(hyper.bucket_count);
  model.input_weights_.resize(rows, hyper.dim);
  {
    const float bound = 1.0f / static_cast<float>(hyper.dim);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (int c = 0; c < hyper.dim; ++c)
        model.input_weights_(r, c) = static_cast<float>(rng.next_double() * 2.0 - 1.0) * bound;
  }
  model.output_weights_ = NGramLinearClassifier::Matrix::Zero(2, hyper.dim);

  // single-threaded SGD, learning rate decaying linearly to zero
  const std::size_t total_steps = static_cast<std::size_t>(hyper.epochs) * train.size();
  std::size_t step = 0;
  Eigen::VectorXf hidden(hyper.dim), grad_hidden(hyper.dim);
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    rng.shuffle(train);
    for (std::size_t i : train) {
      const double lr = hyper.lr * (1.0 - static_cast<double>(step) / static_cast<double>(total_steps));
      ++step;
      const auto features = model.featurize(examples[i].text);
      if (features.empty()) continue;
      hidden.setZero();
      for (std::int64_t f : features) hidden += model.input_weights_.row(f).transpose();
      hidden /= static_cast<float>(features.size());
      const Eigen::Vector2f logits = model.output_weights_ * hidden;
      const float mx = logits.maxCoeff();
      Eigen::Vector2f p(std::exp(logits(0) - mx), std::exp(logits(1) - mx));
      p /= p.sum();
      Eigen::Vector2f grad = p;
      grad(examples[i].positive ? 0 : 1) -= 1.f;
      grad *= static_cast<float>(lr);
      grad_hidden.noalias() = model.output_weights_.transpose() * grad;
      model.output_weights_.noalias() -= grad * hidden.transpose();
      grad_hidden /= static_cast<float>(features.size());
      for (std::int64_t f : features)
        model.input_weights_.row(f) -= grad_hidden.transpose();
    }
  }

  if (!holdout.empty()) {
    std::size_t correct = 0;
    for (std::size_t i : holdout) {
      const bool predicted = model.predict(examples[i].text) >= 0.5;
      if (predicted == examples[i].positive) ++correct;
    }
    model.holdout_accuracy_ = static_cast<double>(correct) / static_cast<double>(holdout.size());
  }
  return model;
}

void NGramLinearClassifier::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(kMagic, 8);
  write_pod(out, hyper_.lr);
  write_pod(out, static_cast<std::int32_t>(hyper_.dim));
  write_pod(out, static_cast<std::int32_t>(hyper_.epochs));
  write_pod(out, static_cast<std::int32_t>(hyper_.min_count));
  write_pod(out, static_cast<std::int32_t>(hyper_.ngram_order));
  write_pod(out, hyper_.bucket_count);
  write_pod(out, static_cast<std::int32_t>(hyper_.window_size));
  write_pod(out, holdout_accuracy_);
  write_pod(out, static_cast<std::uint64_t>(vocab_.size()));
  // vocab serialized in id order for byte-stable files
  std::vector<const std::string*> by_id(vocab_.size());
  for (const auto& [tok, id] : vocab_) by_id[static_cast<std::size_t>(id)] = &tok;
  for (const auto* tok : by_id) {
    write_pod(out, static_cast<std::uint32_t>(tok->size()));
    out.write(tok->data(), static_cast<std::streamsize>(tok->size()));
  }
  const std::uint64_t in_rows = static_cast<std::uint64_t>(input_weights_.rows());
  write_pod(out, in_rows);
  out.write(reinterpret_cast<const char*>(input_weights_.data()),
            static_cast<std::streamsize>(sizeof(float)) * input_weights_.size());
  out.write(reinterpret_cast<const char*>(output_weights_.data()),
            static_cast<std::streamsize>(sizeof(float)) * output_weights_.size());
}

NGramLinearClassifier NGramLinearClassifier::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error(path + ": bad magic (expected BETRNGC1)");
  NGramLinearClassifier model;
  model.hyper_.lr = read_pod<double>(in);
  model.hyper_.dim = read_pod<std::int32_t>(in);
  model.hyper_.epochs = read_pod<std::int32_t>(in);
  model.hyper_.min_count = read_pod<std::int32_t>(in);
  model.hyper_.ngram_order = read_pod<std::int32_t>(in);
  model.hyper_.bucket_count = read_pod<std::int64_t>(in);
  model.hyper_.window_size = read_pod<std::int32_t>(in);
  model.holdout_accuracy_ = read_pod<double>(in);
  const std::uint64_t vocab_n = read_pod<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < vocab_n; ++i) {
    const std::uint32_t len = read_pod<std::uint32_t>(in);
    std::string tok(len, '\0');
    in.read(tok.data(), len);
    model.vocab_.emplace(std::move(tok), static_cast<std::int64_t>(i));
  }
  const std::uint64_t in_rows = read_pod<std::uint64_t>(in);
  model.input_weights_.resize(static_cast<Eigen::Index>(in_rows), model.hyper_.dim);
  in.read(reinterpret_cast<char*>(model.input_weights_.data()),
          static_cast<std::streamsize>(sizeof(float)) * model.input_weights_.size());
  model.output_weights_.resize(2, model.hyper_.dim);
  in.read(reinterpret_cast<char*>(model.output_weights_.data()),
          static_cast<std::streamsize>(sizeof(float)) * model.output_weights_.size());
  if (!in) throw std::runtime_error(path + ": truncated model file");
  return model;
}

}  // namespace betr
