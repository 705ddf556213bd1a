#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "betr/rng.hpp"
#include "betr/scorer.hpp"
#include "temp_path.hpp"

using namespace betr;

namespace {

// Two disjoint vocabularies: positives draw from appleN, negatives from bananaN.
TrainingSet separable_corpus(std::size_t docs, std::uint64_t seed) {
  Rng rng(seed);
  TrainingSet ts;
  for (std::size_t i = 0; i < docs; ++i) {
    const bool positive = i % 2 == 0;
    std::string text;
    const char* stem = positive ? "apple" : "banana";
    for (int w = 0; w < 12; ++w) {
      if (w) text += ' ';
      text += stem + std::to_string(rng.next_below(30));
    }
    ts.examples.push_back({text, positive});
  }
  return ts;
}

ScorerHyper small_hyper() {
  ScorerHyper h;
  h.bucket_count = 1 << 16;
  h.dim = 32;
  return h;
}

}  // namespace

TEST_CASE("featurize enumerates unigrams and bigrams") {
  TrainingSet ts;
  // repeat so both tokens clear min_count
  for (int i = 0; i < 6; ++i) ts.examples.push_back({i % 2 ? "a b" : "b a", i % 2 == 0});
  ts.balancing = Balancing::None;
  ts.holdout_fraction = 0.0;
  auto model = train_classifier(ts, small_hyper(), 1);

  auto feats = model.featurize("a b");
  CHECK(feats.size() == 3);  // uni(a), uni(b), bi(a b)
  CHECK(model.featurize("").empty());
}

TEST_CASE("featurization is deterministic across runs") {
  TrainingSet ts;
  for (int i = 0; i < 10; ++i) ts.examples.push_back({"x y z w v u", i % 2 == 0});
  ts.balancing = Balancing::None;
  ts.holdout_fraction = 0.0;
  auto m1 = train_classifier(ts, small_hyper(), 3);
  auto m2 = train_classifier(ts, small_hyper(), 3);
  CHECK(m1.featurize("x y z unseen") == m2.featurize("x y z unseen"));
}

TEST_CASE("balancing keeps class counts equal and is pure in (examples, seed)") {
  std::vector<TrainingExample> examples;
  for (int i = 0; i < 100; ++i) examples.push_back({"p" + std::to_string(i), true});
  for (int i = 0; i < 37; ++i) examples.push_back({"n" + std::to_string(i), false});
  auto b1 = balance_downsample(examples, 9);
  auto b2 = balance_downsample(examples, 9);
  REQUIRE(b1.size() == b2.size());
  for (std::size_t i = 0; i < b1.size(); ++i) CHECK(b1[i].text == b2[i].text);
  std::size_t pos = 0, neg = 0;
  for (const auto& e : b1) (e.positive ? pos : neg) += 1;
  CHECK(pos == 37);
  CHECK(neg == 37);
}

TEST_CASE("training is deterministic byte-for-byte") {
  auto ts = separable_corpus(400, 2);
  auto m1 = train_classifier(ts, small_hyper(), 5);
  auto m2 = train_classifier(ts, small_hyper(), 5);
  const std::string p1 = betr_test::temp_path(".bin");
  const std::string p2 = betr_test::temp_path(".bin");
  m1.save(p1);
  m2.save(p2);
  CHECK(betr_test::slurp(p1) == betr_test::slurp(p2));
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("model round-trips through its binary format") {
  auto ts = separable_corpus(200, 4);
  auto model = train_classifier(ts, small_hyper(), 6);
  const std::string path = betr_test::temp_path(".bin");
  model.save(path);
  auto loaded = NGramLinearClassifier::load(path);
  std::remove(path.c_str());
  for (const char* text : {"apple1 apple2 apple3", "banana9 banana8", "mixed apple1 banana1"})
    CHECK(model.predict(text) == doctest::Approx(loaded.predict(text)).epsilon(1e-12));
}

TEST_CASE("separable construction reaches >= 0.99 holdout accuracy") {
  auto ts = separable_corpus(10000, 7);
  auto model = train_classifier(ts, small_hyper(), 8);
  CHECK(model.holdout_accuracy() >= 0.99);
  CHECK(model.predict("apple1 apple2 apple3 apple4") > 0.99);
  CHECK(model.predict("banana1 banana2 banana3") < 0.01);
}

TEST_CASE("label-shuffled corpus trains to chance") {
  auto ts = separable_corpus(10000, 10);
  Rng rng(11);
  for (auto& e : ts.examples) e.positive = rng.next_below(2) == 0;
  auto model = train_classifier(ts, small_hyper(), 12);
  CHECK(model.holdout_accuracy() == doctest::Approx(0.5).epsilon(0.04));
}

TEST_CASE("duplicate text scores identically; empty text scores 0.5") {
  auto ts = separable_corpus(200, 13);
  auto model = train_classifier(ts, small_hyper(), 14);
  CHECK(model.predict("apple1 apple2") == model.predict("apple1 apple2"));
  CHECK(model.predict("") == doctest::Approx(0.5));
}

TEST_CASE("single-class training set is rejected") {
  TrainingSet ts;
  for (int i = 0; i < 10; ++i) ts.examples.push_back({"word" + std::to_string(i), true});
  CHECK_THROWS_AS(train_classifier(ts, small_hyper(), 0), std::invalid_argument);
}

TEST_CASE("thresholding predictions reproduces rank labels on the separable corpus") {
  auto ts = separable_corpus(2000, 15);
  ts.holdout_fraction = 0.0;
  auto model = train_classifier(ts, small_hyper(), 16);
  std::size_t agree = 0;
  for (const auto& e : ts.examples)
    if ((model.predict(e.text) >= 0.5) == e.positive) ++agree;
  CHECK(static_cast<double>(agree) / ts.examples.size() >= 0.9);
}
