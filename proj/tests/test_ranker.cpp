#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "betr/ranker.hpp"
#include "betr/rng.hpp"

using namespace betr;

namespace {

// Independent oracle: full similarity matrix in double precision, per-target
// full sort, straight-line aggregation. Stays separate from the blockwise
// implementation path.
struct OracleScore {
  std::string doc_id;
  double value;
  std::uint32_t best_rank;
  std::size_t best_target;
};

std::vector<std::vector<std::uint32_t>> oracle_ranks(const EmbeddingStore& sample,
                                                     const TargetSet& targets) {
  const std::size_t n = sample.count();
  const std::size_t m = targets.size();
  std::vector<std::vector<std::uint32_t>> ranks(m, std::vector<std::uint32_t>(n));
  for (std::size_t t = 0; t < m; ++t) {
    std::vector<double> cos(n);
    for (std::size_t d = 0; d < n; ++d) {
      Eigen::VectorXd doc = sample.rows().row(static_cast<Eigen::Index>(d)).cast<double>();
      Eigen::VectorXd tgt = targets.embeddings.row(static_cast<Eigen::Index>(t)).cast<double>();
      cos[d] = doc.dot(tgt) / (doc.norm() * tgt.norm());
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const float ca = static_cast<float>(cos[a]);
      const float cb = static_cast<float>(cos[b]);
      if (ca != cb) return ca > cb;
      return sample.id_of(static_cast<Eigen::Index>(a)) < sample.id_of(static_cast<Eigen::Index>(b));
    });
    for (std::uint32_t r = 0; r < n; ++r) ranks[t][order[r]] = r + 1;
  }
  return ranks;
}

std::vector<OracleScore> oracle_scores(const EmbeddingStore& sample, const TargetSet& targets,
                                       ValueKind kind, Aggregation agg) {
  const auto ranks = oracle_ranks(sample, targets);
  const std::size_t n = sample.count();
  const std::size_t m = targets.size();
  std::vector<OracleScore> out(n);
  for (std::size_t d = 0; d < n; ++d) {
    out[d].doc_id = sample.id_of(static_cast<Eigen::Index>(d));
    double best = -1e300, sum = 0;
    std::size_t best_t = 0;
    for (std::size_t t = 0; t < m; ++t) {
      const double v = value_function(ranks[t][d], kind);
      sum += v;
      if (v > best) {
        best = v;
        best_t = t;
      }
    }
    out[d].value = agg == Aggregation::Max ? best : sum / static_cast<double>(m);
    out[d].best_rank = ranks[best_t][d];
    out[d].best_target = best_t;
  }
  std::sort(out.begin(), out.end(), [](const OracleScore& a, const OracleScore& b) {
    if (a.value != b.value) return a.value > b.value;
    return a.doc_id < b.doc_id;
  });
  return out;
}

EmbeddingStore random_store(std::size_t n, int dim, Rng& rng, const std::string& prefix) {
  EmbeddingStore store(dim);
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::VectorXf v(dim);
    for (int j = 0; j < dim; ++j) v(j) = static_cast<float>(rng.next_normal());
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%06zu", prefix.c_str(), i);
    store.add(buf, v);
  }
  return store;
}

TargetSet targets_from_store(const EmbeddingStore& store) {
  TargetSet ts;
  MatrixXf rows = store.rows();
  for (Eigen::Index i = 0; i < rows.rows(); ++i) rows.row(i).normalize();
  ts.embeddings = rows;
  for (std::size_t i = 0; i < store.count(); ++i)
    ts.targets.push_back({store.id_of(static_cast<Eigen::Index>(i)),
                          "bench" + std::to_string(i % 3)});
  return ts;
}

}  // namespace

TEST_CASE("value function spec points") {
  CHECK(value_function(1, ValueKind::Log2Inv) == doctest::Approx(0.0));
  CHECK(value_function(2, ValueKind::Log2Inv) == doctest::Approx(-1.0));
  CHECK(value_function(4, ValueKind::Inv) == doctest::Approx(0.25));
  CHECK_THROWS_AS(value_function(0, ValueKind::Inv), std::invalid_argument);
}

TEST_CASE("value function is strictly decreasing") {
  for (auto kind : {ValueKind::Log2Inv, ValueKind::Inv})
    for (std::uint32_t r = 1; r < 1000; ++r)
      CHECK(value_function(r, kind) > value_function(r + 1, kind));
}

TEST_CASE("hand-computed ranks: a, c, b") {
  EmbeddingStore docs(2);
  docs.add("a", Eigen::Vector2f(1, 0));
  docs.add("b", Eigen::Vector2f(0, 1));
  docs.add("c", Eigen::Vector2f(0.6f, 0.8f));
  TargetSet ts;
  ts.embeddings.resize(1, 2);
  ts.embeddings << 1, 0;
  ts.targets.push_back({"t", "bench"});
  auto rm = rank_documents(docs, ts);
  CHECK(rm.rank(0, 0) == 1);  // a: cos 1.0
  CHECK(rm.rank(0, 2) == 2);  // c: cos 0.6
  CHECK(rm.rank(0, 1) == 3);  // b: cos 0.0
}

TEST_CASE("identical embeddings break ties by ascending id") {
  EmbeddingStore docs(2);
  docs.add("b", Eigen::Vector2f(1, 1));
  docs.add("a", Eigen::Vector2f(1, 1));
  TargetSet ts;
  ts.embeddings.resize(1, 2);
  ts.embeddings << 0.6f, 0.8f;
  ts.targets.push_back({"t", ""});
  auto rm = rank_documents(docs, ts);
  CHECK(rm.rank(0, 1) == 1);  // "a"
  CHECK(rm.rank(0, 0) == 2);  // "b"
}

TEST_CASE("singleton: one target, one document") {
  EmbeddingStore docs(3);
  docs.add("only", Eigen::Vector3f(1, 2, 3));
  TargetSet ts;
  ts.embeddings = MatrixXf::Ones(1, 3) / std::sqrt(3.f);
  ts.targets.push_back({"t", ""});
  auto rm = rank_documents(docs, ts);
  CHECK(rm.rank(0, 0) == 1);
}

TEST_CASE("exact mode matches the brute-force oracle") {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 50 + rng.next_below(200);
    const std::size_t m = 1 + rng.next_below(20);
    const int dim = 2 + static_cast<int>(rng.next_below(16));
    auto docs = random_store(n, dim, rng, "d");
    auto tstore = random_store(m, dim, rng, "t");
    auto ts = targets_from_store(tstore);

    for (auto agg : {Aggregation::Max, Aggregation::Mean}) {
      auto rm = rank_documents(docs, ts, {.block_size = 37});
      auto got = aggregate_scores(rm, docs, ts, ValueKind::Log2Inv, agg);
      auto want = oracle_scores(docs, ts, ValueKind::Log2Inv, agg);
      REQUIRE(got.size() == want.size());
      for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].doc_id == want[i].doc_id);
        CHECK(got[i].aggregate_value == doctest::Approx(want[i].value).epsilon(1e-12));
        if (agg == Aggregation::Max) CHECK(got[i].best_rank == want[i].best_rank);
      }
    }
  }
}

TEST_CASE("results are block-size and worker-count invariant") {
  Rng rng(11);
  auto docs = random_store(300, 8, rng, "d");
  auto ts = targets_from_store(random_store(7, 8, rng, "t"));
  auto base = rank_documents(docs, ts, {.block_size = 8192, .workers = 1});
  for (int bs : {1, 17, 300})
    for (int w : {1, 4}) {
      auto rm = rank_documents(docs, ts, {.block_size = bs, .workers = w});
      CHECK(rm.ranks == base.ranks);
    }
}

TEST_CASE("positive scaling of embeddings changes no rank") {
  Rng rng(13);
  auto docs = random_store(100, 6, rng, "d");
  auto ts = targets_from_store(random_store(5, 6, rng, "t"));
  auto base = rank_documents(docs, ts);

  EmbeddingStore scaled(6);
  for (std::size_t i = 0; i < docs.count(); ++i)
    scaled.add(docs.id_of(static_cast<Eigen::Index>(i)),
               docs.rows().row(static_cast<Eigen::Index>(i)) * 7.3f);
  auto rm = rank_documents(scaled, ts);
  CHECK(rm.ranks == base.ranks);
}

TEST_CASE("adding a target never decreases a max-aggregation score") {
  Rng rng(17);
  auto docs = random_store(80, 5, rng, "d");
  auto tstore = random_store(6, 5, rng, "t");
  auto ts_all = targets_from_store(tstore);
  TargetSet ts_some = ts_all;
  ts_some.targets.pop_back();
  ts_some.embeddings = ts_all.embeddings.topRows(5);

  auto score_map = [&](const TargetSet& ts) {
    auto rm = rank_documents(docs, ts);
    auto scores = aggregate_scores(rm, docs, ts, ValueKind::Log2Inv, Aggregation::Max);
    std::map<std::string, double> m;
    for (const auto& s : scores) m[s.doc_id] = s.aggregate_value;
    return m;
  };
  auto with = score_map(ts_all);
  auto without = score_map(ts_some);
  for (const auto& [id, v] : without) CHECK(with[id] >= v - 1e-12);
}

TEST_CASE("topk labels equal exact labels when the top fraction fits in K") {
  Rng rng(19);
  auto docs = random_store(200, 8, rng, "d");
  auto ts = targets_from_store(random_store(4, 8, rng, "t"));

  auto rm_exact = rank_documents(docs, ts);
  auto exact = aggregate_scores(rm_exact, docs, ts, ValueKind::Log2Inv, Aggregation::Max);
  const double fraction = 0.1;
  auto exact_labels = label_top_fraction(exact, fraction);

  // every top-fraction doc has best_rank <= K here
  const std::size_t n_pos = static_cast<std::size_t>(std::ceil(fraction * 200));
  std::uint32_t max_best = 0;
  for (std::size_t i = 0; i < n_pos; ++i) max_best = std::max(max_best, exact[i].best_rank);
  const int k = static_cast<int>(max_best);

  auto rm_topk = rank_documents(docs, ts, {.top_k = k});
  auto approx = aggregate_scores(rm_topk, docs, ts, ValueKind::Log2Inv, Aggregation::Max);
  auto approx_labels = label_top_fraction(approx, fraction);

  std::map<std::string, Label> want, got;
  for (const auto& l : exact_labels) want[l.doc_id] = l.label;
  for (const auto& l : approx_labels) got[l.doc_id] = l.label;
  CHECK(want == got);
}

TEST_CASE("build_targets granularities") {
  EmbeddingStore store(2);
  std::vector<BenchmarkExample> exs;
  auto add = [&](const std::string& bench, const std::string& ex, Eigen::Vector2f v) {
    BenchmarkExample b{bench, ex, Split::Train, "text"};
    store.add(b.key(), v);
    exs.push_back(b);
  };
  add("b1", "e1", {1, 0});
  add("b1", "e2", {0, 1});
  add("b2", "e1", {1, 0});

  SUBCASE("per_example yields one target per example") {
    auto ts = build_targets(exs, store, {});
    CHECK(ts.size() == 3);
  }
  SUBCASE("per_benchmark centroid is the normalized mean") {
    auto ts = build_targets(exs, store, {.granularity = Granularity::PerBenchmarkCentroid});
    REQUIRE(ts.size() == 2);
    const float inv_sqrt2 = 1.f / std::sqrt(2.f);
    CHECK(ts.embeddings(0, 0) == doctest::Approx(inv_sqrt2));
    CHECK(ts.embeddings(0, 1) == doctest::Approx(inv_sqrt2));
  }
  SUBCASE("global centroid is a single unit vector") {
    auto ts = build_targets(exs, store, {.granularity = Granularity::GlobalCentroid});
    REQUIRE(ts.size() == 1);
    CHECK(ts.embeddings.row(0).norm() == doctest::Approx(1.f));
  }
  SUBCASE("equal_per_benchmark errors when a benchmark is short") {
    TargetSetConfig cfg;
    cfg.sampling = TargetSampling::EqualPerBenchmark;
    cfg.per_benchmark_m = 2;
    CHECK_THROWS_AS(build_targets(exs, store, cfg), std::invalid_argument);
  }
}

TEST_CASE("equal_per_benchmark takes exactly m per benchmark") {
  Rng rng(23);
  EmbeddingStore store(4);
  std::vector<BenchmarkExample> exs;
  const int counts[3] = {10, 20, 30};
  for (int b = 0; b < 3; ++b)
    for (int e = 0; e < counts[b]; ++e) {
      BenchmarkExample ex{"bench" + std::to_string(b), "ex" + std::to_string(e), Split::Train, "t"};
      Eigen::VectorXf v(4);
      for (int j = 0; j < 4; ++j) v(j) = static_cast<float>(rng.next_normal());
      store.add(ex.key(), v);
      exs.push_back(ex);
    }
  TargetSetConfig cfg;
  cfg.sampling = TargetSampling::EqualPerBenchmark;
  cfg.per_benchmark_m = 10;
  cfg.seed = 5;
  auto ts = build_targets(exs, store, cfg);
  CHECK(ts.size() == 30);
  std::map<std::string, int> per;
  for (const auto& t : ts.targets) ++per[t.benchmark_id];
  for (const auto& [bench, c] : per) CHECK(c == 10);
}

TEST_CASE("kmeans produces k normalized centroids") {
  Rng rng(29);
  EmbeddingStore store(8);
  std::vector<BenchmarkExample> exs;
  for (int e = 0; e < 40; ++e) {
    BenchmarkExample ex{"b", "e" + std::to_string(e), Split::Train, "t"};
    Eigen::VectorXf v(8);
    for (int j = 0; j < 8; ++j) v(j) = static_cast<float>(rng.next_normal());
    store.add(ex.key(), v);
    exs.push_back(ex);
  }
  TargetSetConfig cfg;
  cfg.granularity = Granularity::KMeans;
  cfg.kmeans_k = 5;
  auto ts = build_targets(exs, store, cfg);
  REQUIRE(ts.size() == 5);
  for (Eigen::Index i = 0; i < 5; ++i)
    CHECK(ts.embeddings.row(i).norm() == doctest::Approx(1.f));
}

TEST_CASE("label_top_fraction counts and tie-break") {
  std::vector<SelectionScore> scores;
  for (int i = 0; i < 10; ++i) {
    SelectionScore s;
    s.doc_id = "d" + std::to_string(i);
    s.aggregate_value = 0.0;  // all equal
    s.best_rank = 1;
    scores.push_back(s);
  }
  std::sort(scores.begin(), scores.end(),
            [](const auto& a, const auto& b) { return a.doc_id < b.doc_id; });
  auto labels = label_top_fraction(scores, 0.1);
  int positives = 0;
  for (const auto& l : labels) positives += l.label == Label::Positive;
  CHECK(positives == 1);
  CHECK(labels[0].doc_id == "d0");  // lowest id wins the tie
  CHECK(labels[0].label == Label::Positive);
  CHECK_THROWS_AS(label_top_fraction(scores, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(label_top_fraction(scores, 1.0), std::invalid_argument);
}

TEST_CASE("diagnostics: single benchmark owns 100% of the top fraction") {
  Rng rng(31);
  auto docs = random_store(100, 4, rng, "d");
  auto tstore = random_store(3, 4, rng, "t");
  TargetSet ts = targets_from_store(tstore);
  for (auto& t : ts.targets) t.benchmark_id = "only";
  auto rm = rank_documents(docs, ts);
  auto scores = aggregate_scores(rm, docs, ts, ValueKind::Log2Inv, Aggregation::Max);
  auto diag = selection_diagnostics(scores, 0.1);
  REQUIRE(diag.benchmark_share.size() == 1);
  CHECK(diag.benchmark_share[0].first == "only");
  CHECK(diag.benchmark_share[0].second == doctest::Approx(100.0));
}

TEST_CASE("diagnostics reject mean-aggregation scores") {
  Rng rng(37);
  auto docs = random_store(50, 4, rng, "d");
  auto ts = targets_from_store(random_store(2, 4, rng, "t"));
  auto rm = rank_documents(docs, ts);
  auto scores = aggregate_scores(rm, docs, ts, ValueKind::Log2Inv, Aggregation::Mean);
  CHECK_THROWS_AS(selection_diagnostics(scores, 0.1), std::invalid_argument);
}

TEST_CASE("diagnostics: symmetric benchmarks share the top fraction roughly equally") {
  Rng rng(41);
  const int benches = 10, per_bench = 5;
  auto docs = random_store(1000, 8, rng, "d");
  auto tstore = random_store(benches * per_bench, 8, rng, "t");
  TargetSet ts = targets_from_store(tstore);
  for (std::size_t i = 0; i < ts.targets.size(); ++i)
    ts.targets[i].benchmark_id = "bench" + std::to_string(i % benches);
  auto rm = rank_documents(docs, ts);
  auto scores = aggregate_scores(rm, docs, ts, ValueKind::Log2Inv, Aggregation::Max);
  auto diag = selection_diagnostics(scores, 0.2);
  double total = 0;
  for (const auto& [bench, pct] : diag.benchmark_share) {
    CHECK(pct == doctest::Approx(10.0).epsilon(1.0));  // 10% +- binomial noise
    total += pct;
  }
  CHECK(total == doctest::Approx(100.0));
}
