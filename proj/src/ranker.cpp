#include "betr/ranker.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "betr/rng.hpp"

namespace betr {

Granularity granularity_from_string(const std::string& s) {
  if (s == "per_example") return Granularity::PerExample;
  if (s == "per_benchmark_centroid") return Granularity::PerBenchmarkCentroid;
  if (s == "global_centroid") return Granularity::GlobalCentroid;
  if (s == "kmeans") return Granularity::KMeans;
  throw std::invalid_argument("unknown granularity \"" + s + "\"");
}

TargetSampling sampling_from_string(const std::string& s) {
  if (s == "all_examples") return TargetSampling::AllExamples;
  if (s == "equal_per_benchmark") return TargetSampling::EqualPerBenchmark;
  throw std::invalid_argument("unknown target sampling \"" + s + "\"");
}

ValueKind value_kind_from_string(const std::string& s) {
  if (s == "log2_inv") return ValueKind::Log2Inv;
  if (s == "inv") return ValueKind::Inv;
  throw std::invalid_argument("unknown value function \"" + s + "\"");
}

Aggregation aggregation_from_string(const std::string& s) {
  if (s == "max") return Aggregation::Max;
  if (s == "mean") return Aggregation::Mean;
  throw std::invalid_argument("unknown aggregation \"" + s + "\"");
}

std::string to_string(Granularity g) {
  switch (g) {
    case Granularity::PerExample: return "per_example";
    case Granularity::PerBenchmarkCentroid: return "per_benchmark_centroid";
    case Granularity::GlobalCentroid: return "global_centroid";
    case Granularity::KMeans: return "kmeans";
  }
  return "per_example";
}

std::string to_string(TargetSampling s) {
  return s == TargetSampling::AllExamples ? "all_examples" : "equal_per_benchmark";
}

std::string to_string(ValueKind v) { return v == ValueKind::Log2Inv ? "log2_inv" : "inv"; }

std::string to_string(Aggregation a) { return a == Aggregation::Max ? "max" : "mean"; }

namespace {

MatrixXf normalized_copy(Eigen::Ref<const MatrixXf> rows) {
  // normalize in double so that a global scale factor cancels exactly in
  // float: scaled and unscaled inputs give bit-identical unit rows
  MatrixXf out(rows.rows(), rows.cols());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const Eigen::VectorXd r = rows.row(i).cast<double>();
    const double norm = r.norm();
    if (norm == 0.0) throw EmbeddingError("zero embedding row " + std::to_string(i));
    out.row(i) = (r / norm).cast<float>();
  }
  return out;
}

// Groups example indices by benchmark, preserving first-seen benchmark order.
std::vector<std::pair<std::string, std::vector<std::size_t>>> group_by_benchmark(
    const std::vector<BenchmarkExample>& benchmarks) {
  std::vector<std::pair<std::string, std::vector<std::size_t>>> groups;
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < benchmarks.size(); ++i) {
    auto [it, inserted] = pos.try_emplace(benchmarks[i].benchmark_id, groups.size());
    if (inserted) groups.emplace_back(benchmarks[i].benchmark_id, std::vector<std::size_t>{});
    groups[it->second].second.push_back(i);
  }
  return groups;
}

Eigen::VectorXf normalized_mean(const MatrixXf& rows) {
  Eigen::VectorXf mean = rows.colwise().mean().transpose();
  const float norm = mean.norm();
  if (norm == 0.f) throw EmbeddingError("degenerate centroid (zero mean)");
  return mean / norm;
}

MatrixXf lloyd_kmeans(const MatrixXf& points, int k, std::uint64_t seed) {
  const Eigen::Index n = points.rows();
  if (k <= 0 || k > n) throw std::invalid_argument("kmeans k out of range");
  Rng rng(seed);
  // seeded init: k distinct points
  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  MatrixXf centroids(k, points.cols());
  for (int c = 0; c < k; ++c) centroids.row(c) = points.row(static_cast<Eigen::Index>(order[c]));

  std::vector<int> assign(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < 100; ++iter) {
    // assignment by squared Euclidean distance
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best;
      (centroids.rowwise() - points.row(i)).rowwise().squaredNorm().minCoeff(&best);
      assign[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    MatrixXf sums = MatrixXf::Zero(k, points.cols());
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assign[static_cast<std::size_t>(i)]) += points.row(i);
      ++counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
    }
    float shift = 0.f, scale = 0.f;
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] == 0) continue;  // empty cluster keeps its centroid
      Eigen::VectorXf updated = sums.row(c) / static_cast<float>(counts[static_cast<std::size_t>(c)]);
      shift += (updated.transpose() - centroids.row(c)).norm();
      scale += centroids.row(c).norm();
      centroids.row(c) = updated;
    }
    if (scale > 0.f && shift / scale < 1e-6f) break;
  }
  return centroids;
}

}  // namespace

TargetSet build_targets(const std::vector<BenchmarkExample>& benchmarks,
                        const EmbeddingStore& store, const TargetSetConfig& config) {
  if (benchmarks.empty()) throw std::invalid_argument("no benchmark examples");

  // apply the sampling policy first
  std::vector<std::size_t> selected;
  auto groups = group_by_benchmark(benchmarks);
  if (config.sampling == TargetSampling::EqualPerBenchmark) {
    const int m = config.per_benchmark_m;
    if (m <= 0) throw std::invalid_argument("equal_per_benchmark requires m > 0");
    Rng rng(config.seed);
    for (auto& [bench, idxs] : groups) {
      if (idxs.size() < static_cast<std::size_t>(m))
        throw std::invalid_argument("benchmark " + bench + " has " + std::to_string(idxs.size()) +
                                    " examples, fewer than m=" + std::to_string(m));
      std::vector<std::size_t> shuffled = idxs;
      rng.shuffle(shuffled);
      shuffled.resize(static_cast<std::size_t>(m));
      std::sort(shuffled.begin(), shuffled.end());
      selected.insert(selected.end(), shuffled.begin(), shuffled.end());
    }
  } else {
    selected.resize(benchmarks.size());
    std::iota(selected.begin(), selected.end(), 0);
  }

  MatrixXf example_rows(static_cast<Eigen::Index>(selected.size()), store.dim());
  for (std::size_t i = 0; i < selected.size(); ++i)
    example_rows.row(static_cast<Eigen::Index>(i)) =
        store.row(benchmarks[selected[i]].key()).transpose();
  example_rows = normalized_copy(example_rows);

  TargetSet ts;
  ts.config = config;
  switch (config.granularity) {
    case Granularity::PerExample: {
      ts.embeddings = example_rows;
      for (std::size_t i = 0; i < selected.size(); ++i) {
        const auto& ex = benchmarks[selected[i]];
        ts.targets.push_back({ex.key(), ex.benchmark_id});
      }
      break;
    }
    case Granularity::PerBenchmarkCentroid: {
      auto sel_groups = [&] {
        std::vector<BenchmarkExample> sel;
        for (std::size_t i : selected) sel.push_back(benchmarks[i]);
        return group_by_benchmark(sel);
      }();
      ts.embeddings.resize(static_cast<Eigen::Index>(sel_groups.size()), store.dim());
      Eigen::Index row = 0;
      for (auto& [bench, idxs] : sel_groups) {
        MatrixXf members(static_cast<Eigen::Index>(idxs.size()), store.dim());
        for (std::size_t i = 0; i < idxs.size(); ++i)
          members.row(static_cast<Eigen::Index>(i)) =
              example_rows.row(static_cast<Eigen::Index>(idxs[i]));
        ts.embeddings.row(row++) = normalized_mean(members).transpose();
        ts.targets.push_back({bench + "#centroid", bench});
      }
      break;
    }
    case Granularity::GlobalCentroid: {
      ts.embeddings.resize(1, store.dim());
      ts.embeddings.row(0) = normalized_mean(example_rows).transpose();
      ts.targets.push_back({"global#centroid", ""});
      break;
    }
    case Granularity::KMeans: {
      const int k = config.kmeans_k;
      if (k <= 0) throw std::invalid_argument("kmeans granularity requires k > 0");
      if (static_cast<std::size_t>(k) > selected.size())
        throw std::invalid_argument("kmeans k exceeds example count");
      MatrixXf centroids = lloyd_kmeans(example_rows, k, config.seed);
      ts.embeddings = normalized_copy(centroids);
      for (int c = 0; c < k; ++c) ts.targets.push_back({"kmeans#" + std::to_string(c), ""});
      break;
    }
  }
  return ts;
}

std::uint32_t RankMatrix::rank(std::size_t target, std::size_t doc) const {
  if (exact) return ranks[target * doc_count + doc];
  for (const auto& e : top[target])
    if (e.doc == doc) {
      return static_cast<std::uint32_t>(&e - top[target].data()) + 1;
    }
  return static_cast<std::uint32_t>(doc_count);  // floor rank
}

float RankMatrix::cosine(std::size_t target, std::size_t doc) const {
  if (exact) return cosines[target * doc_count + doc];
  for (const auto& e : top[target])
    if (e.doc == doc) return e.cosine;
  return std::numeric_limits<float>::quiet_NaN();
}

RankMatrix rank_documents(const EmbeddingStore& sample, const TargetSet& targets,
                          const RankMatrixConfig& config) {
  const std::size_t n = sample.count();
  const std::size_t m = targets.size();
  if (n == 0) throw std::invalid_argument("empty document sample");
  if (m == 0) throw std::invalid_argument("empty target set");
  if (sample.dim() != targets.embeddings.cols())
    throw std::invalid_argument("embedding dim mismatch between sample and targets");
  if (config.top_k < 0) throw std::invalid_argument("top_k must be positive in topk mode");

  const MatrixXf docs = normalized_copy(sample.rows());
  const MatrixXf tmat = targets.embeddings;  // already normalized

  // tie-break order: position of each doc in the id-ascending ordering
  std::vector<std::uint32_t> id_order(n);
  {
    std::vector<std::uint32_t> by_id(n);
    std::iota(by_id.begin(), by_id.end(), 0u);
    std::sort(by_id.begin(), by_id.end(), [&](std::uint32_t a, std::uint32_t b) {
      return sample.id_of(a) < sample.id_of(b);
    });
    for (std::uint32_t pos = 0; pos < n; ++pos) id_order[by_id[pos]] = pos;
  }

  RankMatrix rm;
  rm.doc_count = n;
  rm.target_count = m;
  rm.exact = config.top_k == 0;
  rm.top_k = config.top_k;

  // tiled similarity: docs processed in blocks against all targets
  MatrixXf sims(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  const Eigen::Index block = std::max(1, config.block_size);
  for (Eigen::Index start = 0; start < static_cast<Eigen::Index>(n); start += block) {
    const Eigen::Index len = std::min(block, static_cast<Eigen::Index>(n) - start);
    sims.middleRows(start, len).noalias() = docs.middleRows(start, len) * tmat.transpose();
  }

  auto process_target = [&](std::size_t t) {
    auto cmp = [&](std::uint32_t a, std::uint32_t b) {
      const float sa = sims(a, static_cast<Eigen::Index>(t));
      const float sb = sims(b, static_cast<Eigen::Index>(t));
      if (sa != sb) return sa > sb;
      return id_order[a] < id_order[b];
    };
    if (rm.exact) {
      std::vector<std::uint32_t> order(n);
      std::iota(order.begin(), order.end(), 0u);
      std::sort(order.begin(), order.end(), cmp);
      for (std::uint32_t r = 0; r < n; ++r) rm.ranks[t * n + order[r]] = r + 1;
      for (std::uint32_t d = 0; d < n; ++d)
        rm.cosines[t * n + d] = sims(d, static_cast<Eigen::Index>(t));
    } else {
      const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(config.top_k), n);
      std::vector<std::uint32_t> order(n);
      std::iota(order.begin(), order.end(), 0u);
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                        cmp);
      rm.top[t].reserve(k);
      for (std::size_t r = 0; r < k; ++r)
        rm.top[t].push_back({order[r], sims(order[r], static_cast<Eigen::Index>(t))});
    }
  };

  if (rm.exact) {
    rm.ranks.assign(m * n, 0);
    rm.cosines.assign(m * n, 0.f);
  } else {
    rm.top.resize(m);
  }

  const int workers = std::max(1, config.workers);
  if (workers == 1 || m == 1) {
    for (std::size_t t = 0; t < m; ++t) process_target(t);
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t t = next.fetch_add(1); t < m; t = next.fetch_add(1)) process_target(t);
      });
    for (auto& th : pool) th.join();
  }
  return rm;
}

double value_function(std::uint32_t r, ValueKind kind) {
  if (r < 1) throw std::invalid_argument("rank must be >= 1");
  switch (kind) {
    case ValueKind::Log2Inv: return -std::log2(static_cast<double>(r));
    case ValueKind::Inv: return 1.0 / static_cast<double>(r);
  }
  throw std::invalid_argument("unknown value kind");
}

std::vector<SelectionScore> aggregate_scores(const RankMatrix& ranks, const EmbeddingStore& sample,
                                             const TargetSet& targets, ValueKind value_kind,
                                             Aggregation aggregation) {
  const std::size_t n = ranks.doc_count;
  const std::size_t m = ranks.target_count;
  if (n != sample.count()) throw std::invalid_argument("rank matrix does not cover the sample");
  if (m != targets.size()) throw std::invalid_argument("rank matrix target count mismatch");

  std::vector<SelectionScore> out(n);
  const double floor_value = value_function(static_cast<std::uint32_t>(n), value_kind);

  for (std::size_t d = 0; d < n; ++d) {
    out[d].doc_id = sample.id_of(static_cast<Eigen::Index>(d));
  }

  if (ranks.exact) {
    for (std::size_t d = 0; d < n; ++d) {
      double best_v = -std::numeric_limits<double>::infinity();
      double sum_v = 0.0;
      std::size_t best_t = 0;
      std::uint32_t best_r = 0;
      for (std::size_t t = 0; t < m; ++t) {
        const std::uint32_t r = ranks.ranks[t * n + d];
        const double v = value_function(r, value_kind);
        sum_v += v;
        if (v > best_v) {
          best_v = v;
          best_t = t;
          best_r = r;
        }
      }
      out[d].aggregate_value = aggregation == Aggregation::Max ? best_v : sum_v / static_cast<double>(m);
      if (aggregation == Aggregation::Max) {
        out[d].best_rank = best_r;
        out[d].best_target_id = targets.targets[best_t].target_id;
        out[d].best_benchmark_id = targets.targets[best_t].benchmark_id;
        out[d].best_cosine = ranks.cosines[best_t * n + d];
      }
    }
  } else {
    // floor baseline, adjusted by each target's top list
    std::vector<double> sum_v(n, floor_value * static_cast<double>(m));
    std::vector<double> best_v(n, floor_value);
    std::vector<std::uint32_t> best_r(n, static_cast<std::uint32_t>(n));
    std::vector<std::int64_t> best_t(n, -1);
    std::vector<float> best_c(n, std::numeric_limits<float>::quiet_NaN());
    for (std::size_t t = 0; t < m; ++t) {
      const auto& entries = ranks.top[t];
      for (std::size_t r = 0; r < entries.size(); ++r) {
        const std::uint32_t d = entries[r].doc;
        const double v = value_function(static_cast<std::uint32_t>(r + 1), value_kind);
        sum_v[d] += v - floor_value;
        if (v > best_v[d]) {
          best_v[d] = v;
          best_r[d] = static_cast<std::uint32_t>(r + 1);
          best_t[d] = static_cast<std::int64_t>(t);
          best_c[d] = entries[r].cosine;
        }
      }
    }
    for (std::size_t d = 0; d < n; ++d) {
      out[d].aggregate_value =
          aggregation == Aggregation::Max ? best_v[d] : sum_v[d] / static_cast<double>(m);
      if (aggregation == Aggregation::Max) {
        out[d].best_rank = best_r[d];
        if (best_t[d] >= 0) {
          out[d].best_target_id = targets.targets[static_cast<std::size_t>(best_t[d])].target_id;
          out[d].best_benchmark_id =
              targets.targets[static_cast<std::size_t>(best_t[d])].benchmark_id;
          out[d].best_cosine = best_c[d];
        } else {
          // below every top list: attribute to the first target directly
          out[d].best_target_id = targets.targets[0].target_id;
          out[d].best_benchmark_id = targets.targets[0].benchmark_id;
          Eigen::VectorXf doc = sample.row(out[d].doc_id);
          const float norm = doc.norm();
          out[d].best_cosine =
              norm == 0.f ? 0.f : doc.dot(targets.embeddings.row(0).transpose()) / norm;
        }
      }
    }
  }

  std::sort(out.begin(), out.end(), [](const SelectionScore& a, const SelectionScore& b) {
    if (a.aggregate_value != b.aggregate_value) return a.aggregate_value > b.aggregate_value;
    return a.doc_id < b.doc_id;
  });
  return out;
}

std::vector<LabeledDoc> label_top_fraction(const std::vector<SelectionScore>& scores,
                                           double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw std::invalid_argument("fraction must lie strictly in (0, 1)");
  const std::size_t n = scores.size();
  const std::size_t n_pos =
      static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
  std::vector<LabeledDoc> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].doc_id = scores[i].doc_id;
    out[i].label = i < n_pos ? Label::Positive : Label::Negative;
  }
  return out;
}

SelectionDiagnostics selection_diagnostics(const std::vector<SelectionScore>& scores,
                                           double fraction, int bins) {
  if (scores.empty()) return {};
  for (const auto& s : scores)
    if (s.best_target_id.empty() && s.best_benchmark_id.empty() && s.best_rank == 0)
      throw std::invalid_argument(
          "diagnostics require max-aggregation scores (attribution missing; rerun with max mode)");

  const std::size_t n = scores.size();
  const std::size_t n_pos =
      static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));

  SelectionDiagnostics diag;
  diag.best_rank_percentile.resize(static_cast<std::size_t>(bins));
  diag.best_cosine.resize(static_cast<std::size_t>(bins));
  for (int b = 0; b < bins; ++b) {
    diag.best_rank_percentile[static_cast<std::size_t>(b)].lo = 100.0 * b / bins;
    diag.best_rank_percentile[static_cast<std::size_t>(b)].hi = 100.0 * (b + 1) / bins;
    diag.best_cosine[static_cast<std::size_t>(b)].lo = -1.0 + 2.0 * b / bins;
    diag.best_cosine[static_cast<std::size_t>(b)].hi = -1.0 + 2.0 * (b + 1) / bins;
  }
  std::map<std::string, std::size_t> shares;
  for (std::size_t i = 0; i < n; ++i) {
    const bool in_top = i < n_pos;
    const double pct = 100.0 * scores[i].best_rank / static_cast<double>(n);
    int rb = std::min(bins - 1, static_cast<int>(pct / 100.0 * bins));
    int cb = std::min(bins - 1, std::max(0, static_cast<int>((scores[i].best_cosine + 1.0) / 2.0 * bins)));
    auto& rbin = diag.best_rank_percentile[static_cast<std::size_t>(rb)];
    auto& cbin = diag.best_cosine[static_cast<std::size_t>(cb)];
    (in_top ? rbin.count_in_top : rbin.count_rest) += 1;
    (in_top ? cbin.count_in_top : cbin.count_rest) += 1;
    if (in_top) shares[scores[i].best_benchmark_id] += 1;
  }
  for (const auto& [bench, count] : shares)
    diag.benchmark_share.emplace_back(bench, 100.0 * static_cast<double>(count) /
                                                 static_cast<double>(n_pos));
  return diag;
}

void write_scores_jsonl(const std::string& path, const std::vector<SelectionScore>& scores,
                        const std::vector<LabeledDoc>& labels) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(10);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& s = scores[i];
    out << "{\"id\":\"" << s.doc_id << "\",\"score\":" << s.aggregate_value
        << ",\"best_rank\":" << s.best_rank << ",\"best_benchmark\":\"" << s.best_benchmark_id
        << "\",\"best_cosine\":" << s.best_cosine;
    if (i < labels.size())
      out << ",\"label\":\"" << (labels[i].label == Label::Positive ? "positive" : "negative")
          << "\"";
    out << "}\n";
  }
}

void write_diagnostics_csv(const std::string& path, const SelectionDiagnostics& diag) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "histogram,bin_low,bin_high,count,in_top_fraction\n";
  auto emit = [&](const char* name, const std::vector<HistogramBin>& bins) {
    for (const auto& b : bins) {
      out << name << ',' << b.lo << ',' << b.hi << ',' << b.count_in_top << ",1\n";
      out << name << ',' << b.lo << ',' << b.hi << ',' << b.count_rest << ",0\n";
    }
  };
  emit("best_rank_percentile", diag.best_rank_percentile);
  emit("best_cosine", diag.best_cosine);
  for (const auto& [bench, pct] : diag.benchmark_share)
    out << "benchmark_share," << bench << ",," << pct << ",1\n";
}

std::vector<ScoreRecord> read_scores_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<ScoreRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    ScoreRecord rec;
    rec.score.doc_id = j.at("id").get<std::string>();
    rec.score.aggregate_value = j.at("score").get<double>();
    rec.score.best_rank = j.value("best_rank", 0u);
    rec.score.best_benchmark_id = j.value("best_benchmark", std::string());
    rec.score.best_cosine = j.value("best_cosine", 0.f);
    if (j.contains("label"))
      rec.label = j["label"] == "positive" ? Label::Positive : Label::Negative;
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace betr
