#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "betr/corpus.hpp"
#include "betr/embedding.hpp"

namespace betr {

enum class Granularity { PerExample, PerBenchmarkCentroid, GlobalCentroid, KMeans };
enum class TargetSampling { AllExamples, EqualPerBenchmark };
enum class ValueKind { Log2Inv, Inv };
enum class Aggregation { Max, Mean };

Granularity granularity_from_string(const std::string& s);
TargetSampling sampling_from_string(const std::string& s);
ValueKind value_kind_from_string(const std::string& s);
Aggregation aggregation_from_string(const std::string& s);
std::string to_string(Granularity g);
std::string to_string(TargetSampling s);
std::string to_string(ValueKind v);
std::string to_string(Aggregation a);

struct TargetSetConfig {
  Granularity granularity = Granularity::PerExample;
  int kmeans_k = 0;  // required when granularity == KMeans
  TargetSampling sampling = TargetSampling::AllExamples;
  int per_benchmark_m = 0;  // required when sampling == EqualPerBenchmark
  std::uint64_t seed = 0;
};

struct Target {
  std::string target_id;
  std::string benchmark_id;  // empty for pooled centroids (global, kmeans)
};

struct TargetSet {
  std::vector<Target> targets;
  MatrixXf embeddings;  // targets.size() x dim, rows unit-L2-normalized
  TargetSetConfig config;

  std::size_t size() const { return targets.size(); }
};

// Builds targets from benchmark examples per granularity/sampling policy.
// Benchmark examples must all have embeddings in `store`.
TargetSet build_targets(const std::vector<BenchmarkExample>& benchmarks,
                        const EmbeddingStore& store, const TargetSetConfig& config);

struct RankMatrixConfig {
  int top_k = 0;          // 0 = exact mode; > 0 = topk(K)
  int block_size = 8192;  // documents per similarity tile
  int workers = 1;
};

// Per-target 1-based dense document ranks. Ties in cosine similarity break
// by ascending document id. In topk mode, unlisted pairs carry the floor
// rank (= sample size).
struct RankMatrix {
  std::size_t doc_count = 0;
  std::size_t target_count = 0;
  bool exact = true;
  int top_k = 0;

  // exact mode: ranks(t, d) for every pair; row-major target-by-doc
  std::vector<std::uint32_t> ranks;

  // topk mode: per target, the K best docs in rank order
  struct TopEntry {
    std::uint32_t doc = 0;
    float cosine = 0.f;
  };
  std::vector<std::vector<TopEntry>> top;

  // cosines for best-match attribution (exact mode keeps the full matrix
  // implicitly via on-demand recomputation; we store it densely instead)
  std::vector<float> cosines;  // exact mode only, same layout as ranks

  std::uint32_t rank(std::size_t target, std::size_t doc) const;
  float cosine(std::size_t target, std::size_t doc) const;
};

RankMatrix rank_documents(const EmbeddingStore& sample, const TargetSet& targets,
                          const RankMatrixConfig& config = {});

// v(r): log2(1/r) or 1/r, strictly decreasing in r. r must be >= 1.
double value_function(std::uint32_t r, ValueKind kind);

struct SelectionScore {
  std::string doc_id;
  double aggregate_value = 0.0;
  std::uint32_t best_rank = 0;
  std::string best_target_id;
  std::string best_benchmark_id;
  float best_cosine = 0.f;
};

// S_j per the chosen aggregation, sorted by descending S_j with ascending-id
// tie-break. Max aggregation populates the attribution fields.
std::vector<SelectionScore> aggregate_scores(const RankMatrix& ranks,
                                             const EmbeddingStore& sample,
                                             const TargetSet& targets, ValueKind value_kind,
                                             Aggregation aggregation);

enum class Label { Positive, Negative };

struct LabeledDoc {
  std::string doc_id;
  Label label = Label::Negative;
};

// Top ceil(fraction * N) docs by score labeled positive, rest negative.
std::vector<LabeledDoc> label_top_fraction(const std::vector<SelectionScore>& scores,
                                           double fraction);

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count_in_top = 0;
  std::size_t count_rest = 0;
};

struct SelectionDiagnostics {
  std::vector<HistogramBin> best_rank_percentile;  // best_rank / N, percent
  std::vector<HistogramBin> best_cosine;
  std::vector<std::pair<std::string, double>> benchmark_share;  // percent of top fraction
};

// Requires max-aggregation scores (attribution populated).
SelectionDiagnostics selection_diagnostics(const std::vector<SelectionScore>& scores,
                                           double fraction, int bins = 20);

void write_scores_jsonl(const std::string& path, const std::vector<SelectionScore>& scores,
                        const std::vector<LabeledDoc>& labels);

struct ScoreRecord {
  SelectionScore score;
  std::optional<Label> label;
};

std::vector<ScoreRecord> read_scores_jsonl(const std::string& path);
void write_diagnostics_csv(const std::string& path, const SelectionDiagnostics& diag);

}  // namespace betr
