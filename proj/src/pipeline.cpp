#include "betr/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <unordered_map>

#include <json.hpp>

#include "betr/corpus.hpp"
#include "betr/decontam.hpp"
#include "betr/embedding.hpp"
#include "betr/ranker.hpp"
#include "betr/sampling.hpp"
#include "betr/scorer.hpp"
#include "betr/selection.hpp"

namespace betr {

namespace fs = std::filesystem;
using nlohmann::json;

std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::map<std::string, std::string> out;
  std::string line, section;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(path + ":" + std::to_string(lineno) + ": unterminated section");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key");
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    if (!section.empty()) key = section + "." + key;
    if (!out.emplace(key, value).second)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": duplicate key \"" + key + "\"");
  }
  return out;
}

ResolvedConfig::ResolvedConfig(std::map<std::string, std::string> file_values,
                               std::map<std::string, std::string> flag_values)
    : file_(std::move(file_values)), flags_(std::move(flag_values)) {}

namespace {

std::string env_name(const std::string& key) {
  std::string name = "BETR_";
  for (char c : key)
    name += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return name;
}

}  // namespace

std::string ResolvedConfig::get(const std::string& key, const std::string& fallback) {
  std::string value = fallback;
  if (auto it = file_.find(key); it != file_.end()) value = it->second;
  if (const char* env = std::getenv(env_name(key).c_str())) value = env;
  if (auto it = flags_.find(key); it != flags_.end()) value = it->second;
  resolved_[key] = value;
  return value;
}

std::string ResolvedConfig::require(const std::string& key) {
  const std::string value = get(key, "");
  if (value.empty()) throw ConfigError("missing required config key \"" + key + "\"");
  return value;
}

double ResolvedConfig::get_double(const std::string& key, double fallback) {
  const std::string raw = get(key, std::to_string(fallback));
  try {
    return std::stod(raw);
  } catch (const std::exception&) {
    throw ConfigError("config key \"" + key + "\": not a number: \"" + raw + "\"");
  }
}

std::int64_t ResolvedConfig::get_int(const std::string& key, std::int64_t fallback) {
  const std::string raw = get(key, std::to_string(fallback));
  try {
    return std::stoll(raw);
  } catch (const std::exception&) {
    throw ConfigError("config key \"" + key + "\": not an integer: \"" + raw + "\"");
  }
}

std::uint64_t ResolvedConfig::get_u64(const std::string& key, std::uint64_t fallback) {
  const std::string raw = get(key, std::to_string(fallback));
  try {
    return std::stoull(raw);
  } catch (const std::exception&) {
    throw ConfigError("config key \"" + key + "\": not an integer: \"" + raw + "\"");
  }
}

bool ResolvedConfig::has(const std::string& key) const {
  return flags_.count(key) || std::getenv(env_name(key).c_str()) || file_.count(key);
}

std::vector<std::string> ResolvedConfig::unused_file_keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : file_)
    if (!resolved_.count(k)) out.push_back(k);
  return out;
}

namespace {

const std::vector<std::string> kStageOrder = {"ingest",       "sample", "build_targets",
                                              "rank",         "train_scorer", "score",
                                              "calibrate",    "filter", "decontam"};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  for (char c : s) {
    if (c == ',') {
      if (!item.empty()) out.push_back(item);
      item.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      item += c;
    }
  }
  if (!item.empty()) out.push_back(item);
  return out;
}

void write_targets_meta(const std::string& path, const TargetSet& ts) {
  json j;
  j["granularity"] = to_string(ts.config.granularity);
  j["sampling"] = to_string(ts.config.sampling);
  j["kmeans_k"] = ts.config.kmeans_k;
  j["per_benchmark_m"] = ts.config.per_benchmark_m;
  j["seed"] = ts.config.seed;
  j["targets"] = json::array();
  for (const auto& t : ts.targets)
    j["targets"].push_back({{"target_id", t.target_id}, {"benchmark_id", t.benchmark_id}});
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

TargetSet load_target_set(const std::string& emb_path, const std::string& meta_path) {
  std::ifstream in(meta_path);
  if (!in) throw std::runtime_error("cannot open " + meta_path);
  json j;
  in >> j;
  TargetSet ts;
  ts.config.granularity = granularity_from_string(j.at("granularity").get<std::string>());
  ts.config.sampling = sampling_from_string(j.at("sampling").get<std::string>());
  ts.config.kmeans_k = j.at("kmeans_k").get<int>();
  ts.config.per_benchmark_m = j.at("per_benchmark_m").get<int>();
  ts.config.seed = j.at("seed").get<std::uint64_t>();
  const EmbeddingStore store = EmbeddingStore::load(emb_path);
  ts.embeddings = store.rows();
  for (const auto& tj : j.at("targets")) {
    Target t;
    t.target_id = tj.at("target_id").get<std::string>();
    t.benchmark_id = tj.at("benchmark_id").get<std::string>();
    if (!store.contains(t.target_id))
      throw std::runtime_error(emb_path + ": missing target embedding " + t.target_id);
    ts.targets.push_back(std::move(t));
  }
  if (ts.targets.size() != store.count())
    throw std::runtime_error(meta_path + ": target list does not match embedding count");
  // rows must follow the target list order
  for (std::size_t i = 0; i < ts.targets.size(); ++i)
    if (store.id_of(static_cast<Eigen::Index>(i)) != ts.targets[i].target_id)
      throw std::runtime_error(meta_path + ": target order does not match embedding file");
  return ts;
}

struct ScoredLine {
  Document doc;
  double score = 0.0;
};

std::vector<ScoredLine> read_scored_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<ScoredLine> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    ScoredLine s;
    s.doc.id = j.at("id").get<std::string>();
    s.doc.text = j.at("text").get<std::string>();
    s.doc.token_count = j.at("token_count").get<std::uint64_t>();
    if (j.contains("source") && !j["source"].is_null())
      s.doc.source = j["source"].get<std::string>();
    s.score = j.at("score").get<double>();
    out.push_back(std::move(s));
  }
  return out;
}

void dump_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

class PipelineRun {
 public:
  PipelineRun(ResolvedConfig& cfg, const PipelineOptions& opts, PipelineResult& result)
      : cfg_(cfg), opts_(opts), result_(result) {
    workdir_ = cfg_.require("workdir");
    fs::create_directories(workdir_);
    manifest_dir_ = opts_.manifest_dir.empty() ? workdir_ + "/manifests" : opts_.manifest_dir;
    fs::create_directories(manifest_dir_);
  }

  std::string art(const std::string& name) const { return workdir_ + "/" + name; }

  void run_stage(const std::string& name, const std::vector<std::string>& input_paths,
                 const std::vector<std::string>& output_paths,
                 const std::function<void(RunManifest&)>& body) {
    RunManifest m;
    m.tool_version = opts_.tool_version;
    m.subcommand = name;
    for (const auto& p : input_paths) m.inputs[p] = sha256_file(p);
    try {
      body(m);
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what(), m.inputs);
    }
    for (const auto& p : output_paths) m.outputs[p] = sha256_file(p);
    m.config = cfg_.resolved();
    m.write(manifest_dir_ + "/" + name + ".manifest.json");
    for (const auto& w : m.warnings) result_.warnings.push_back(name + ": " + w);
    result_.manifests.push_back(m);
    result_.stages_run.push_back(name);
  }

  void ingest() {
    const std::string corpus = cfg_.require("corpus");
    const std::string benchmarks = cfg_.get("benchmarks", "");
    std::vector<std::string> inputs{corpus}, outputs{art("documents.jsonl")};
    if (!benchmarks.empty()) {
      inputs.push_back(benchmarks);
      outputs.push_back(art("benchmarks.jsonl"));
    }
    run_stage("ingest", inputs, outputs, [&](RunManifest&) {
      const auto docs = read_documents_jsonl(corpus);
      write_documents_jsonl(art("documents.jsonl"), docs);
      if (!benchmarks.empty())
        write_benchmarks_jsonl(art("benchmarks.jsonl"), read_benchmarks_jsonl(benchmarks));
    });
  }

  void sample() {
    const std::size_t n = static_cast<std::size_t>(cfg_.get_int("sample_size", 100'000));
    const std::uint64_t seed = cfg_.get_u64("seed", 0);
    run_stage("sample", {art("documents.jsonl")}, {art("sample.json")}, [&](RunManifest&) {
      ReservoirSampler sampler(n, seed);
      for_each_document_jsonl(art("documents.jsonl"), whitespace_token_count,
                              [&](Document&& d) { sampler.offer(d.id); });
      write_manifest_json(art("sample.json"), sampler.finish());
    });
  }

  void build_targets_stage() {
    const std::string bench_emb = cfg_.require("benchmark_embeddings");
    TargetSetConfig tc;
    tc.granularity = granularity_from_string(cfg_.get("granularity", "per_example"));
    tc.kmeans_k = static_cast<int>(cfg_.get_int("kmeans_k", 0));
    tc.sampling = sampling_from_string(cfg_.get("target_sampling", "all_examples"));
    tc.per_benchmark_m = static_cast<int>(cfg_.get_int("per_benchmark_m", 0));
    tc.seed = cfg_.get_u64("seed", 0);
    run_stage("build_targets", {art("benchmarks.jsonl"), bench_emb},
              {art("targets.emb"), art("targets.json")}, [&](RunManifest&) {
                const auto benchmarks = read_benchmarks_jsonl(art("benchmarks.jsonl"));
                const auto store = EmbeddingStore::load(bench_emb);
                const TargetSet ts = build_targets(benchmarks, store, tc);
                EmbeddingStore out(static_cast<int>(ts.embeddings.cols()), true);
                out.reserve(ts.targets.size());
                for (std::size_t i = 0; i < ts.targets.size(); ++i)
                  out.add(ts.targets[i].target_id,
                          ts.embeddings.row(static_cast<Eigen::Index>(i)));
                out.save(art("targets.emb"));
                write_targets_meta(art("targets.json"), ts);
              });
  }

  void rank() {
    const std::string emb = cfg_.require("embeddings");
    RankMatrixConfig rc;
    rc.top_k = static_cast<int>(cfg_.get_int("top_k", 0));
    rc.block_size = static_cast<int>(cfg_.get_int("block_size", 8192));
    rc.workers = static_cast<int>(cfg_.get_int("workers", 1));
    const ValueKind value = value_kind_from_string(cfg_.get("value", "log2_inv"));
    const Aggregation agg = aggregation_from_string(cfg_.get("aggregation", "max"));
    const double label_fraction = cfg_.get_double("label_fraction", 0.1);
    std::vector<std::string> outputs{art("scores.jsonl")};
    if (agg == Aggregation::Max) outputs.push_back(art("diagnostics.csv"));
    run_stage("rank", {emb, art("sample.json"), art("targets.emb"), art("targets.json")}, outputs,
              [&](RunManifest&) {
                const auto sample_manifest = read_manifest_json(art("sample.json"));
                auto store = EmbeddingStore::load(emb).subset(sample_manifest.sampled_ids);
                const TargetSet ts = load_target_set(art("targets.emb"), art("targets.json"));
                const RankMatrix ranks = rank_documents(store, ts, rc);
                const auto scores = aggregate_scores(ranks, store, ts, value, agg);
                const auto labels = label_top_fraction(scores, label_fraction);
                write_scores_jsonl(art("scores.jsonl"), scores, labels);
                if (agg == Aggregation::Max)
                  write_diagnostics_csv(art("diagnostics.csv"),
                                        selection_diagnostics(scores, label_fraction));
              });
  }

  void train_scorer() {
    ScorerHyper hyper;
    hyper.lr = cfg_.get_double("scorer.lr", hyper.lr);
    hyper.dim = static_cast<int>(cfg_.get_int("scorer.dim", hyper.dim));
    hyper.epochs = static_cast<int>(cfg_.get_int("scorer.epochs", hyper.epochs));
    hyper.min_count = static_cast<int>(cfg_.get_int("scorer.min_count", hyper.min_count));
    hyper.ngram_order = static_cast<int>(cfg_.get_int("scorer.ngram_order", hyper.ngram_order));
    hyper.bucket_count = cfg_.get_int("scorer.bucket_count", hyper.bucket_count);
    hyper.window_size = static_cast<int>(cfg_.get_int("scorer.window_size", hyper.window_size));
    const std::uint64_t seed = cfg_.get_u64("seed", 0);
    const double holdout = cfg_.get_double("scorer.holdout_fraction", 0.1);
    run_stage("train_scorer", {art("scores.jsonl"), art("documents.jsonl")}, {art("model.bin")},
              [&](RunManifest& m) {
                const auto records = read_scores_jsonl(art("scores.jsonl"));
                std::unordered_map<std::string, bool> label_of;
                for (const auto& r : records) {
                  if (!r.label) throw std::runtime_error("scores.jsonl is missing labels");
                  label_of[r.score.doc_id] = *r.label == Label::Positive;
                }
                TrainingSet ts;
                ts.holdout_fraction = holdout;
                for_each_document_jsonl(art("documents.jsonl"), whitespace_token_count,
                                        [&](Document&& d) {
                                          auto it = label_of.find(d.id);
                                          if (it != label_of.end())
                                            ts.examples.push_back({std::move(d.text), it->second});
                                        });
                const auto model = train_classifier(ts, hyper, seed);
                model.save(art("model.bin"));
                m.config["holdout_accuracy"] = std::to_string(model.holdout_accuracy());
              });
  }

  void score() {
    run_stage("score", {art("model.bin"), art("documents.jsonl")}, {art("scored.jsonl")},
              [&](RunManifest&) {
                const auto model = NGramLinearClassifier::load(art("model.bin"));
                std::ofstream out(art("scored.jsonl"));
                if (!out) throw std::runtime_error("cannot write " + art("scored.jsonl"));
                out.precision(10);
                for_each_document_jsonl(art("documents.jsonl"), whitespace_token_count,
                                        [&](Document&& d) {
                                          json j = json::parse(document_to_json_line(d));
                                          j["score"] = model.predict(d.text);
                                          out << j.dump() << '\n';
                                        });
              });
  }

  void calibrate() {
    const double target = cfg_.get_double("target_fraction", 0.1);
    const std::size_t holdout = static_cast<std::size_t>(cfg_.get_int("calibration_holdout", 100'000));
    const std::uint64_t seed = cfg_.get_u64("seed", 0);
    run_stage("calibrate", {art("scored.jsonl")}, {art("threshold.json")}, [&](RunManifest& m) {
      const auto scored = read_scored_jsonl(art("scored.jsonl"));
      std::vector<std::string> ids;
      ids.reserve(scored.size());
      std::unordered_map<std::string, const ScoredLine*> by_id;
      for (const auto& s : scored) {
        ids.push_back(s.doc.id);
        by_id[s.doc.id] = &s;
      }
      const std::size_t n = std::min(holdout, ids.size());
      const auto sampled = sample_ids(ids, n, seed);
      std::vector<ScoredDoc> pool;
      pool.reserve(n);
      for (const auto& id : sampled.sampled_ids) {
        const ScoredLine* s = by_id.at(id);
        pool.push_back({s->doc.id, s->score, s->doc.token_count});
      }
      auto cal = calibrate_threshold(std::move(pool), target);
      cal.seed = seed;
      if (cal.warning)
        m.warnings.push_back("calibration overshoot: achieved fraction " +
                             std::to_string(cal.achieved_fraction));
      dump_json_file(art("threshold.json"),
                     {{"target_fraction", cal.target_fraction},
                      {"holdout_size", cal.holdout_size},
                      {"threshold", cal.threshold},
                      {"achieved_fraction", cal.achieved_fraction},
                      {"seed", cal.seed},
                      {"warning", cal.warning}});
    });
  }

  void filter() {
    run_stage("filter", {art("scored.jsonl"), art("threshold.json")},
              {art("filtered.jsonl"), art("filter_stats.json")}, [&](RunManifest&) {
                std::ifstream tin(art("threshold.json"));
                json tj;
                tin >> tj;
                const double threshold = tj.at("threshold").get<double>();
                const auto scored = read_scored_jsonl(art("scored.jsonl"));
                std::ofstream out(art("filtered.jsonl"));
                if (!out) throw std::runtime_error("cannot write " + art("filtered.jsonl"));
                const FilterStats stats = filter_stream(
                    scored, [](const ScoredLine& s) { return s.score; },
                    [](const ScoredLine& s) { return s.doc.token_count; }, threshold,
                    [&](const ScoredLine& s) { out << document_to_json_line(s.doc) << '\n'; });
                dump_json_file(art("filter_stats.json"),
                               {{"docs_seen", stats.docs_seen},
                                {"docs_kept", stats.docs_kept},
                                {"tokens_seen", stats.tokens_seen},
                                {"tokens_kept", stats.tokens_kept},
                                {"token_fraction", stats.token_fraction()}});
              });
  }

  void decontam() {
    DecontamConfig dc;
    dc.ngram_min = static_cast<int>(cfg_.get_int("decontam.ngram_min", dc.ngram_min));
    dc.ngram_max = static_cast<int>(cfg_.get_int("decontam.ngram_max", dc.ngram_max));
    dc.excision_radius_chars =
        static_cast<int>(cfg_.get_int("decontam.excision_radius_chars", dc.excision_radius_chars));
    dc.max_splits = static_cast<int>(cfg_.get_int("decontam.max_splits", dc.max_splits));
    dc.common_ngram_skip_count =
        cfg_.get_u64("decontam.common_ngram_skip_count", dc.common_ngram_skip_count);
    run_stage("decontam", {art("filtered.jsonl"), art("benchmarks.jsonl")},
              {art("decontaminated.jsonl"), art("decontam_report.json")}, [&](RunManifest&) {
                const auto benchmarks = read_benchmarks_jsonl(art("benchmarks.jsonl"));
                std::vector<std::string> texts;
                texts.reserve(benchmarks.size());
                for (const auto& b : benchmarks) texts.push_back(b.rendered_text);
                const auto corpus = read_documents_jsonl(art("filtered.jsonl"));
                const auto index = build_index(texts, corpus, dc);
                std::ofstream out(art("decontaminated.jsonl"));
                if (!out) throw std::runtime_error("cannot write " + art("decontaminated.jsonl"));
                DecontamReport report;
                for (const auto& d : corpus) {
                  DecontamStats stats;
                  for (const auto& frag : decontaminate(d, index, &stats))
                    out << document_to_json_line(frag) << '\n';
                  ++report.docs_seen;
                  report.docs_modified += stats.modified ? 1 : 0;
                  report.docs_discarded += stats.discarded ? 1 : 0;
                  report.total_matches += stats.matches;
                }
                dump_json_file(art("decontam_report.json"),
                               {{"docs_seen", report.docs_seen},
                                {"docs_modified", report.docs_modified},
                                {"docs_discarded", report.docs_discarded},
                                {"total_matches", report.total_matches},
                                {"index_size", index.size()},
                                {"skip_set_size", index.skip_set_size()}});
              });
  }

 private:
  ResolvedConfig& cfg_;
  const PipelineOptions& opts_;
  PipelineResult& result_;
  std::string workdir_;
  std::string manifest_dir_;
};

}  // namespace

PipelineResult run_pipeline(const std::string& config_path, const PipelineOptions& opts,
                            const std::map<std::string, std::string>& flag_overrides) {
  ResolvedConfig cfg(parse_config_file(config_path), flag_overrides);
  const auto stages = split_list(cfg.require("stages"));
  if (stages.empty()) throw ConfigError("no stages configured");
  // stages must be a prefix of the dependency order
  if (stages.size() > kStageOrder.size()) throw ConfigError("too many stages");
  for (std::size_t i = 0; i < stages.size(); ++i)
    if (stages[i] != kStageOrder[i])
      throw ConfigError("stage \"" + stages[i] + "\" out of order; expected \"" + kStageOrder[i] +
                        "\" at position " + std::to_string(i + 1));

  PipelineResult result;
  PipelineRun run(cfg, opts, result);
  for (const auto& stage : stages) {
    if (stage == "ingest") run.ingest();
    else if (stage == "sample") run.sample();
    else if (stage == "build_targets") run.build_targets_stage();
    else if (stage == "rank") run.rank();
    else if (stage == "train_scorer") run.train_scorer();
    else if (stage == "score") run.score();
    else if (stage == "calibrate") run.calibrate();
    else if (stage == "filter") run.filter();
    else if (stage == "decontam") run.decontam();
  }
  return result;
}

}  // namespace betr
