#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "betr/corpus.hpp"
#include "betr/decontam.hpp"
#include "betr/embedding.hpp"
#include "betr/manifest.hpp"
#include "betr/pipeline.hpp"
#include "betr/ranker.hpp"
#include "betr/sampling.hpp"
#include "betr/scaling.hpp"
#include "betr/scorer.hpp"
#include "betr/selection.hpp"

namespace {

constexpr const char* kToolVersion = "betr 1.0.0";

using nlohmann::json;

struct Global {
  std::uint64_t seed = 0;
  int workers = 1;
  std::string manifest_dir;
  bool strict = false;
  std::vector<std::string> warnings;
};

void emit_manifest(const Global& g, const std::string& subcommand,
                   const std::map<std::string, std::string>& config,
                   const std::vector<std::string>& inputs, const std::vector<std::string>& outputs,
                   const std::vector<std::string>& warnings) {
  if (g.manifest_dir.empty()) return;
  std::filesystem::create_directories(g.manifest_dir);
  betr::RunManifest m;
  m.tool_version = kToolVersion;
  m.subcommand = subcommand;
  m.config = config;
  for (const auto& p : inputs) m.inputs[p] = betr::sha256_file(p);
  for (const auto& p : outputs) m.outputs[p] = betr::sha256_file(p);
  m.warnings = warnings;
  m.write(g.manifest_dir + "/" + subcommand + ".manifest.json");
}

std::vector<std::pair<std::string, std::string>> parse_pair_list(const std::string& s,
                                                                 char inner = ':') {
  std::vector<std::pair<std::string, std::string>> out;
  std::string item;
  auto flush = [&] {
    if (item.empty()) return;
    const auto sep = item.find(inner);
    if (sep == std::string::npos)
      throw std::invalid_argument("expected '" + std::string(1, inner) + "' in \"" + item + "\"");
    out.emplace_back(item.substr(0, sep), item.substr(sep + 1));
    item.clear();
  };
  for (char c : s) {
    if (c == ',')
      flush();
    else
      item += c;
  }
  flush();
  return out;
}

std::vector<std::string> parse_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  for (char c : s) {
    if (c == ',') {
      if (!item.empty()) out.push_back(item);
      item.clear();
    } else {
      item += c;
    }
  }
  if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<betr::ScoredDoc> scored_docs_from_jsonl(const std::string& path,
                                                    std::vector<betr::Document>* docs = nullptr) {
  std::vector<betr::ScoredDoc> out;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
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
    betr::ScoredDoc s;
    s.id = j.at("id").get<std::string>();
    s.score = j.at("score").get<double>();
    s.token_count = j.value("token_count", std::uint64_t{0});
    out.push_back(s);
    if (docs) {
      betr::Document d;
      d.id = s.id;
      d.text = j.value("text", std::string());
      d.token_count = s.token_count;
      if (j.contains("source") && !j["source"].is_null()) d.source = j["source"].get<std::string>();
      docs->push_back(std::move(d));
    }
  }
  return out;
}

std::vector<betr::LossPoint> loss_points(const std::vector<betr::RunRecord>& runs,
                                         const std::string& metric) {
  std::vector<betr::LossPoint> points;
  for (const auto& r : runs) {
    auto it = r.losses.find(metric);
    if (it == r.losses.end()) continue;
    points.push_back({r.n_params, r.tokens, it->second, 1.0});
  }
  if (points.empty()) throw std::invalid_argument("no runs carry loss metric \"" + metric + "\"");
  return points;
}

int finish(const Global& g) {
  for (const auto& w : g.warnings) std::cerr << "warning: " << w << "\n";
  return (!g.warnings.empty() && g.strict) ? 4 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"benchmark-targeted corpus ranking and scaling analysis"};
  app.require_subcommand(1);
  app.fallthrough();

  Global g;
  app.add_option("--seed", g.seed, "global rng seed");
  app.add_option("--workers", g.workers, "worker thread count");
  app.add_option("--manifest-dir", g.manifest_dir, "directory for run manifests");
  app.add_flag("--strict", g.strict, "escalate degenerate-result warnings to exit code 4");

  std::function<int()> action;

  // ingest
  {
    auto* sub = app.add_subcommand("ingest", "validate and normalize a document corpus");
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto benchmarks = std::make_shared<std::string>();
    auto out_benchmarks = std::make_shared<std::string>();
    sub->add_option("--in", *in, "input documents JSONL")->required();
    sub->add_option("--out", *out, "output documents JSONL")->required();
    sub->add_option("--benchmarks", *benchmarks, "input benchmarks JSONL");
    sub->add_option("--out-benchmarks", *out_benchmarks, "output benchmarks JSONL");
    sub->callback([&g, &action, in, out, benchmarks, out_benchmarks] {
      action = [&g, in, out, benchmarks, out_benchmarks] {
        const auto docs = betr::read_documents_jsonl(*in);
        betr::write_documents_jsonl(*out, docs);
        std::uint64_t tokens = 0;
        for (const auto& d : docs) tokens += d.token_count;
        json stats{{"documents", docs.size()}, {"tokens", tokens}};
        std::vector<std::string> inputs{*in}, outputs{*out};
        if (!benchmarks->empty()) {
          const auto bench = betr::read_benchmarks_jsonl(*benchmarks);
          stats["benchmark_examples"] = bench.size();
          inputs.push_back(*benchmarks);
          if (!out_benchmarks->empty()) {
            betr::write_benchmarks_jsonl(*out_benchmarks, bench);
            outputs.push_back(*out_benchmarks);
          }
        }
        std::cout << stats.dump() << "\n";
        emit_manifest(g, "ingest", {{"in", *in}, {"out", *out}}, inputs, outputs, {});
        return finish(g);
      };
    });
  }

  // sample
  {
    auto* sub = app.add_subcommand("sample", "seeded reservoir sample of document ids");
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto n = std::make_shared<std::size_t>(0);
    sub->add_option("--in", *in, "input documents JSONL")->required();
    sub->add_option("--n", *n, "sample size")->required();
    sub->add_option("--out", *out, "output sample manifest JSON")->required();
    sub->callback([&g, &action, in, out, n] {
      action = [&g, in, out, n] {
        betr::ReservoirSampler sampler(*n, g.seed);
        betr::for_each_document_jsonl(*in, betr::whitespace_token_count,
                                      [&](betr::Document&& d) { sampler.offer(d.id); });
        const auto manifest = sampler.finish();
        betr::write_manifest_json(*out, manifest);
        std::cout << json{{"pool_size", manifest.pool_size}, {"sample_size", manifest.sample_size}}
                         .dump()
                  << "\n";
        emit_manifest(g, "sample",
                      {{"in", *in}, {"n", std::to_string(*n)}, {"seed", std::to_string(g.seed)}},
                      {*in}, {*out}, {});
        return finish(g);
      };
    });
  }

  // build-targets
  {
    auto* sub = app.add_subcommand("build-targets", "build the target embedding set");
    auto benchmarks = std::make_shared<std::string>();
    auto embeddings = std::make_shared<std::string>();
    auto out_emb = std::make_shared<std::string>();
    auto out_meta = std::make_shared<std::string>();
    auto granularity = std::make_shared<std::string>("per_example");
    auto sampling = std::make_shared<std::string>("all_examples");
    auto kmeans_k = std::make_shared<int>(0);
    auto per_benchmark_m = std::make_shared<int>(0);
    sub->add_option("--benchmarks", *benchmarks, "benchmarks JSONL")->required();
    sub->add_option("--embeddings", *embeddings, "benchmark embedding file")->required();
    sub->add_option("--granularity", *granularity,
                    "per_example | per_benchmark_centroid | global_centroid | kmeans");
    sub->add_option("--sampling", *sampling, "all_examples | equal_per_benchmark");
    sub->add_option("--kmeans-k", *kmeans_k, "cluster count for kmeans granularity");
    sub->add_option("--per-benchmark-m", *per_benchmark_m, "examples per benchmark");
    sub->add_option("--out-embeddings", *out_emb, "output target embedding file")->required();
    sub->add_option("--out-meta", *out_meta, "output target metadata JSON")->required();
    sub->callback([&g, &action, benchmarks, embeddings, out_emb, out_meta, granularity, sampling,
                   kmeans_k, per_benchmark_m] {
      action = [&g, benchmarks, embeddings, out_emb, out_meta, granularity, sampling, kmeans_k,
                per_benchmark_m] {
        betr::TargetSetConfig tc;
        tc.granularity = betr::granularity_from_string(*granularity);
        tc.sampling = betr::sampling_from_string(*sampling);
        tc.kmeans_k = *kmeans_k;
        tc.per_benchmark_m = *per_benchmark_m;
        tc.seed = g.seed;
        const auto bench = betr::read_benchmarks_jsonl(*benchmarks);
        const auto store = betr::EmbeddingStore::load(*embeddings);
        const betr::TargetSet ts = betr::build_targets(bench, store, tc);
        betr::EmbeddingStore out(static_cast<int>(ts.embeddings.cols()), true);
        out.reserve(ts.targets.size());
        for (std::size_t i = 0; i < ts.targets.size(); ++i)
          out.add(ts.targets[i].target_id, ts.embeddings.row(static_cast<Eigen::Index>(i)));
        out.save(*out_emb);
        json meta{{"granularity", to_string(tc.granularity)},
                  {"sampling", to_string(tc.sampling)},
                  {"kmeans_k", tc.kmeans_k},
                  {"per_benchmark_m", tc.per_benchmark_m},
                  {"seed", tc.seed},
                  {"targets", json::array()}};
        for (const auto& t : ts.targets)
          meta["targets"].push_back({{"target_id", t.target_id}, {"benchmark_id", t.benchmark_id}});
        std::ofstream mf(*out_meta);
        if (!mf) throw std::runtime_error("cannot write " + *out_meta);
        mf << meta.dump(2) << "\n";
        mf.close();
        std::cout << json{{"targets", ts.targets.size()}}.dump() << "\n";
        emit_manifest(g, "build-targets",
                      {{"granularity", *granularity},
                       {"sampling", *sampling},
                       {"seed", std::to_string(g.seed)}},
                      {*benchmarks, *embeddings}, {*out_emb, *out_meta}, {});
        return finish(g);
      };
    });
  }

  // rank
  {
    auto* sub = app.add_subcommand("rank", "rank sampled documents against targets");
    auto embeddings = std::make_shared<std::string>();
    auto sample = std::make_shared<std::string>();
    auto targets_emb = std::make_shared<std::string>();
    auto targets_meta = std::make_shared<std::string>();
    auto value = std::make_shared<std::string>("log2_inv");
    auto aggregation = std::make_shared<std::string>("max");
    auto top_k = std::make_shared<int>(0);
    auto block_size = std::make_shared<int>(8192);
    auto label_fraction = std::make_shared<double>(0.1);
    auto out = std::make_shared<std::string>();
    auto diagnostics = std::make_shared<std::string>();
    sub->add_option("--embeddings", *embeddings, "document embedding file")->required();
    sub->add_option("--sample", *sample, "sample manifest JSON (default: all documents)");
    sub->add_option("--targets", *targets_emb, "target embedding file")->required();
    sub->add_option("--targets-meta", *targets_meta, "target metadata JSON")->required();
    sub->add_option("--value", *value, "log2_inv | inv");
    sub->add_option("--aggregation", *aggregation, "max | mean");
    sub->add_option("--top-k", *top_k, "0 = exact mode, > 0 = approximate top-k");
    sub->add_option("--block-size", *block_size, "documents per similarity tile");
    sub->add_option("--label-fraction", *label_fraction, "top fraction labeled positive");
    sub->add_option("--out", *out, "output scores JSONL")->required();
    sub->add_option("--diagnostics", *diagnostics, "optional diagnostics CSV");
    sub->callback([&g, &action, embeddings, sample, targets_emb, targets_meta, value, aggregation,
                   top_k, block_size, label_fraction, out, diagnostics] {
      action = [&g, embeddings, sample, targets_emb, targets_meta, value, aggregation, top_k,
                block_size, label_fraction, out, diagnostics] {
        betr::EmbeddingStore store = betr::EmbeddingStore::load(*embeddings);
        std::vector<std::string> inputs{*embeddings, *targets_emb, *targets_meta};
        if (!sample->empty()) {
          store = store.subset(betr::read_manifest_json(*sample).sampled_ids);
          inputs.push_back(*sample);
        }
        json meta;
        {
          std::ifstream mf(*targets_meta);
          if (!mf) throw std::runtime_error("cannot open " + *targets_meta);
          mf >> meta;
        }
        betr::TargetSet ts;
        ts.config.granularity =
            betr::granularity_from_string(meta.at("granularity").get<std::string>());
        ts.config.sampling = betr::sampling_from_string(meta.at("sampling").get<std::string>());
        ts.config.kmeans_k = meta.at("kmeans_k").get<int>();
        ts.config.per_benchmark_m = meta.at("per_benchmark_m").get<int>();
        ts.config.seed = meta.at("seed").get<std::uint64_t>();
        const auto tstore = betr::EmbeddingStore::load(*targets_emb);
        ts.embeddings = tstore.rows();
        for (const auto& tj : meta.at("targets"))
          ts.targets.push_back({tj.at("target_id").get<std::string>(),
                                tj.at("benchmark_id").get<std::string>()});
        betr::RankMatrixConfig rc;
        rc.top_k = *top_k;
        rc.block_size = *block_size;
        rc.workers = g.workers;
        const auto ranks = betr::rank_documents(store, ts, rc);
        const auto agg = betr::aggregation_from_string(*aggregation);
        const auto scores = betr::aggregate_scores(ranks, store, ts,
                                                   betr::value_kind_from_string(*value), agg);
        const auto labels = betr::label_top_fraction(scores, *label_fraction);
        betr::write_scores_jsonl(*out, scores, labels);
        std::vector<std::string> outputs{*out};
        if (!diagnostics->empty()) {
          betr::write_diagnostics_csv(*diagnostics,
                                      betr::selection_diagnostics(scores, *label_fraction));
          outputs.push_back(*diagnostics);
        }
        std::cout << json{{"documents", scores.size()}, {"targets", ts.targets.size()}}.dump()
                  << "\n";
        emit_manifest(g, "rank",
                      {{"value", *value},
                       {"aggregation", *aggregation},
                       {"top_k", std::to_string(*top_k)},
                       {"label_fraction", std::to_string(*label_fraction)},
                       {"workers", std::to_string(g.workers)}},
                      inputs, outputs, {});
        return finish(g);
      };
    });
  }

  // diagnostics
  {
    auto* sub = app.add_subcommand("diagnostics", "selection diagnostics from a score file");
    auto scores = std::make_shared<std::string>();
    auto fraction = std::make_shared<double>(0.1);
    auto bins = std::make_shared<int>(20);
    auto out = std::make_shared<std::string>();
    sub->add_option("--scores", *scores, "scores JSONL")->required();
    sub->add_option("--fraction", *fraction, "top fraction under study");
    sub->add_option("--bins", *bins, "histogram bin count");
    sub->add_option("--out", *out, "output CSV")->required();
    sub->callback([&g, &action, scores, fraction, bins, out] {
      action = [&g, scores, fraction, bins, out] {
        const auto records = betr::read_scores_jsonl(*scores);
        std::vector<betr::SelectionScore> ss;
        ss.reserve(records.size());
        for (const auto& r : records) ss.push_back(r.score);
        betr::SelectionDiagnostics diag;
        if (!ss.empty()) diag = betr::selection_diagnostics(ss, *fraction, *bins);
        betr::write_diagnostics_csv(*out, diag);
        emit_manifest(g, "diagnostics", {{"fraction", std::to_string(*fraction)}}, {*scores},
                      {*out}, {});
        return finish(g);
      };
    });
  }

  // train-scorer
  {
    auto* sub = app.add_subcommand("train-scorer", "distill rank labels into an n-gram classifier");
    auto corpus = std::make_shared<std::string>();
    auto scores = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto hyper = std::make_shared<betr::ScorerHyper>();
    auto holdout = std::make_shared<double>(0.1);
    auto no_balance = std::make_shared<bool>(false);
    sub->add_option("--corpus", *corpus, "documents JSONL with training texts")->required();
    sub->add_option("--scores", *scores, "labeled scores JSONL")->required();
    sub->add_option("--out", *out, "output model file")->required();
    sub->add_option("--lr", hyper->lr, "learning rate");
    sub->add_option("--dim", hyper->dim, "embedding dimension");
    sub->add_option("--epochs", hyper->epochs, "training epochs");
    sub->add_option("--min-count", hyper->min_count, "vocabulary frequency floor");
    sub->add_option("--ngram-order", hyper->ngram_order, "max n-gram order");
    sub->add_option("--bucket-count", hyper->bucket_count, "hash bucket count");
    sub->add_option("--window-size", hyper->window_size, "context window (config fidelity)");
    sub->add_option("--holdout-fraction", *holdout, "holdout share for accuracy");
    sub->add_flag("--no-balance", *no_balance, "skip downsample-majority balancing");
    sub->callback([&g, &action, corpus, scores, out, hyper, holdout, no_balance] {
      action = [&g, corpus, scores, out, hyper, holdout, no_balance] {
        const auto records = betr::read_scores_jsonl(*scores);
        std::unordered_map<std::string, bool> label_of;
        for (const auto& r : records) {
          if (!r.label) throw std::invalid_argument(*scores + ": missing labels");
          label_of[r.score.doc_id] = *r.label == betr::Label::Positive;
        }
        betr::TrainingSet ts;
        ts.holdout_fraction = *holdout;
        ts.balancing = *no_balance ? betr::Balancing::None : betr::Balancing::DownsampleMajority;
        betr::for_each_document_jsonl(*corpus, betr::whitespace_token_count,
                                      [&](betr::Document&& d) {
                                        auto it = label_of.find(d.id);
                                        if (it != label_of.end())
                                          ts.examples.push_back({std::move(d.text), it->second});
                                      });
        const auto model = betr::train_classifier(ts, *hyper, g.seed);
        model.save(*out);
        std::cout << json{{"holdout_accuracy", model.holdout_accuracy()},
                          {"examples", ts.examples.size()}}
                         .dump()
                  << "\n";
        emit_manifest(g, "train-scorer",
                      {{"lr", std::to_string(hyper->lr)},
                       {"dim", std::to_string(hyper->dim)},
                       {"epochs", std::to_string(hyper->epochs)},
                       {"seed", std::to_string(g.seed)}},
                      {*corpus, *scores}, {*out}, {});
        return finish(g);
      };
    });
  }

  // score
  {
    auto* sub = app.add_subcommand("score", "score a document stream with a trained model");
    auto model_path = std::make_shared<std::string>();
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    sub->add_option("--model", *model_path, "model file")->required();
    sub->add_option("--in", *in, "input documents JSONL")->required();
    sub->add_option("--out", *out, "output JSONL with scores")->required();
    sub->callback([&g, &action, model_path, in, out] {
      action = [&g, model_path, in, out] {
        const auto model = betr::NGramLinearClassifier::load(*model_path);
        std::ofstream os(*out);
        if (!os) throw std::runtime_error("cannot write " + *out);
        os.precision(10);
        std::size_t count = 0;
        betr::for_each_document_jsonl(*in, betr::whitespace_token_count, [&](betr::Document&& d) {
          json j = json::parse(betr::document_to_json_line(d));
          j["score"] = model.predict(d.text);
          os << j.dump() << "\n";
          ++count;
        });
        os.close();
        std::cout << json{{"documents", count}}.dump() << "\n";
        emit_manifest(g, "score", {{"model", *model_path}}, {*model_path, *in}, {*out}, {});
        return finish(g);
      };
    });
  }

  // calibrate
  {
    auto* sub = app.add_subcommand("calibrate", "pick the score threshold for a token budget");
    auto scores = std::make_shared<std::string>();
    auto target = std::make_shared<double>(0.1);
    auto holdout = std::make_shared<std::size_t>(100'000);
    auto out = std::make_shared<std::string>();
    sub->add_option("--scores", *scores, "scored documents JSONL")->required();
    sub->add_option("--target-fraction", *target, "token share to keep");
    sub->add_option("--holdout", *holdout, "calibration holdout size");
    sub->add_option("--out", *out, "output threshold JSON")->required();
    sub->callback([&g, &action, scores, target, holdout, out] {
      action = [&g, scores, target, holdout, out] {
        const auto all = scored_docs_from_jsonl(*scores);
        std::vector<std::string> ids;
        ids.reserve(all.size());
        std::unordered_map<std::string, const betr::ScoredDoc*> by_id;
        for (const auto& s : all) {
          ids.push_back(s.id);
          by_id[s.id] = &s;
        }
        const std::size_t n = std::min(*holdout, ids.size());
        std::vector<betr::ScoredDoc> pool;
        pool.reserve(n);
        for (const auto& id : betr::sample_ids(ids, n, g.seed).sampled_ids)
          pool.push_back(*by_id.at(id));
        auto cal = betr::calibrate_threshold(std::move(pool), *target);
        cal.seed = g.seed;
        if (cal.warning)
          g.warnings.push_back("calibration overshoot: achieved fraction " +
                               std::to_string(cal.achieved_fraction));
        const json result{{"target_fraction", cal.target_fraction},
                          {"holdout_size", cal.holdout_size},
                          {"threshold", cal.threshold},
                          {"achieved_fraction", cal.achieved_fraction},
                          {"seed", cal.seed},
                          {"warning", cal.warning}};
        std::ofstream os(*out);
        if (!os) throw std::runtime_error("cannot write " + *out);
        os << result.dump(2) << "\n";
        os.close();
        std::cout << result.dump() << "\n";
        emit_manifest(g, "calibrate",
                      {{"target_fraction", std::to_string(*target)},
                       {"holdout", std::to_string(*holdout)},
                       {"seed", std::to_string(g.seed)}},
                      {*scores}, {*out}, g.warnings);
        return finish(g);
      };
    });
  }

  // filter
  {
    auto* sub = app.add_subcommand("filter", "keep documents above the calibrated threshold");
    auto scores = std::make_shared<std::string>();
    auto target = std::make_shared<double>(0.1);
    auto holdout = std::make_shared<std::size_t>(100'000);
    auto threshold_opt = std::make_shared<double>(0.0);
    auto out = std::make_shared<std::string>();
    sub->add_option("--scores", *scores, "scored documents JSONL")->required();
    sub->add_option("--target-fraction", *target, "token share to keep");
    sub->add_option("--holdout", *holdout, "calibration holdout size");
    auto* thr = sub->add_option("--threshold", *threshold_opt, "skip calibration, use this cut");
    sub->add_option("--out", *out, "output filtered documents JSONL")->required();
    sub->callback([&g, &action, scores, target, holdout, threshold_opt, thr, out] {
      action = [&g, scores, target, holdout, threshold_opt, thr, out] {
        std::vector<betr::Document> docs;
        const auto all = scored_docs_from_jsonl(*scores, &docs);
        double threshold = *threshold_opt;
        json cal_json;
        if (thr->count() == 0) {
          std::vector<std::string> ids;
          ids.reserve(all.size());
          for (const auto& s : all) ids.push_back(s.id);
          std::unordered_map<std::string, const betr::ScoredDoc*> by_id;
          for (const auto& s : all) by_id[s.id] = &s;
          const std::size_t n = std::min(*holdout, ids.size());
          std::vector<betr::ScoredDoc> pool;
          pool.reserve(n);
          for (const auto& id : betr::sample_ids(ids, n, g.seed).sampled_ids)
            pool.push_back(*by_id.at(id));
          auto cal = betr::calibrate_threshold(std::move(pool), *target);
          threshold = cal.threshold;
          if (cal.warning)
            g.warnings.push_back("calibration overshoot: achieved fraction " +
                                 std::to_string(cal.achieved_fraction));
          cal_json = {{"threshold", cal.threshold},
                      {"achieved_fraction", cal.achieved_fraction},
                      {"holdout_size", cal.holdout_size}};
        }
        std::ofstream os(*out);
        if (!os) throw std::runtime_error("cannot write " + *out);
        const betr::FilterStats stats = [&] {
          struct Pair {
            const betr::ScoredDoc* s;
            const betr::Document* d;
          };
          std::vector<Pair> pairs;
          pairs.reserve(all.size());
          for (std::size_t i = 0; i < all.size(); ++i) pairs.push_back({&all[i], &docs[i]});
          return betr::filter_stream(
              pairs, [](const Pair& p) { return p.s->score; },
              [](const Pair& p) { return p.s->token_count; }, threshold,
              [&](const Pair& p) { os << betr::document_to_json_line(*p.d) << "\n"; });
        }();
        os.close();
        json result{{"threshold", threshold},
                    {"docs_seen", stats.docs_seen},
                    {"docs_kept", stats.docs_kept},
                    {"tokens_seen", stats.tokens_seen},
                    {"tokens_kept", stats.tokens_kept},
                    {"token_fraction", stats.token_fraction()}};
        if (!cal_json.is_null()) result["calibration"] = cal_json;
        std::cout << result.dump() << "\n";
        emit_manifest(g, "filter",
                      {{"target_fraction", std::to_string(*target)},
                       {"threshold", std::to_string(threshold)},
                       {"seed", std::to_string(g.seed)}},
                      {*scores}, {*out}, g.warnings);
        return finish(g);
      };
    });
  }

  // decontam
  {
    auto* sub = app.add_subcommand("decontam", "excise benchmark n-gram overlap from a corpus");
    auto benchmarks = std::make_shared<std::string>();
    auto corpus = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto report_path = std::make_shared<std::string>();
    auto cfg = std::make_shared<betr::DecontamConfig>();
    sub->add_option("--benchmarks", *benchmarks, "benchmarks JSONL")->required();
    sub->add_option("--corpus", *corpus, "input documents JSONL")->required();
    sub->add_option("--out", *out, "output documents JSONL")->required();
    sub->add_option("--report", *report_path, "output report JSON")->required();
    sub->add_option("--ngram-min", cfg->ngram_min, "minimum n-gram length");
    sub->add_option("--ngram-max", cfg->ngram_max, "maximum n-gram length");
    sub->add_option("--radius", cfg->excision_radius_chars, "excision radius in characters");
    sub->add_option("--max-splits", cfg->max_splits, "discard documents above this split count");
    sub->add_option("--skip-count", cfg->common_ngram_skip_count,
                    "skip n-grams above this corpus frequency");
    sub->callback([&g, &action, benchmarks, corpus, out, report_path, cfg] {
      action = [&g, benchmarks, corpus, out, report_path, cfg] {
        const auto bench = betr::read_benchmarks_jsonl(*benchmarks);
        std::vector<std::string> texts;
        texts.reserve(bench.size());
        for (const auto& b : bench) texts.push_back(b.rendered_text);
        const auto docs = betr::read_documents_jsonl(*corpus);
        const auto index = betr::build_index(texts, docs, *cfg);

        // per-benchmark attribution: each indexed n-gram maps to the first
        // benchmark that contributed it
        std::unordered_map<std::string, std::string> bench_of;
        for (const auto& b : bench) {
          const auto toks = betr::normalize_tokens(b.rendered_text);
          for (int n = cfg->ngram_min; n <= cfg->ngram_max; ++n) {
            for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= toks.size(); ++i) {
              std::string key = toks[i].text;
              for (int j = 1; j < n; ++j) key += ' ' + toks[i + static_cast<std::size_t>(j)].text;
              if (index.contains(key)) bench_of.emplace(key, b.benchmark_id);
            }
          }
        }

        std::ofstream os(*out);
        if (!os) throw std::runtime_error("cannot write " + *out);
        betr::DecontamReport report;
        std::map<std::string, std::size_t> per_benchmark;
        for (const auto& d : docs) {
          betr::DecontamStats stats;
          for (const auto& frag : betr::decontaminate(d, index, &stats))
            os << betr::document_to_json_line(frag) << "\n";
          ++report.docs_seen;
          report.docs_modified += stats.modified ? 1 : 0;
          report.docs_discarded += stats.discarded ? 1 : 0;
          report.total_matches += stats.matches;
          if (stats.matches > 0) {
            const auto toks = betr::normalize_tokens(d.text);
            for (int n = cfg->ngram_min; n <= cfg->ngram_max; ++n) {
              for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= toks.size(); ++i) {
                std::string key = toks[i].text;
                for (int j = 1; j < n; ++j)
                  key += ' ' + toks[i + static_cast<std::size_t>(j)].text;
                auto it = bench_of.find(key);
                if (it != bench_of.end()) ++per_benchmark[it->second];
              }
            }
          }
        }
        os.close();
        json report_json{{"docs_seen", report.docs_seen},
                         {"docs_modified", report.docs_modified},
                         {"docs_discarded", report.docs_discarded},
                         {"total_matches", report.total_matches},
                         {"index_size", index.size()},
                         {"skip_set_size", index.skip_set_size()},
                         {"per_benchmark_matches", per_benchmark}};
        std::ofstream rf(*report_path);
        if (!rf) throw std::runtime_error("cannot write " + *report_path);
        rf << report_json.dump(2) << "\n";
        rf.close();
        std::cout << report_json.dump() << "\n";
        emit_manifest(g, "decontam",
                      {{"ngram_min", std::to_string(cfg->ngram_min)},
                       {"ngram_max", std::to_string(cfg->ngram_max)},
                       {"radius", std::to_string(cfg->excision_radius_chars)}},
                      {*benchmarks, *corpus}, {*out, *report_path}, {});
        return finish(g);
      };
    });
  }

  // fit-loss
  {
    auto* sub = app.add_subcommand("fit-loss", "fit the parametric loss law to training runs");
    auto runs = std::make_shared<std::string>();
    auto metric = std::make_shared<std::string>();
    auto bootstrap = std::make_shared<int>(0);
    auto weighting = std::make_shared<std::string>("none");
    auto bins_per_decade = std::make_shared<int>(1);
    auto huber_delta = std::make_shared<double>(1e-3);
    auto out = std::make_shared<std::string>();
    sub->add_option("--runs", *runs, "runs CSV")->required();
    sub->add_option("--metric", *metric, "loss metric name")->required();
    sub->add_option("--bootstrap", *bootstrap, "bootstrap refit count");
    sub->add_option("--weighting", *weighting, "none | inverse_density");
    sub->add_option("--bins-per-decade", *bins_per_decade, "FLOPs bins per decade for weighting");
    sub->add_option("--huber-delta", *huber_delta, "huber transition point");
    sub->add_option("--out", *out, "output fit JSON")->required();
    sub->callback([&g, &action, runs, metric, bootstrap, weighting, bins_per_decade, huber_delta,
                   out] {
      action = [&g, runs, metric, bootstrap, weighting, bins_per_decade, huber_delta, out] {
        auto points = loss_points(betr::read_runs_csv(*runs), *metric);
        if (*weighting == "inverse_density") {
          const auto w = betr::inverse_density_weights(points, *bins_per_decade);
          for (std::size_t i = 0; i < points.size(); ++i) points[i].weight = w[i];
        } else if (*weighting != "none") {
          throw std::invalid_argument("unknown weighting \"" + *weighting + "\"");
        }
        betr::LossFitOptions opts;
        opts.huber_delta = *huber_delta;
        opts.bootstrap_n = *bootstrap;
        opts.seed = g.seed;
        const auto fit = betr::fit_loss_law(points, opts);
        betr::write_loss_fit_json(*out, fit);
        if (fit.span_warning)
          g.warnings.push_back("narrow run coverage: fewer than 6 runs or under one decade span");
        std::cout << json{{"A", fit.params.A()},     {"B", fit.params.B()},
                          {"E", fit.params.E()},     {"alpha", fit.params.alpha},
                          {"beta", fit.params.beta}, {"fit_mae", fit.fit_mae},
                          {"bootstrap", fit.bootstrap.size()}}
                         .dump()
                  << "\n";
        emit_manifest(g, "fit-loss",
                      {{"metric", *metric},
                       {"bootstrap", std::to_string(*bootstrap)},
                       {"weighting", *weighting},
                       {"seed", std::to_string(g.seed)}},
                      {*runs}, {*out}, g.warnings);
        return finish(g);
      };
    });
  }

  // fit-acc
  {
    auto* sub = app.add_subcommand("fit-acc", "fit the sigmoid accuracy law to training runs");
    auto runs = std::make_shared<std::string>();
    auto loss_metric = std::make_shared<std::string>();
    auto benchmark = std::make_shared<std::string>();
    auto bootstrap = std::make_shared<int>(0);
    auto out = std::make_shared<std::string>();
    sub->add_option("--runs", *runs, "runs CSV")->required();
    sub->add_option("--loss-metric", *loss_metric, "loss metric paired with accuracy")->required();
    sub->add_option("--benchmark", *benchmark, "benchmark accuracy name")->required();
    sub->add_option("--bootstrap", *bootstrap, "bootstrap refit count");
    sub->add_option("--out", *out, "output fit JSON")->required();
    sub->callback([&g, &action, runs, loss_metric, benchmark, bootstrap, out] {
      action = [&g, runs, loss_metric, benchmark, bootstrap, out] {
        std::vector<betr::AccPoint> points;
        for (const auto& r : betr::read_runs_csv(*runs)) {
          auto li = r.losses.find(*loss_metric);
          auto ai = r.accuracies.find(*benchmark);
          if (li != r.losses.end() && ai != r.accuracies.end())
            points.push_back({li->second, ai->second});
        }
        if (points.empty())
          throw std::invalid_argument("no runs carry both \"" + *loss_metric + "\" and \"" +
                                      *benchmark + "\"");
        betr::SigmoidFitOptions opts;
        opts.bootstrap_n = *bootstrap;
        opts.seed = g.seed;
        const auto fit = betr::fit_sigmoid(points, opts);
        betr::write_sigmoid_fit_json(*out, fit);
        std::cout << json{{"c1", fit.params.c1}, {"c2", fit.params.c2},
                          {"k", fit.params.k},   {"L0", fit.params.L0},
                          {"fit_mae", fit.fit_mae}, {"bootstrap", fit.bootstrap.size()}}
                         .dump()
                  << "\n";
        emit_manifest(g, "fit-acc",
                      {{"loss_metric", *loss_metric},
                       {"benchmark", *benchmark},
                       {"bootstrap", std::to_string(*bootstrap)},
                       {"seed", std::to_string(g.seed)}},
                      {*runs}, {*out}, {});
        return finish(g);
      };
    });
  }

  // predict
  {
    auto* sub = app.add_subcommand("predict", "evaluate fitted laws at (N, D)");
    auto loss_fit = std::make_shared<std::string>();
    auto acc_fit = std::make_shared<std::string>();
    auto n = std::make_shared<double>(0.0);
    auto d = std::make_shared<double>(0.0);
    sub->add_option("--loss-fit", *loss_fit, "loss fit JSON")->required();
    sub->add_option("--acc-fit", *acc_fit, "sigmoid fit JSON for two-step accuracy");
    sub->add_option("--n", *n, "parameter count")->required();
    sub->add_option("--d", *d, "token count")->required();
    sub->callback([&g, &action, loss_fit, acc_fit, n, d] {
      action = [&g, loss_fit, acc_fit, n, d] {
        const auto lf = betr::read_loss_fit_json(*loss_fit);
        json result{{"n", *n}, {"d", *d}, {"loss", betr::predict_loss(lf.params, *n, *d)}};
        if (!acc_fit->empty()) {
          const auto sf = betr::read_sigmoid_fit_json(*acc_fit);
          result["accuracy"] = betr::predict_accuracy(lf.params, sf.params, *n, *d);
        }
        std::cout << result.dump() << "\n";
        return finish(g);
      };
    });
  }

  // curve
  {
    auto* sub = app.add_subcommand("curve", "compute-optimal curve from fitted laws");
    auto loss_fit = std::make_shared<std::string>();
    auto benchmark_fits = std::make_shared<std::string>();
    auto flops_lo = std::make_shared<double>(1e18);
    auto flops_hi = std::make_shared<double>(1e23);
    auto points = std::make_shared<int>(40);
    auto out = std::make_shared<std::string>();
    auto csv = std::make_shared<std::string>();
    sub->add_option("--loss-fit", *loss_fit, "loss fit JSON (validation loss)")->required();
    sub->add_option("--benchmark-fits", *benchmark_fits,
                    "comma list of lossfit.json:sigfit.json pairs for an accuracy curve");
    sub->add_option("--flops-lo", *flops_lo, "compute grid lower bound");
    sub->add_option("--flops-hi", *flops_hi, "compute grid upper bound");
    sub->add_option("--points", *points, "compute grid size");
    sub->add_option("--out", *out, "output curve JSON")->required();
    sub->add_option("--csv", *csv, "optional plot-ready CSV");
    sub->callback([&g, &action, loss_fit, benchmark_fits, flops_lo, flops_hi, points, out, csv] {
      action = [&g, loss_fit, benchmark_fits, flops_lo, flops_hi, points, out, csv] {
        const auto lf = betr::read_loss_fit_json(*loss_fit);
        betr::CurveOptions opts{*flops_lo, *flops_hi, *points};
        betr::ComputeOptimalCurve curve;
        std::vector<std::string> inputs{*loss_fit};
        if (benchmark_fits->empty()) {
          curve = betr::compute_optimal_loss_curve(lf, opts);
        } else {
          std::vector<betr::BenchmarkFits> fits;
          for (const auto& [lpath, spath] : parse_pair_list(*benchmark_fits)) {
            fits.push_back({betr::read_loss_fit_json(lpath), betr::read_sigmoid_fit_json(spath)});
            inputs.push_back(lpath);
            inputs.push_back(spath);
          }
          curve = betr::compute_optimal_accuracy_curve(lf, fits, opts);
        }
        betr::write_curve_json(*out, curve);
        std::vector<std::string> outputs{*out};
        if (!csv->empty()) {
          betr::write_curve_csv(*csv, curve);
          outputs.push_back(*csv);
        }
        std::cout << json{{"points", curve.points.size()},
                          {"ensemble", curve.ensemble_values.size()}}
                         .dump()
                  << "\n";
        emit_manifest(g, "curve",
                      {{"flops_lo", std::to_string(*flops_lo)},
                       {"flops_hi", std::to_string(*flops_hi)},
                       {"points", std::to_string(*points)}},
                      inputs, outputs, {});
        return finish(g);
      };
    });
  }

  // cm
  {
    auto* sub = app.add_subcommand("cm", "compute multiplier between two accuracy curves");
    auto baseline = std::make_shared<std::string>();
    auto method = std::make_shared<std::string>();
    auto bin_width = std::make_shared<double>(0.0025);
    sub->add_option("--baseline", *baseline, "baseline curve JSON")->required();
    sub->add_option("--method", *method, "method curve JSON")->required();
    sub->add_option("--bin-width", *bin_width, "accuracy bin width");
    sub->callback([&g, &action, baseline, method, bin_width] {
      action = [&g, baseline, method, bin_width] {
        const double cm = betr::compute_multiplier(betr::read_curve_json(*baseline),
                                                   betr::read_curve_json(*method), *bin_width);
        std::cout << json{{"cm", cm}}.dump() << "\n";
        emit_manifest(g, "cm", {{"bin_width", std::to_string(*bin_width)}}, {*baseline, *method},
                      {}, {});
        return finish(g);
      };
    });
  }

  // fit-fopt
  {
    auto* sub = app.add_subcommand("fit-fopt", "optimal filtering fraction law from curves");
    auto curves = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    sub->add_option("--curves", *curves, "comma list of fraction:curve.json pairs")->required();
    sub->add_option("--out", *out, "output law JSON")->required();
    sub->callback([&g, &action, curves, out] {
      action = [&g, curves, out] {
        std::vector<std::pair<double, betr::ComputeOptimalCurve>> by_fraction;
        std::vector<std::string> inputs;
        for (const auto& [frac, path] : parse_pair_list(*curves)) {
          by_fraction.emplace_back(std::stod(frac), betr::read_curve_json(path));
          inputs.push_back(path);
        }
        const auto result = betr::fit_optimal_filter_law(by_fraction);
        if (result.law.flat_warning)
          g.warnings.push_back("optimal-fraction track is flat; exponent unidentifiable");
        json j{{"coefficient", result.law.coefficient},
               {"exponent", result.law.exponent},
               {"flat_warning", result.law.flat_warning},
               {"grid_flops", result.grid_flops},
               {"fractions", result.fractions},
               {"probabilities", result.probabilities},
               {"argmax_fraction", result.argmax_fraction}};
        std::ofstream os(*out);
        if (!os) throw std::runtime_error("cannot write " + *out);
        os << j.dump(2) << "\n";
        os.close();
        std::cout << json{{"coefficient", result.law.coefficient},
                          {"exponent", result.law.exponent},
                          {"flat_warning", result.law.flat_warning}}
                         .dump()
                  << "\n";
        emit_manifest(g, "fit-fopt", {{"curves", *curves}}, inputs, {*out}, g.warnings);
        return finish(g);
      };
    });
  }

  // batch-size
  {
    auto* sub = app.add_subcommand("batch-size", "critical batch size for a token budget");
    auto tokens = std::make_shared<double>(0.0);
    sub->add_option("--tokens", *tokens, "training token count")->required();
    sub->callback([&g, &action, tokens] {
      action = [&g, tokens] {
        std::cout << json{{"tokens", *tokens}, {"batch_size", betr::select_batch_size(*tokens)}}
                         .dump()
                  << "\n";
        return finish(g);
      };
    });
  }

  // report
  {
    auto* sub = app.add_subcommand("report", "plot-ready CSV bundles from analysis artifacts");
    auto curve = std::make_shared<std::string>();
    auto curve_out = std::make_shared<std::string>();
    auto cm_curves = std::make_shared<std::string>();
    auto cm_out = std::make_shared<std::string>();
    auto fopt = std::make_shared<std::string>();
    auto fopt_prefix = std::make_shared<std::string>();
    auto scores = std::make_shared<std::string>();
    auto fraction = std::make_shared<double>(0.1);
    auto diag_out = std::make_shared<std::string>();
    sub->add_option("--curve", *curve, "curve JSON to flatten");
    sub->add_option("--curve-out", *curve_out, "output curve CSV");
    sub->add_option("--cm-curves", *cm_curves, "comma list of curve JSONs for the CM matrix");
    sub->add_option("--cm-out", *cm_out, "output CM matrix CSV");
    sub->add_option("--fopt", *fopt, "optimal-fraction law JSON");
    sub->add_option("--fopt-prefix", *fopt_prefix, "output prefix for fopt CSVs");
    sub->add_option("--scores", *scores, "scores JSONL for distribution diagnostics");
    sub->add_option("--fraction", *fraction, "top fraction for score diagnostics");
    sub->add_option("--diag-out", *diag_out, "output diagnostics CSV");
    sub->callback([&g, &action, curve, curve_out, cm_curves, cm_out, fopt, fopt_prefix, scores,
                   fraction, diag_out] {
      action = [&g, curve, curve_out, cm_curves, cm_out, fopt, fopt_prefix, scores, fraction,
                diag_out] {
        std::vector<std::string> inputs, outputs;
        bool did_anything = false;
        if (!curve->empty()) {
          if (curve_out->empty()) throw std::invalid_argument("--curve requires --curve-out");
          betr::write_curve_csv(*curve_out, betr::read_curve_json(*curve));
          inputs.push_back(*curve);
          outputs.push_back(*curve_out);
          did_anything = true;
        }
        if (!cm_curves->empty()) {
          if (cm_out->empty()) throw std::invalid_argument("--cm-curves requires --cm-out");
          const auto paths = parse_list(*cm_curves);
          std::vector<betr::ComputeOptimalCurve> cs;
          for (const auto& p : paths) {
            cs.push_back(betr::read_curve_json(p));
            inputs.push_back(p);
          }
          std::ofstream os(*cm_out);
          if (!os) throw std::runtime_error("cannot write " + *cm_out);
          os.precision(10);
          os << "baseline";
          for (const auto& p : paths) os << ',' << p;
          os << "\n";
          for (std::size_t i = 0; i < cs.size(); ++i) {
            os << paths[i];
            for (std::size_t j = 0; j < cs.size(); ++j)
              os << ',' << (i == j ? 1.0 : betr::compute_multiplier(cs[i], cs[j]));
            os << "\n";
          }
          outputs.push_back(*cm_out);
          did_anything = true;
        }
        if (!fopt->empty()) {
          if (fopt_prefix->empty()) throw std::invalid_argument("--fopt requires --fopt-prefix");
          std::ifstream in(*fopt);
          if (!in) throw std::runtime_error("cannot open " + *fopt);
          json j;
          in >> j;
          const auto grid = j.at("grid_flops").get<std::vector<double>>();
          const auto fractions = j.at("fractions").get<std::vector<double>>();
          const auto probs = j.at("probabilities").get<std::vector<std::vector<double>>>();
          const auto argmax = j.at("argmax_fraction").get<std::vector<double>>();
          {
            std::ofstream os(*fopt_prefix + "_probabilities.csv");
            if (!os) throw std::runtime_error("cannot write " + *fopt_prefix + "_probabilities.csv");
            os.precision(10);
            os << "compute";
            for (double f : fractions) os << ",p_" << f;
            os << ",argmax_fraction\n";
            for (std::size_t i = 0; i < grid.size(); ++i) {
              os << grid[i];
              for (double p : probs[i]) os << ',' << p;
              os << ',' << argmax[i] << "\n";
            }
          }
          {
            std::ofstream os(*fopt_prefix + "_law.csv");
            if (!os) throw std::runtime_error("cannot write " + *fopt_prefix + "_law.csv");
            os.precision(10);
            os << "coefficient,exponent,flat_warning\n";
            os << j.at("coefficient").get<double>() << ',' << j.at("exponent").get<double>() << ','
               << (j.at("flat_warning").get<bool>() ? 1 : 0) << "\n";
          }
          inputs.push_back(*fopt);
          outputs.push_back(*fopt_prefix + "_probabilities.csv");
          outputs.push_back(*fopt_prefix + "_law.csv");
          did_anything = true;
        }
        if (!scores->empty()) {
          if (diag_out->empty()) throw std::invalid_argument("--scores requires --diag-out");
          const auto records = betr::read_scores_jsonl(*scores);
          std::vector<betr::SelectionScore> ss;
          ss.reserve(records.size());
          for (const auto& r : records) ss.push_back(r.score);
          betr::SelectionDiagnostics diag;
          if (!ss.empty()) diag = betr::selection_diagnostics(ss, *fraction);
          betr::write_diagnostics_csv(*diag_out, diag);
          inputs.push_back(*scores);
          outputs.push_back(*diag_out);
          did_anything = true;
        }
        if (!did_anything)
          throw std::invalid_argument("report: no artifacts requested; see --help");
        emit_manifest(g, "report", {}, inputs, outputs, {});
        return finish(g);
      };
    });
  }

  // run
  {
    auto* sub = app.add_subcommand("run", "execute a configured pipeline end to end");
    auto config = std::make_shared<std::string>();
    auto sets = std::make_shared<std::vector<std::string>>();
    sub->add_option("--config", *config, "pipeline key=value config file")->required();
    sub->add_option("--set", *sets, "override a config key (key=value, repeatable)");
    sub->callback([&g, &action, config, sets, &app] {
      action = [&g, config, sets, &app] {
        std::map<std::string, std::string> overrides;
        for (const auto& kv : *sets) {
          const auto eq = kv.find('=');
          if (eq == std::string::npos)
            throw std::invalid_argument("--set expects key=value, got \"" + kv + "\"");
          overrides[kv.substr(0, eq)] = kv.substr(eq + 1);
        }
        if (app.count("--seed")) overrides["seed"] = std::to_string(g.seed);
        if (app.count("--workers")) overrides["workers"] = std::to_string(g.workers);
        betr::PipelineOptions opts;
        opts.manifest_dir = g.manifest_dir;
        opts.strict = g.strict;
        opts.tool_version = kToolVersion;
        const auto result = betr::run_pipeline(*config, opts, overrides);
        for (const auto& w : result.warnings) g.warnings.push_back(w);
        std::cout << json{{"stages_run", result.stages_run},
                          {"warnings", result.warnings.size()}}
                         .dump()
                  << "\n";
        return finish(g);
      };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    return action();
  } catch (const betr::StageError& e) {
    json err{{"stage", e.stage_name}, {"error", e.what()}, {"inputs", e.inputs}};
    std::cerr << err.dump() << "\n";
    return 3;
  } catch (const betr::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const betr::CorpusError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
