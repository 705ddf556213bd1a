#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "betr/manifest.hpp"

namespace betr {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// TOML-style key=value file. Section headers prefix keys as "section.key".
// Comments (#) and blank lines are skipped.
std::map<std::string, std::string> parse_config_file(const std::string& path);

// Resolution order: flag > env > file > default. Env vars are looked up as
// BETR_<KEY> with dots replaced by underscores, uppercased.
class ResolvedConfig {
 public:
  ResolvedConfig() = default;
  explicit ResolvedConfig(std::map<std::string, std::string> file_values,
                          std::map<std::string, std::string> flag_values = {});

  std::string get(const std::string& key, const std::string& fallback);
  std::string require(const std::string& key);
  double get_double(const std::string& key, double fallback);
  std::int64_t get_int(const std::string& key, std::int64_t fallback);
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback);
  bool has(const std::string& key) const;

  // Every key touched so far with its resolved value, defaults materialized.
  const std::map<std::string, std::string>& resolved() const { return resolved_; }
  // Keys present in the file but never consumed by any stage.
  std::vector<std::string> unused_file_keys() const;

 private:
  std::map<std::string, std::string> file_;
  std::map<std::string, std::string> flags_;
  std::map<std::string, std::string> resolved_;
};

struct PipelineOptions {
  std::string manifest_dir;  // defaults to <workdir>/manifests
  bool strict = false;
  std::string tool_version;
};

class StageError : public std::runtime_error {
 public:
  StageError(const std::string& stage, const std::string& msg,
             std::map<std::string, std::string> input_digests)
      : std::runtime_error("stage " + stage + ": " + msg),
        stage_name(stage),
        inputs(std::move(input_digests)) {}

  std::string stage_name;
  std::map<std::string, std::string> inputs;
};

struct PipelineResult {
  std::vector<std::string> stages_run;
  std::vector<RunManifest> manifests;
  std::vector<std::string> warnings;
};

// Executes the configured stage prefix of:
//   ingest, sample, build_targets, rank, train_scorer, score, calibrate,
//   filter, decontam
// Each stage writes its artifacts under <workdir> and a manifest under the
// manifest dir. A stage failure halts the run; completed manifests remain.
PipelineResult run_pipeline(const std::string& config_path, const PipelineOptions& opts = {},
                            const std::map<std::string, std::string>& flag_overrides = {});

}  // namespace betr
