#pragma once

#include <map>
#include <string>
#include <vector>

namespace betr {

// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);
std::string sha256_bytes(const std::string& bytes);

struct RunManifest {
  std::string tool_version;
  std::string subcommand;
  std::map<std::string, std::string> config;   // fully resolved, defaults materialized
  std::map<std::string, std::string> inputs;   // path -> digest
  std::map<std::string, std::string> outputs;  // path -> digest
  std::vector<std::string> warnings;
  double elapsed_seconds = 0.0;

  void write(const std::string& path) const;
  static RunManifest read(const std::string& path);
};

}  // namespace betr
