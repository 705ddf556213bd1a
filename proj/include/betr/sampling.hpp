#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "betr/rng.hpp"

namespace betr {

struct SampleManifest {
  std::uint64_t seed = 0;
  std::size_t pool_size = 0;
  std::size_t sample_size = 0;
  std::vector<std::string> sampled_ids;
};

// Single-pass reservoir sample without replacement over an id stream.
// Deterministic for a given (seed, input order).
class ReservoirSampler {
 public:
  ReservoirSampler(std::size_t n, std::uint64_t seed) : n_(n), seed_(seed), rng_(seed) {
    reservoir_.reserve(n);
  }

  void offer(const std::string& id) {
    if (seen_ < n_) {
      reservoir_.push_back(id);
    } else {
      const std::uint64_t j = rng_.next_below(seen_ + 1);
      if (j < n_) reservoir_[j] = id;
    }
    ++seen_;
  }

  std::size_t seen() const { return seen_; }

  // Throws if fewer than n ids were offered.
  SampleManifest finish() const;

 private:
  std::size_t n_;
  std::uint64_t seed_;
  Rng rng_;
  std::size_t seen_ = 0;
  std::vector<std::string> reservoir_;
};

SampleManifest sample_ids(const std::vector<std::string>& ids, std::size_t n, std::uint64_t seed);

void write_manifest_json(const std::string& path, const SampleManifest& m);
SampleManifest read_manifest_json(const std::string& path);

}  // namespace betr
