#include "betr/sampling.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace betr {

SampleManifest ReservoirSampler::finish() const {
  if (seen_ < n_)
    throw std::invalid_argument("sample size " + std::to_string(n_) + " exceeds pool size " +
                                std::to_string(seen_));
  SampleManifest m;
  m.seed = seed_;
  m.pool_size = seen_;
  m.sample_size = n_;
  m.sampled_ids = reservoir_;
  return m;
}

SampleManifest sample_ids(const std::vector<std::string>& ids, std::size_t n, std::uint64_t seed) {
  ReservoirSampler sampler(n, seed);
  for (const auto& id : ids) sampler.offer(id);
  return sampler.finish();
}

void write_manifest_json(const std::string& path, const SampleManifest& m) {
  nlohmann::json j;
  j["seed"] = m.seed;
  j["pool_size"] = m.pool_size;
  j["sample_size"] = m.sample_size;
  j["sampled_ids"] = m.sampled_ids;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

SampleManifest read_manifest_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  in >> j;
  SampleManifest m;
  m.seed = j.at("seed").get<std::uint64_t>();
  m.pool_size = j.at("pool_size").get<std::size_t>();
  m.sample_size = j.at("sample_size").get<std::size_t>();
  m.sampled_ids = j.at("sampled_ids").get<std::vector<std::string>>();
  return m;
}

}  // namespace betr
