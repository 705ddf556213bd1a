#include "betr/embedding.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace betr {

namespace {
constexpr char kMagic[8] = {'B', 'E', 'T', 'R', 'E', 'M', 'B', '1'};
}

void EmbeddingStore::reserve(std::size_t n) {
  ids_.reserve(n);
  index_.reserve(n);
  if (rows_.rows() < static_cast<Eigen::Index>(n)) {
    MatrixXf grown(static_cast<Eigen::Index>(n), dim_);
    grown.topRows(rows_.rows()) = rows_;
    rows_.swap(grown);
  }
}

void EmbeddingStore::add(const std::string& id, const Eigen::VectorXf& row) {
  if (row.size() != dim_) throw EmbeddingError("row dim mismatch for id " + id);
  if (!row.allFinite()) throw EmbeddingError("non-finite embedding for id " + id);
  if (index_.count(id)) throw EmbeddingError("duplicate embedding id " + id);
  const Eigen::Index r = static_cast<Eigen::Index>(ids_.size());
  if (rows_.rows() <= r) {
    MatrixXf grown(std::max<Eigen::Index>(8, rows_.rows() * 2), dim_);
    grown.topRows(rows_.rows()) = rows_;
    rows_.swap(grown);
  }
  rows_.row(r) = row.transpose();
  index_.emplace(id, r);
  ids_.push_back(id);
}

Eigen::Index EmbeddingStore::row_of(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw EmbeddingError("no embedding for id " + id);
  return it->second;
}

void EmbeddingStore::normalize_rows() {
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    const float norm = rows_.row(static_cast<Eigen::Index>(i)).norm();
    if (norm == 0.f) throw EmbeddingError("zero embedding for id " + ids_[i]);
    rows_.row(static_cast<Eigen::Index>(i)) /= norm;
  }
  normalized_ = true;
}

EmbeddingStore EmbeddingStore::subset(const std::vector<std::string>& keep) const {
  EmbeddingStore out(dim_, normalized_);
  out.reserve(keep.size());
  for (const auto& id : keep) out.add(id, row(id));
  return out;
}

void EmbeddingStore::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw EmbeddingError("cannot write " + path);
  out.write(kMagic, 8);
  const std::uint32_t count = static_cast<std::uint32_t>(ids_.size());
  const std::uint32_t dim = static_cast<std::uint32_t>(dim_);
  out.write(reinterpret_cast<const char*>(&count), 4);
  out.write(reinterpret_cast<const char*>(&dim), 4);
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    const std::uint16_t len = static_cast<std::uint16_t>(ids_[i].size());
    out.write(reinterpret_cast<const char*>(&len), 2);
    out.write(ids_[i].data(), len);
    out.write(reinterpret_cast<const char*>(rows_.row(static_cast<Eigen::Index>(i)).data()),
              static_cast<std::streamsize>(sizeof(float)) * dim_);
  }
}

EmbeddingStore EmbeddingStore::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw EmbeddingError("cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw EmbeddingError(path + ": bad magic (expected BETREMB1)");
  std::uint32_t count = 0, dim = 0;
  in.read(reinterpret_cast<char*>(&count), 4);
  in.read(reinterpret_cast<char*>(&dim), 4);
  if (!in || dim == 0) throw EmbeddingError(path + ": bad header");
  EmbeddingStore store(static_cast<int>(dim));
  store.reserve(count);
  Eigen::VectorXf row(static_cast<Eigen::Index>(dim));
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint16_t len = 0;
    in.read(reinterpret_cast<char*>(&len), 2);
    std::string id(len, '\0');
    in.read(id.data(), len);
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(sizeof(float)) * dim);
    if (!in) throw EmbeddingError(path + ": truncated record " + std::to_string(i));
    store.add(id, row);
  }
  return store;
}

}  // namespace betr
