#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace betr {

using MatrixXf = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class EmbeddingError : public std::runtime_error {
 public:
  explicit EmbeddingError(const std::string& msg) : std::runtime_error(msg) {}
};

// Dense per-id embedding matrix. Rows are finite; optional unit-L2
// normalization is recorded in `normalized`.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  EmbeddingStore(int dim, bool normalized = false) : dim_(dim), normalized_(normalized) {}

  void add(const std::string& id, const Eigen::VectorXf& row);
  void reserve(std::size_t n);

  int dim() const { return dim_; }
  std::size_t count() const { return ids_.size(); }
  bool normalized() const { return normalized_; }

  bool contains(const std::string& id) const { return index_.count(id) != 0; }
  Eigen::Index row_of(const std::string& id) const;
  const std::string& id_of(Eigen::Index row) const { return ids_[static_cast<std::size_t>(row)]; }
  const std::vector<std::string>& ids() const { return ids_; }

  // Row-major matrix, one row per id in insertion order.
  Eigen::Ref<const MatrixXf> rows() const {
    return rows_.topRows(static_cast<Eigen::Index>(ids_.size()));
  }
  Eigen::VectorXf row(const std::string& id) const { return rows_.row(row_of(id)); }

  // Scales every row to unit L2 norm. Zero rows are rejected.
  void normalize_rows();

  // Subset preserving `keep` order. Ids absent from the store are an error.
  EmbeddingStore subset(const std::vector<std::string>& keep) const;

  void save(const std::string& path) const;
  static EmbeddingStore load(const std::string& path);

 private:
  int dim_ = 0;
  bool normalized_ = false;
  std::vector<std::string> ids_;
  MatrixXf rows_;  // count x dim
  std::unordered_map<std::string, Eigen::Index> index_;
};

}  // namespace betr
