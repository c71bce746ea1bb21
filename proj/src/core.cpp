#include "obal/core.hpp"

#include <cmath>

namespace obal {

DataBatch::DataBatch(std::vector<Instance> rows, int class_count)
    : rows_(std::move(rows)), class_count_(class_count) {
  if (rows_.empty()) {
    throw std::invalid_argument("DataBatch: needs at least one row");
  }
  if (class_count_ < 1) {
    throw std::invalid_argument("DataBatch: class_count must be >= 1");
  }
  dimension_ = static_cast<int>(rows_.front().features.size());
  if (dimension_ < 1) {
    throw std::invalid_argument("DataBatch: zero-dimensional rows");
  }
  labeled_ = true;
  for (const Instance& inst : rows_) {
    if (static_cast<int>(inst.features.size()) != dimension_) {
      throw std::invalid_argument("DataBatch: inconsistent row dimension");
    }
    for (double v : inst.features) {
      if (!std::isfinite(v)) {
        throw std::invalid_argument("DataBatch: non-finite feature value");
      }
    }
    if (inst.label) {
      if (*inst.label < 0 || *inst.label >= class_count_) {
        throw std::invalid_argument("DataBatch: label out of range");
      }
    } else {
      labeled_ = false;
    }
  }
}

Eigen::MatrixXd DataBatch::feature_matrix() const {
  Eigen::MatrixXd m(rows_.size(), dimension_);
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    for (int j = 0; j < dimension_; ++j) {
      m(static_cast<Eigen::Index>(i), j) = rows_[i].features[j];
    }
  }
  return m;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finalizer over the combined value
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace obal
