#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace obal {

/// One stream element: a d-dimensional feature vector, an optional class
/// label (present on source streams, absent on the target) and a monotone
/// sequence index.
struct Instance {
  std::vector<double> features;
  std::optional<int> label;
  std::int64_t timestamp = 0;

  Instance() = default;
  Instance(std::vector<double> f, std::optional<int> l, std::int64_t t)
      : features(std::move(f)), label(l), timestamp(t) {}
};

/// Fixed-size archived batch of instances sharing one dimension and one
/// label space. The unit of work for alignment, GMM fitting and AdaCOSA.
class DataBatch {
 public:
  DataBatch(std::vector<Instance> rows, int class_count);

  int dimension() const { return dimension_; }
  int class_count() const { return class_count_; }
  std::size_t size() const { return rows_.size(); }
  const Instance& row(std::size_t i) const { return rows_.at(i); }
  const std::vector<Instance>& rows() const { return rows_; }

  /// True when every row carries a label.
  bool labeled() const { return labeled_; }

  /// Rows as an L x d matrix (copies).
  Eigen::MatrixXd feature_matrix() const;

 private:
  std::vector<Instance> rows_;
  int dimension_ = 0;
  int class_count_ = 0;
  bool labeled_ = false;
};

/// Mixes a base seed with a stream/index salt. Used everywhere a derived
/// deterministic seed is needed (per-stream generators, per-seed runs).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace obal
