#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "senskit/rng.hpp"

namespace senskit {

/// Ordered collection of points in R^d. All points share one dimension and
/// every coordinate is finite; both are checked at insertion.
class Dataset {
 public:
  Dataset() = default;

  explicit Dataset(std::vector<Eigen::VectorXd> points) {
    for (auto& p : points) push_back(std::move(p));
  }

  void push_back(Eigen::VectorXd p) {
    if (!p.allFinite()) throw std::invalid_argument("Dataset: non-finite coordinate");
    if (points_.empty()) {
      dim_ = static_cast<int>(p.size());
      if (dim_ == 0) throw std::invalid_argument("Dataset: zero-dimensional point");
    } else if (p.size() != dim_) {
      throw std::invalid_argument("Dataset: mixed dimensions");
    }
    points_.push_back(std::move(p));
  }

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  int dim() const { return dim_; }
  const Eigen::VectorXd& operator[](std::size_t i) const { return points_.at(i); }
  const std::vector<Eigen::VectorXd>& points() const { return points_; }

  /// Copy with point i removed; order of the rest preserved.
  Dataset without(std::size_t i) const {
    if (i >= points_.size()) throw std::out_of_range("Dataset::without: index out of range");
    Dataset out;
    out.points_.reserve(points_.size() - 1);
    for (std::size_t j = 0; j < points_.size(); ++j)
      if (j != i) out.push_back(points_[j]);
    return out;
  }

  /// Rows of a matrix as points.
  static Dataset from_rows(const Eigen::MatrixXd& rows) {
    Dataset out;
    for (Eigen::Index i = 0; i < rows.rows(); ++i) out.push_back(rows.row(i).transpose());
    return out;
  }

  /// Columns of a matrix as points.
  static Dataset from_columns(const Eigen::MatrixXd& cols) {
    Dataset out;
    for (Eigen::Index j = 0; j < cols.cols(); ++j) out.push_back(cols.col(j));
    return out;
  }

 private:
  std::vector<Eigen::VectorXd> points_;
  int dim_ = 0;
};

/// Sequential view of a dataset under a fixed permutation. Hands out one point
/// per call: the online driver cannot peek at x_t before committing theta_t.
class Stream {
 public:
  Stream(const Dataset& source, std::vector<std::size_t> order)
      : source_(&source), order_(std::move(order)) {
    if (source_->empty()) throw std::invalid_argument("Stream: empty stream");
    if (order_.size() != source_->size())
      throw std::invalid_argument("Stream: order length mismatch");
    std::vector<char> seen(order_.size(), 0);
    for (std::size_t i : order_) {
      if (i >= order_.size() || seen[i]) throw std::invalid_argument("Stream: order is not a permutation");
      seen[i] = 1;
    }
  }

  std::size_t size() const { return order_.size(); }
  std::size_t delivered() const { return pos_; }
  bool done() const { return pos_ == order_.size(); }

  const Eigen::VectorXd& next() {
    if (done()) throw std::runtime_error("Stream::next: exhausted");
    return (*source_)[order_[pos_++]];
  }

  const std::vector<std::size_t>& order() const { return order_; }
  const Dataset& source() const { return *source_; }

  void reset() { pos_ = 0; }

 private:
  const Dataset* source_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

/// Uniformly random stream order (Fisher-Yates with the seeded generator).
inline Stream random_order(const Dataset& dataset, std::uint64_t seed) {
  if (dataset.empty()) throw std::invalid_argument("random_order: empty stream");
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = Rng(seed).sub("shuffle");
  for (std::size_t i = order.size() - 1; i > 0; --i)
    std::swap(order[i], order[rng.index(i + 1)]);
  return Stream(dataset, std::move(order));
}

/// Insertion order, unchanged.
inline Stream as_given_order(const Dataset& dataset) {
  if (dataset.empty()) throw std::invalid_argument("as_given_order: empty stream");
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  return Stream(dataset, std::move(order));
}

/// Ascending Euclidean norm; a fixed-order stress case with no random-order
/// guarantee attached.
inline Stream sorted_norm_order(const Dataset& dataset) {
  if (dataset.empty()) throw std::invalid_argument("sorted_norm_order: empty stream");
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dataset[a].norm() < dataset[b].norm();
  });
  return Stream(dataset, std::move(order));
}

}  // namespace senskit
