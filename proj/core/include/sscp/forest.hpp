#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sscp/matrix.hpp"

namespace sscp::forest {

struct ForestConfig {
  std::size_t n_trees = 1000;
  /// Candidate features per split; 0 selects ceil(n_features / 3).
  std::size_t max_features = 0;
  std::size_t min_samples_leaf = 5;
  /// 0 means unlimited depth.
  std::size_t max_depth = 0;
  std::uint64_t seed = 0;
  /// Worker threads for fitting; 0 uses the hardware concurrency. The fitted
  /// forest does not depend on this value.
  std::size_t n_threads = 0;

  std::size_t resolved_max_features(std::size_t n_features) const noexcept;
  void validate(std::size_t n_features) const;
};

/// Axis-aligned regression tree with mean-valued leaves.
class Tree {
 public:
  struct Node {
    /// -1 marks a leaf.
    std::int32_t feature = -1;
    double threshold = 0.0;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    double value = 0.0;

    friend bool operator==(const Node&, const Node&) = default;
  };

  double predict(std::span<const double> x) const noexcept;
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  std::size_t depth() const;
  std::vector<Node>& mutable_nodes() noexcept { return nodes_; }

  friend bool operator==(const Tree&, const Tree&) = default;

 private:
  std::vector<Node> nodes_;
};

struct OobPrediction {
  std::vector<double> values;
  /// Trees whose bootstrap excluded the sample.
  std::vector<std::size_t> n_oob_trees;
  /// Samples with no excluding tree; their value is the full-forest prediction.
  std::vector<bool> fallback;
  std::size_t n_fallback() const noexcept;
};

class Forest {
 public:
  /// Bootstrap-aggregated trees, each grown greedily by variance reduction on
  /// a seeded bootstrap sample of the rows.
  static Forest fit(const RealMatrix& x, std::span<const double> y, const ForestConfig& config);

  double predict(std::span<const double> x) const;
  std::vector<double> predict(const RealMatrix& x) const;

  /// Per training row, the mean over trees that did not see it.
  OobPrediction oob_predict(const RealMatrix& x_train) const;

  std::size_t n_trees() const noexcept { return trees_.size(); }
  std::size_t n_features() const noexcept { return n_features_; }
  std::size_t n_train() const noexcept { return n_train_; }
  const Tree& tree(std::size_t t) const { return trees_.at(t); }
  /// In-bag flag of `row` for tree `t`.
  bool in_bag(std::size_t t, std::size_t row) const { return in_bag_.at(t).at(row) != 0; }

  friend bool operator==(const Forest& a, const Forest& b) {
    return a.trees_ == b.trees_ && a.in_bag_ == b.in_bag_;
  }

 private:
  std::vector<Tree> trees_;
  std::vector<std::vector<std::uint8_t>> in_bag_;
  std::size_t n_features_ = 0;
  std::size_t n_train_ = 0;
};

}  // namespace sscp::forest
