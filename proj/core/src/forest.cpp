#include "sscp/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <thread>

#include "sscp/error.hpp"
#include "sscp/random.hpp"

namespace sscp::forest {

namespace {

constexpr std::uint64_t kTreeStream = 0x7ee;

struct Builder {
  const RealMatrix& x;
  std::span<const double> y;
  const ForestConfig& config;
  std::size_t max_features;
  Rng& rng;
  std::vector<Tree::Node>& nodes;

  std::span<const std::size_t> active;
  std::vector<std::size_t> features;
  std::vector<std::pair<double, double>> sorted;

  struct Frame {
    std::uint32_t node;
    std::vector<std::size_t> rows;
    std::size_t depth;
  };

  void build(std::vector<std::size_t> rows) {
    features.assign(active.begin(), active.end());
    nodes.clear();
    nodes.emplace_back();
    std::vector<Frame> stack;
    stack.push_back({0, std::move(rows), 0});
    while (!stack.empty()) {
      Frame frame = std::move(stack.back());
      stack.pop_back();
      split_node(frame, stack);
    }
  }

  void split_node(Frame& frame, std::vector<Frame>& stack) {
    const auto& rows = frame.rows;
    const std::size_t n = rows.size();
    double sum = 0.0;
    for (std::size_t r : rows) sum += y[r];
    nodes[frame.node].value = sum / static_cast<double>(n);

    const bool depth_left = config.max_depth == 0 || frame.depth < config.max_depth;
    if (n < 2 * config.min_samples_leaf || !depth_left || features.empty()) return;

    const double parent_score = sum * sum / static_cast<double>(n);
    double best_score = parent_score + 1e-12 * std::max(1.0, std::abs(parent_score));
    std::int32_t best_feature = -1;
    double best_threshold = 0.0;

    // Partial Fisher-Yates draw of the candidate features.
    for (std::size_t k = 0; k < max_features; ++k) {
      const auto j = k + static_cast<std::size_t>(rng.index(features.size() - k));
      std::swap(features[k], features[j]);
      const std::size_t f = features[k];

      sorted.resize(n);
      for (std::size_t i = 0; i < n; ++i) sorted[i] = {x(rows[i], f), y[rows[i]]};
      std::sort(sorted.begin(), sorted.end());
      if (sorted.front().first == sorted.back().first) continue;

      double left_sum = 0.0;
      for (std::size_t i = 1; i < n; ++i) {
        left_sum += sorted[i - 1].second;
        if (i < config.min_samples_leaf || n - i < config.min_samples_leaf) continue;
        if (sorted[i - 1].first == sorted[i].first) continue;
        const double right_sum = sum - left_sum;
        const double score = left_sum * left_sum / static_cast<double>(i) +
                             right_sum * right_sum / static_cast<double>(n - i);
        if (score > best_score) {
          best_score = score;
          best_feature = static_cast<std::int32_t>(f);
          const double lo = sorted[i - 1].first;
          const double hi = sorted[i].first;
          double mid = lo + (hi - lo) / 2.0;
          if (!(mid < hi)) mid = lo;
          best_threshold = mid;
        }
      }
    }
    if (best_feature < 0) return;

    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (std::size_t r : rows) {
      (x(r, static_cast<std::size_t>(best_feature)) <= best_threshold ? left : right).push_back(r);
    }
    const auto left_id = static_cast<std::uint32_t>(nodes.size());
    nodes.emplace_back();
    const auto right_id = static_cast<std::uint32_t>(nodes.size());
    nodes.emplace_back();
    auto& node = nodes[frame.node];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = left_id;
    node.right = right_id;
    stack.push_back({right_id, std::move(right), frame.depth + 1});
    stack.push_back({left_id, std::move(left), frame.depth + 1});
  }
};

}  // namespace

std::size_t ForestConfig::resolved_max_features(std::size_t n_features) const noexcept {
  if (max_features != 0) return max_features;
  return std::max<std::size_t>(1, (n_features + 2) / 3);
}

void ForestConfig::validate(std::size_t n_features) const {
  if (n_trees == 0) throw ConfigError("a forest needs at least one tree");
  if (min_samples_leaf == 0) throw ConfigError("min_samples_leaf must be positive");
  if (resolved_max_features(n_features) > n_features) {
    throw ConfigError("max_features " + std::to_string(max_features) + " exceeds the feature count " +
                      std::to_string(n_features));
  }
}

double Tree::predict(std::span<const double> x) const noexcept {
  std::size_t id = 0;
  while (nodes_[id].feature >= 0) {
    const auto& node = nodes_[id];
    id = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
  }
  return nodes_[id].value;
}

std::size_t Tree::depth() const {
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
  std::size_t deepest = 0;
  while (!stack.empty()) {
    const auto [id, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    if (nodes_[id].feature >= 0) {
      stack.emplace_back(nodes_[id].left, d + 1);
      stack.emplace_back(nodes_[id].right, d + 1);
    }
  }
  return deepest;
}

std::size_t OobPrediction::n_fallback() const noexcept {
  return static_cast<std::size_t>(std::count(fallback.begin(), fallback.end(), true));
}

Forest Forest::fit(const RealMatrix& x, std::span<const double> y, const ForestConfig& config) {
  const std::size_t n = x.rows();
  if (n != y.size()) throw ShapeError("forest features and targets have different lengths");
  if (n < 2) throw InsufficientDataError("a forest needs at least two training rows");
  if (x.cols() == 0) throw ShapeError("a forest needs at least one feature");
  config.validate(x.cols());
  for (double v : y) {
    if (!std::isfinite(v)) throw ContractViolation("forest targets must be finite");
  }

  Forest forest;
  forest.n_features_ = x.cols();
  forest.n_train_ = n;
  forest.trees_.resize(config.n_trees);
  forest.in_bag_.assign(config.n_trees, std::vector<std::uint8_t>(n, 0));
  // Columns constant over the training rows can never split, so they are
  // left out of the candidate draw and of the max_features default.
  std::vector<std::size_t> active;
  for (std::size_t c = 0; c < x.cols(); ++c) {
    for (std::size_t r = 1; r < n; ++r) {
      if (x(r, c) != x(0, c)) {
        active.push_back(c);
        break;
      }
    }
  }
  const std::size_t max_features = std::min(config.resolved_max_features(active.size()), active.size());

  auto fit_range = [&](std::size_t first, std::size_t last) {
    for (std::size_t t = first; t < last; ++t) {
      Rng rng(derive_seed(config.seed, {kTreeStream, t}));
      std::vector<std::size_t> rows(n);
      auto& bag = forest.in_bag_[t];
      for (auto& r : rows) {
        r = static_cast<std::size_t>(rng.index(n));
        bag[r] = 1;
      }
      Builder builder{x, y, config, max_features, rng, forest.trees_[t].mutable_nodes(), active, {}, {}};
      builder.build(std::move(rows));
    }
  };

  std::size_t n_threads = config.n_threads != 0 ? config.n_threads : std::thread::hardware_concurrency();
  n_threads = std::clamp<std::size_t>(n_threads, 1, config.n_trees);
  if (n_threads == 1) {
    fit_range(0, config.n_trees);
  } else {
    std::vector<std::thread> workers;
    const std::size_t chunk = (config.n_trees + n_threads - 1) / n_threads;
    for (std::size_t first = 0; first < config.n_trees; first += chunk) {
      workers.emplace_back(fit_range, first, std::min(config.n_trees, first + chunk));
    }
    for (auto& w : workers) w.join();
  }
  return forest;
}

double Forest::predict(std::span<const double> x) const {
  if (x.size() != n_features_) {
    throw ShapeError("forest expects " + std::to_string(n_features_) + " features, got " + std::to_string(x.size()));
  }
  double sum = 0.0;
  for (const auto& tree : trees_) sum += tree.predict(x);
  return sum / static_cast<double>(trees_.size());
}

std::vector<double> Forest::predict(const RealMatrix& x) const {
  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = predict(x.row(i));
  return out;
}

OobPrediction Forest::oob_predict(const RealMatrix& x_train) const {
  if (x_train.rows() != n_train_) {
    throw ShapeError("out-of-bag prediction needs the " + std::to_string(n_train_) + " training rows");
  }
  if (x_train.cols() != n_features_) throw ShapeError("forest feature count mismatch");
  OobPrediction out;
  out.values.assign(n_train_, 0.0);
  out.n_oob_trees.assign(n_train_, 0);
  out.fallback.assign(n_train_, false);
  for (std::size_t i = 0; i < n_train_; ++i) {
    const auto row = x_train.row(i);
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 0; t < trees_.size(); ++t) {
      if (in_bag_[t][i] != 0) continue;
      sum += trees_[t].predict(row);
      ++count;
    }
    out.n_oob_trees[i] = count;
    if (count == 0) {
      out.fallback[i] = true;
      out.values[i] = predict(row);
    } else {
      out.values[i] = sum / static_cast<double>(count);
    }
  }
  return out;
}

}  // namespace sscp::forest
