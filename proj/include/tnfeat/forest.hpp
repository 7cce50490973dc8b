#pragma once

#include "tnfeat/feature_matrix.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tnfeat::forest {

struct ForestOptions {
  std::size_t tree_count = 100;
  /// 0 means unlimited; any value is capped at kMaxDepth.
  std::size_t max_depth = 0;
  std::size_t min_samples_split = 2;
  /// 0 means floor(sqrt(feature count)), at least 1.
  std::size_t features_per_split = 0;
  bool bootstrap = true;
  std::uint64_t seed = 0;

  static constexpr std::size_t kMaxDepth = 64;

  /// Throws InvalidConfig.
  void validate() const;
  std::size_t effective_depth() const noexcept;
  std::size_t effective_features(std::size_t feature_count) const noexcept;
};

/// Split nodes send value <= threshold left. Leaves hold a class
/// distribution summing to 1.
struct Node {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<double> proba;

  bool is_leaf() const noexcept { return feature < 0; }
  friend bool operator==(const Node&, const Node&) = default;
};

struct DecisionTree {
  std::vector<Node> nodes;  // nodes[0] is the root

  const Node& leaf_for(std::span<const float> x) const;
  std::size_t depth() const;
  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

struct Forest {
  std::size_t num_classes = 0;
  std::size_t feature_count = 0;
  std::vector<DecisionTree> trees;

  friend bool operator==(const Forest&, const Forest&) = default;
};

/// Bagged CART trees grown on weighted Gini impurity. Every tree draws its
/// bootstrap sample and its per-node feature subsets from a stream seeded
/// by (opts.seed, tree index), so the result does not depend on `workers`.
/// Throws EmptyTrainingSet, InvalidInput (non-finite features, length
/// mismatches, non-positive weights) or InvalidLabel.
Forest train_forest(const features::FeatureMatrix& x, std::span<const int> y, std::span<const double> sample_weights,
                    std::size_t num_classes, const ForestOptions& opts, std::size_t workers = 1);

/// Mean of the per-tree leaf distributions. Throws ShapeMismatch.
std::vector<double> predict_proba(const Forest& f, std::span<const float> x);

/// argmax of predict_proba, lowest class id on ties.
int predict(const Forest& f, std::span<const float> x);

std::vector<int> predict_rows(const Forest& f, const features::FeatureMatrix& x);

/// Line-oriented text format with hexadecimal floats; round-trips exactly.
std::string serialize(const Forest& f);
/// Throws InvalidInput on malformed text.
Forest deserialize(std::string_view text);

}  // namespace tnfeat::forest
