#include "tnfeat/forest.hpp"

#include "tnfeat/error.hpp"
#include "tnfeat/parallel.hpp"
#include "tnfeat/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

namespace tnfeat::forest {

using features::FeatureMatrix;

void ForestOptions::validate() const {
  if (tree_count < 1) throw Error(Errc::InvalidConfig, "tree_count must be >= 1");
  if (min_samples_split < 2) throw Error(Errc::InvalidConfig, "min_samples_split must be >= 2");
}

std::size_t ForestOptions::effective_depth() const noexcept {
  return max_depth == 0 ? kMaxDepth : std::min(max_depth, kMaxDepth);
}

std::size_t ForestOptions::effective_features(std::size_t feature_count) const noexcept {
  std::size_t k = features_per_split;
  if (k == 0) k = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(feature_count))));
  return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(feature_count, 1));
}

const Node& DecisionTree::leaf_for(std::span<const float> x) const {
  const Node* node = &nodes.front();
  while (!node->is_leaf()) {
    node = &nodes[static_cast<std::size_t>(static_cast<double>(x[static_cast<std::size_t>(node->feature)]) <= node->threshold
                                               ? node->left
                                               : node->right)];
  }
  return *node;
}

std::size_t DecisionTree::depth() const {
  std::size_t best = 0;
  std::vector<std::pair<int, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    const auto [id, d] = stack.back();
    stack.pop_back();
    const Node& n = nodes[static_cast<std::size_t>(id)];
    if (n.is_leaf()) {
      best = std::max(best, d);
    } else {
      stack.emplace_back(n.left, d + 1);
      stack.emplace_back(n.right, d + 1);
    }
  }
  return best;
}

namespace {

double gini(std::span<const double> dist, double total) {
  double sum_sq = 0.0;
  for (double d : dist) {
    const double p = d / total;
    sum_sq += p * p;
  }
  return 1.0 - sum_sq;
}

class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& x, std::span<const int> y, std::span<const double> w, std::size_t num_classes,
              const ForestOptions& opts, std::uint64_t seed)
      : x_(x),
        y_(y),
        w_(w),
        k_(num_classes),
        max_depth_(opts.effective_depth()),
        min_split_(opts.min_samples_split),
        mtry_(opts.effective_features(x.cols)),
        rng_(seed) {}

  DecisionTree build(bool bootstrap) {
    const std::size_t n = x_.rows;
    std::vector<std::size_t> samples(n);
    if (bootstrap) {
      for (auto& s : samples) s = rng_.below(n);
    } else {
      std::iota(samples.begin(), samples.end(), std::size_t{0});
    }
    features_.resize(x_.cols);
    grow(samples, 0);
    return DecisionTree{std::move(nodes_)};
  }

 private:
  int make_leaf(std::vector<double> dist, double total) {
    for (double& d : dist) d /= total;
    Node leaf;
    leaf.proba = std::move(dist);
    nodes_.push_back(std::move(leaf));
    return static_cast<int>(nodes_.size() - 1);
  }

  int grow(std::vector<std::size_t>& samples, std::size_t depth) {
    std::vector<double> dist(k_, 0.0);
    for (std::size_t s : samples) dist[static_cast<std::size_t>(y_[s])] += w_[s];
    const double total = std::accumulate(dist.begin(), dist.end(), 0.0);
    const auto nonzero = std::count_if(dist.begin(), dist.end(), [](double d) { return d > 0.0; });
    if (nonzero <= 1 || depth >= max_depth_ || samples.size() < min_split_) return make_leaf(std::move(dist), total);

    // Random feature subset, scanned in ascending index order so that equal
    // gains resolve to the lowest feature.
    std::iota(features_.begin(), features_.end(), std::size_t{0});
    for (std::size_t i = 0; i < mtry_; ++i) {
      const std::size_t j = i + rng_.below(features_.size() - i);
      std::swap(features_[i], features_[j]);
    }
    std::vector<std::size_t> candidates(features_.begin(), features_.begin() + static_cast<std::ptrdiff_t>(mtry_));
    std::sort(candidates.begin(), candidates.end());

    const double parent = gini(dist, total);
    double best_gain = 0.0;
    int best_feature = -1;
    double best_threshold = 0.0;

    std::vector<std::pair<float, std::size_t>> column(samples.size());
    std::vector<double> left(k_), right(k_);
    for (std::size_t f : candidates) {
      for (std::size_t i = 0; i < samples.size(); ++i) column[i] = {x_(samples[i], f), samples[i]};
      std::sort(column.begin(), column.end());
      if (column.front().first == column.back().first) continue;

      std::fill(left.begin(), left.end(), 0.0);
      double left_total = 0.0;
      for (std::size_t i = 0; i + 1 < column.size(); ++i) {
        const std::size_t s = column[i].second;
        left[static_cast<std::size_t>(y_[s])] += w_[s];
        left_total += w_[s];
        if (column[i].first == column[i + 1].first) continue;
        const double right_total = total - left_total;
        for (std::size_t c = 0; c < k_; ++c) right[c] = dist[c] - left[c];
        const double children = (left_total * gini(left, left_total) + right_total * gini(right, right_total)) / total;
        const double gain = parent - children;
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = static_cast<int>(f);
          best_threshold = (static_cast<double>(column[i].first) + static_cast<double>(column[i + 1].first)) / 2.0;
        }
      }
    }
    if (best_feature < 0) return make_leaf(std::move(dist), total);

    std::vector<std::size_t> lower, upper;
    for (std::size_t s : samples) {
      (static_cast<double>(x_(s, static_cast<std::size_t>(best_feature))) <= best_threshold ? lower : upper).push_back(s);
    }
    samples.clear();
    samples.shrink_to_fit();

    const auto id = nodes_.size();
    nodes_.emplace_back();
    nodes_[id].feature = best_feature;
    nodes_[id].threshold = best_threshold;
    const int l = grow(lower, depth + 1);
    const int r = grow(upper, depth + 1);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return static_cast<int>(id);
  }

  const FeatureMatrix& x_;
  std::span<const int> y_;
  std::span<const double> w_;
  std::size_t k_;
  std::size_t max_depth_;
  std::size_t min_split_;
  std::size_t mtry_;
  Rng rng_;
  std::vector<std::size_t> features_;
  std::vector<Node> nodes_;
};

}  // namespace

Forest train_forest(const FeatureMatrix& x, std::span<const int> y, std::span<const double> sample_weights,
                    std::size_t num_classes, const ForestOptions& opts, std::size_t workers) {
  opts.validate();
  if (x.rows == 0 || x.cols == 0) throw Error(Errc::EmptyTrainingSet, "training matrix is empty");
  if (y.size() != x.rows || sample_weights.size() != x.rows) {
    throw Error(Errc::InvalidInput, "rows, labels and weights must have equal lengths");
  }
  if (num_classes == 0) throw Error(Errc::InvalidConfig, "class count must be >= 1");
  for (float v : x.data) {
    if (!std::isfinite(v)) throw Error(Errc::InvalidInput, "training features contain non-finite values");
  }
  for (int label : y) {
    if (label < 0 || static_cast<std::size_t>(label) >= num_classes) throw Error(Errc::InvalidLabel, "label outside 0..K-1");
  }
  for (double w : sample_weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw Error(Errc::InvalidInput, "sample weights must be positive and finite");
  }

  Forest forest;
  forest.num_classes = num_classes;
  forest.feature_count = x.cols;
  forest.trees.resize(opts.tree_count);
  parallel_for(opts.tree_count, workers, [&](std::size_t t) {
    TreeBuilder builder(x, y, sample_weights, num_classes, opts, derive_seed(opts.seed, {t}));
    forest.trees[t] = builder.build(opts.bootstrap);
  });
  return forest;
}

std::vector<double> predict_proba(const Forest& f, std::span<const float> x) {
  if (x.size() != f.feature_count) {
    throw Error(Errc::ShapeMismatch, "feature vector has " + std::to_string(x.size()) + " entries, forest expects " +
                                         std::to_string(f.feature_count));
  }
  std::vector<double> acc(f.num_classes, 0.0);
  for (const DecisionTree& t : f.trees) {
    const auto& p = t.leaf_for(x).proba;
    for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += p[c];
  }
  for (double& a : acc) a /= static_cast<double>(f.trees.size());
  return acc;
}

int predict(const Forest& f, std::span<const float> x) {
  const auto p = predict_proba(f, x);
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

std::vector<int> predict_rows(const Forest& f, const FeatureMatrix& x) {
  std::vector<int> out(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) out[i] = predict(f, x.row(i));
  return out;
}

namespace {

void append_hex(std::string& out, double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::hex);
  out.append(buf, res.ptr);
}

double parse_hex(const std::string& token) {
  double v = 0.0;
  const auto res = std::from_chars(token.data(), token.data() + token.size(), v, std::chars_format::hex);
  if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
    throw Error(Errc::InvalidInput, "bad number in forest file: " + token);
  }
  return v;
}

}  // namespace

std::string serialize(const Forest& f) {
  std::string out = "tnfeat-forest v1\n";
  out += "classes " + std::to_string(f.num_classes) + " features " + std::to_string(f.feature_count) + " trees " +
         std::to_string(f.trees.size()) + "\n";
  for (std::size_t t = 0; t < f.trees.size(); ++t) {
    out += "tree " + std::to_string(t) + " nodes " + std::to_string(f.trees[t].nodes.size()) + "\n";
    for (const Node& n : f.trees[t].nodes) {
      if (n.is_leaf()) {
        out += "L";
        for (double p : n.proba) {
          out += ' ';
          append_hex(out, p);
        }
      } else {
        out += "S " + std::to_string(n.feature) + ' ';
        append_hex(out, n.threshold);
        out += ' ' + std::to_string(n.left) + ' ' + std::to_string(n.right);
      }
      out += '\n';
    }
  }
  return out;
}

Forest deserialize(std::string_view text) {
  std::istringstream in{std::string(text)};
  auto fail = [](const std::string& what) { return Error(Errc::InvalidInput, "forest file: " + what); };
  std::string magic, version, word;
  if (!(in >> magic >> version) || magic != "tnfeat-forest" || version != "v1") throw fail("unsupported header");

  Forest f;
  std::size_t tree_count = 0;
  if (!(in >> word >> f.num_classes) || word != "classes") throw fail("expected classes");
  if (!(in >> word >> f.feature_count) || word != "features") throw fail("expected features");
  if (!(in >> word >> tree_count) || word != "trees") throw fail("expected trees");
  f.trees.resize(tree_count);
  for (std::size_t t = 0; t < tree_count; ++t) {
    std::size_t index = 0, node_count = 0;
    if (!(in >> word >> index) || word != "tree" || index != t) throw fail("expected tree " + std::to_string(t));
    if (!(in >> word >> node_count) || word != "nodes" || node_count == 0) throw fail("expected node count");
    auto& nodes = f.trees[t].nodes;
    nodes.resize(node_count);
    for (Node& n : nodes) {
      std::string kind, token;
      if (!(in >> kind)) throw fail("truncated node list");
      if (kind == "L") {
        n.proba.resize(f.num_classes);
        for (double& p : n.proba) {
          if (!(in >> token)) throw fail("truncated leaf");
          p = parse_hex(token);
        }
      } else if (kind == "S") {
        if (!(in >> n.feature >> token >> n.left >> n.right)) throw fail("truncated split");
        n.threshold = parse_hex(token);
        const auto limit = static_cast<int>(node_count);
        if (n.feature < 0 || static_cast<std::size_t>(n.feature) >= f.feature_count || n.left <= 0 || n.right <= 0 ||
            n.left >= limit || n.right >= limit) {
          throw fail("split references out of range");
        }
      } else {
        throw fail("unknown node kind " + kind);
      }
    }
  }
  return f;
}

}  // namespace tnfeat::forest
