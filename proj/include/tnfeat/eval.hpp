#pragma once

#include "tnfeat/feature_matrix.hpp"
#include "tnfeat/forest.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace tnfeat::eval {

/// counts[i*k + j] = samples of true class i predicted as j.
struct ConfusionMatrix {
  std::size_t k = 0;
  std::vector<std::size_t> counts;

  std::size_t at(std::size_t truth, std::size_t pred) const { return counts[truth * k + pred]; }
  std::size_t total() const noexcept;
  std::size_t row_sum(std::size_t i) const;
  std::size_t col_sum(std::size_t j) const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Throws ShapeMismatch on unequal lengths and InvalidLabel for labels
/// outside 0..K-1.
ConfusionMatrix confusion_matrix(std::span<const int> y_true, std::span<const int> y_pred, std::size_t num_classes);

struct MetricsRecord {
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double weighted_precision = 0.0;
  double weighted_recall = 0.0;
  double weighted_f1 = 0.0;

  std::vector<double> precision;  // per class
  std::vector<double> recall;
  std::vector<double> f1;

  static constexpr std::size_t kScalarCount = 7;
  /// The scalar fields in declaration order.
  std::array<double, kScalarCount> scalars() const;
  static MetricsRecord from_scalars(const std::array<double, kScalarCount>& v);
};

/// Per-class precision (0 for an empty column), recall (0 for an empty
/// row), F1 (0 when both are 0); macro = unweighted class mean, weighted =
/// support-weighted mean. Throws EmptyEvaluation for an empty matrix.
MetricsRecord compute_metrics(const ConfusionMatrix& cm);

struct Summary {
  MetricsRecord mean;
  MetricsRecord std;  // sample standard deviation (n - 1); 0 for one row
};

Summary summarize(std::span<const MetricsRecord> rows);

struct SplitScore {
  MetricsRecord train;
  MetricsRecord test;
  ConfusionMatrix test_cm;
  std::size_t train_multiset_size = 0;
};

/// One train/evaluate cycle with every fitted quantity restricted to
/// train_idx: random oversampling of train_idx, class weights from the
/// pre-oversampling labels, standardizer statistics from the train_idx
/// rows, then a forest on the oversampled, standardized rows. Train metrics
/// are measured on train_idx, test metrics on test_idx. Throws
/// LeakageDetected when the oversampled multiset meets test_idx.
SplitScore train_and_score(const features::FeatureMatrix& x, std::span<const int> labels, std::size_t num_classes,
                           std::span<const std::size_t> train_idx, std::span<const std::size_t> test_idx,
                           const forest::ForestOptions& forest_opts, std::uint64_t seed, std::size_t workers = 1);

struct NestedCvOptions {
  std::size_t outer_k = 5;
  std::size_t inner_k = 5;
  std::uint64_t seed = 42;
  forest::ForestOptions forest;
  /// When non-empty, each outer fold picks the candidate rank with the best
  /// mean inner validation macro F1 (ties: earlier candidate).
  std::vector<std::size_t> rank_candidates;
  std::size_t workers = 1;

  /// Throws InvalidConfig naming the offending key.
  void validate() const;
};

struct InnerRow {
  std::size_t outer = 0;
  std::size_t inner = 0;
  std::size_t rank = 0;
  MetricsRecord train;
  MetricsRecord validation;
};

struct OuterRow {
  std::size_t fold = 0;
  std::size_t rank = 0;  // rank used for this fold
  MetricsRecord train;
  MetricsRecord test;
  ConfusionMatrix test_cm;
};

struct NestedCvReport {
  std::size_t rank = 0;  // configured rank
  std::size_t outer_k = 0;
  std::size_t inner_k = 0;
  std::uint64_t seed = 0;
  std::vector<OuterRow> outer;
  Summary outer_train;
  Summary outer_test;
  std::vector<InnerRow> inner;  // every (outer, inner[, candidate]) pair
  /// Per inner fold index: averages over the outer folds (configured or
  /// selected rank only).
  std::vector<MetricsRecord> inner_train_by_fold;
  std::vector<MetricsRecord> inner_validation_by_fold;
  Summary inner_train;
  Summary inner_validation;
};

/// Nested stratified cross-validation. `features` maps a PARAFAC rank to
/// the raw (unstandardized) fused-layout matrix for that rank; all ranks
/// share one fold assignment. Throws InvalidConfig or propagates component
/// errors.
NestedCvReport run_nested_cv(const std::map<std::size_t, features::FeatureMatrix>& features, std::span<const int> labels,
                             std::size_t num_classes, std::size_t rank, const NestedCvOptions& opts);

struct AblationVariant {
  std::string name;
  features::FeatureMatrix features;
};

struct AblationRow {
  std::string name;
  std::vector<double> per_fold_f1;
  double mean_f1 = 0.0;
  double std_f1 = 0.0;
};

struct AblationReport {
  std::size_t folds = 0;
  std::uint64_t seed = 0;
  std::vector<AblationRow> variants;
};

/// Macro-F1 k-fold comparison of the variants on one shared fold
/// assignment, with shared oversampling and forest seeds per fold.
AblationReport run_ablation(std::span<const AblationVariant> variants, std::span<const int> labels,
                            std::size_t num_classes, std::size_t folds, const forest::ForestOptions& forest_opts,
                            std::uint64_t seed, std::size_t workers = 1);

/// Splits a fused-layout matrix into CNN-only (spatial block), PARAFAC-only
/// and Fused variants. Throws InvalidInput when a block is missing.
std::vector<AblationVariant> branch_variants(const features::FeatureMatrix& fused);

nlohmann::ordered_json to_json(const MetricsRecord& m);
nlohmann::ordered_json to_json(const NestedCvReport& r);
nlohmann::ordered_json to_json(const AblationReport& r);
/// K rows of K comma-separated integers, row = true class.
std::string to_csv(const ConfusionMatrix& cm);

}  // namespace tnfeat::eval
