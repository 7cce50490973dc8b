#include "tnfeat/eval.hpp"

#include "tnfeat/dataset.hpp"
#include "tnfeat/error.hpp"
#include "tnfeat/features.hpp"
#include "tnfeat/rng.hpp"

#include <algorithm>
#include <cmath>

namespace tnfeat::eval {

using features::FeatureMatrix;
using json = nlohmann::ordered_json;

std::size_t ConfusionMatrix::total() const noexcept {
  std::size_t t = 0;
  for (std::size_t c : counts) t += c;
  return t;
}

std::size_t ConfusionMatrix::row_sum(std::size_t i) const {
  std::size_t s = 0;
  for (std::size_t j = 0; j < k; ++j) s += at(i, j);
  return s;
}

std::size_t ConfusionMatrix::col_sum(std::size_t j) const {
  std::size_t s = 0;
  for (std::size_t i = 0; i < k; ++i) s += at(i, j);
  return s;
}

ConfusionMatrix confusion_matrix(std::span<const int> y_true, std::span<const int> y_pred, std::size_t num_classes) {
  if (y_true.size() != y_pred.size()) throw Error(Errc::ShapeMismatch, "y_true and y_pred differ in length");
  ConfusionMatrix cm;
  cm.k = num_classes;
  cm.counts.assign(num_classes * num_classes, 0);
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int t = y_true[i];
    const int p = y_pred[i];
    if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= num_classes || static_cast<std::size_t>(p) >= num_classes) {
      throw Error(Errc::InvalidLabel, "label outside 0.." + std::to_string(num_classes) + "-1");
    }
    ++cm.counts[static_cast<std::size_t>(t) * num_classes + static_cast<std::size_t>(p)];
  }
  return cm;
}

std::array<double, MetricsRecord::kScalarCount> MetricsRecord::scalars() const {
  return {accuracy, macro_precision, macro_recall, macro_f1, weighted_precision, weighted_recall, weighted_f1};
}

MetricsRecord MetricsRecord::from_scalars(const std::array<double, kScalarCount>& v) {
  MetricsRecord m;
  m.accuracy = v[0];
  m.macro_precision = v[1];
  m.macro_recall = v[2];
  m.macro_f1 = v[3];
  m.weighted_precision = v[4];
  m.weighted_recall = v[5];
  m.weighted_f1 = v[6];
  return m;
}

MetricsRecord compute_metrics(const ConfusionMatrix& cm) {
  const std::size_t total = cm.total();
  if (total == 0) throw Error(Errc::EmptyEvaluation, "confusion matrix is empty");
  MetricsRecord m;
  const std::size_t k = cm.k;
  m.precision.resize(k);
  m.recall.resize(k);
  m.f1.resize(k);
  std::size_t trace = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t tp = cm.at(c, c);
    trace += tp;
    const std::size_t predicted = cm.col_sum(c);
    const std::size_t support = cm.row_sum(c);
    const double p = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    const double r = support ? static_cast<double>(tp) / static_cast<double>(support) : 0.0;
    m.precision[c] = p;
    m.recall[c] = r;
    m.f1[c] = (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;

    const double w = static_cast<double>(support) / static_cast<double>(total);
    m.macro_precision += p;
    m.macro_recall += r;
    m.macro_f1 += m.f1[c];
    m.weighted_precision += w * p;
    m.weighted_recall += w * r;
    m.weighted_f1 += w * m.f1[c];
  }
  m.accuracy = static_cast<double>(trace) / static_cast<double>(total);
  m.macro_precision /= static_cast<double>(k);
  m.macro_recall /= static_cast<double>(k);
  m.macro_f1 /= static_cast<double>(k);
  return m;
}

Summary summarize(std::span<const MetricsRecord> rows) {
  Summary s;
  if (rows.empty()) return s;
  constexpr std::size_t n_fields = MetricsRecord::kScalarCount;
  std::array<double, n_fields> mean{}, var{};
  for (const auto& r : rows) {
    const auto v = r.scalars();
    for (std::size_t f = 0; f < n_fields; ++f) mean[f] += v[f];
  }
  const auto n = static_cast<double>(rows.size());
  for (double& m : mean) m /= n;
  if (rows.size() > 1) {
    for (const auto& r : rows) {
      const auto v = r.scalars();
      for (std::size_t f = 0; f < n_fields; ++f) var[f] += (v[f] - mean[f]) * (v[f] - mean[f]);
    }
    for (double& v : var) v = std::sqrt(v / (n - 1.0));
  }
  s.mean = MetricsRecord::from_scalars(mean);
  s.std = MetricsRecord::from_scalars(var);
  return s;
}

namespace {

std::vector<int> gather(std::span<const int> labels, std::span<const std::size_t> idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(labels[i]);
  return out;
}

std::vector<std::size_t> gather(std::span<const std::size_t> values, std::span<const std::size_t> idx) {
  std::vector<std::size_t> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(values[i]);
  return out;
}

double sample_std(std::span<const double> v, double mean) {
  if (v.size() < 2) return 0.0;
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

}  // namespace

SplitScore train_and_score(const FeatureMatrix& x, std::span<const int> labels, std::size_t num_classes,
                           std::span<const std::size_t> train_idx, std::span<const std::size_t> test_idx,
                           const forest::ForestOptions& forest_opts, std::uint64_t seed, std::size_t workers) {
  if (labels.size() != x.rows) throw Error(Errc::ShapeMismatch, "label count does not match feature rows");
  const std::vector<std::size_t> multiset = dataset::oversample(train_idx, labels, derive_seed(seed, {0}));

  std::vector<char> is_test(x.rows, 0);
  for (std::size_t i : test_idx) is_test[i] = 1;
  for (std::size_t i : multiset) {
    if (is_test[i]) throw Error(Errc::LeakageDetected, "test sample " + std::to_string(i) + " entered a training multiset");
  }

  const std::vector<int> train_labels = gather(labels, train_idx);
  const std::vector<double> weights_by_class = dataset::class_weights(train_labels, num_classes);

  const FeatureMatrix train_rows = x.select_rows(train_idx);
  const features::Standardizer standardizer = features::fit_standardizer(train_rows);

  const FeatureMatrix fit_rows = standardizer.apply(x.select_rows(multiset));
  const std::vector<int> fit_labels = gather(labels, multiset);
  std::vector<double> fit_weights;
  fit_weights.reserve(fit_labels.size());
  for (int y : fit_labels) fit_weights.push_back(weights_by_class[static_cast<std::size_t>(y)]);

  forest::ForestOptions opts = forest_opts;
  opts.seed = derive_seed(seed, {1});
  const forest::Forest model = forest::train_forest(fit_rows, fit_labels, fit_weights, num_classes, opts, workers);

  SplitScore score;
  score.train_multiset_size = multiset.size();
  const auto train_pred = forest::predict_rows(model, standardizer.apply(train_rows));
  score.train = compute_metrics(confusion_matrix(train_labels, train_pred, num_classes));
  const std::vector<int> test_labels = gather(labels, test_idx);
  const auto test_pred = forest::predict_rows(model, standardizer.apply(x.select_rows(test_idx)));
  score.test_cm = confusion_matrix(test_labels, test_pred, num_classes);
  score.test = compute_metrics(score.test_cm);
  return score;
}

void NestedCvOptions::validate() const {
  if (outer_k < 2) throw Error(Errc::InvalidConfig, "outer_k must be >= 2");
  if (inner_k < 2) throw Error(Errc::InvalidConfig, "inner_k must be >= 2");
  forest.validate();
}

NestedCvReport run_nested_cv(const std::map<std::size_t, FeatureMatrix>& features, std::span<const int> labels,
                             std::size_t num_classes, std::size_t rank, const NestedCvOptions& opts) {
  opts.validate();
  std::vector<std::size_t> candidates = opts.rank_candidates;
  const bool selecting = !candidates.empty();
  if (!selecting) candidates = {rank};
  for (std::size_t r : candidates) {
    const auto it = features.find(r);
    if (it == features.end()) throw Error(Errc::InvalidConfig, "no features for rank " + std::to_string(r));
    if (it->second.rows != labels.size()) throw Error(Errc::ShapeMismatch, "feature rows do not match label count");
  }

  NestedCvReport report;
  report.rank = rank;
  report.outer_k = opts.outer_k;
  report.inner_k = opts.inner_k;
  report.seed = opts.seed;

  const dataset::FoldAssignment outer = dataset::stratified_kfold(labels, opts.outer_k, derive_seed(opts.seed, {1}));
  std::vector<std::vector<MetricsRecord>> inner_train_rows(opts.inner_k), inner_val_rows(opts.inner_k);

  for (std::size_t o = 0; o < opts.outer_k; ++o) {
    const std::vector<std::size_t> outer_train = outer.complement(o);
    const std::vector<std::size_t> outer_test = outer.members(o);
    const std::vector<int> outer_train_labels = gather(labels, outer_train);
    const dataset::FoldAssignment inner =
        dataset::stratified_kfold(outer_train_labels, opts.inner_k, derive_seed(opts.seed, {2, o}));

    std::size_t chosen = candidates.front();
    double best_f1 = -1.0;
    std::map<std::size_t, std::vector<InnerRow>> rows_by_rank;
    for (std::size_t r : candidates) {
      const FeatureMatrix& x = features.at(r);
      double f1_sum = 0.0;
      for (std::size_t i = 0; i < opts.inner_k; ++i) {
        // Inner folds index into outer_train; map back to sample ids.
        const auto tr = gather(std::span<const std::size_t>(outer_train), inner.complement(i));
        const auto va = gather(std::span<const std::size_t>(outer_train), inner.members(i));
        const SplitScore s =
            train_and_score(x, labels, num_classes, tr, va, opts.forest, derive_seed(opts.seed, {3, o, i}), opts.workers);
        rows_by_rank[r].push_back(InnerRow{o, i, r, s.train, s.test});
        f1_sum += s.test.macro_f1;
      }
      const double mean_f1 = f1_sum / static_cast<double>(opts.inner_k);
      if (mean_f1 > best_f1) {
        best_f1 = mean_f1;
        chosen = r;
      }
    }
    if (!selecting) chosen = rank;
    for (std::size_t r : candidates) {
      for (auto& row : rows_by_rank[r]) {
        if (r == chosen) {
          inner_train_rows[row.inner].push_back(row.train);
          inner_val_rows[row.inner].push_back(row.validation);
        }
        report.inner.push_back(std::move(row));
      }
    }

    const SplitScore s = train_and_score(features.at(chosen), labels, num_classes, outer_train, outer_test, opts.forest,
                                         derive_seed(opts.seed, {4, o}), opts.workers);
    report.outer.push_back(OuterRow{o, chosen, s.train, s.test, s.test_cm});
  }

  std::vector<MetricsRecord> train_rows, test_rows;
  for (const auto& row : report.outer) {
    train_rows.push_back(row.train);
    test_rows.push_back(row.test);
  }
  report.outer_train = summarize(train_rows);
  report.outer_test = summarize(test_rows);
  for (std::size_t i = 0; i < opts.inner_k; ++i) {
    report.inner_train_by_fold.push_back(summarize(inner_train_rows[i]).mean);
    report.inner_validation_by_fold.push_back(summarize(inner_val_rows[i]).mean);
  }
  report.inner_train = summarize(report.inner_train_by_fold);
  report.inner_validation = summarize(report.inner_validation_by_fold);
  return report;
}

AblationReport run_ablation(std::span<const AblationVariant> variants, std::span<const int> labels,
                            std::size_t num_classes, std::size_t folds, const forest::ForestOptions& forest_opts,
                            std::uint64_t seed, std::size_t workers) {
  if (folds < 2) throw Error(Errc::InvalidConfig, "ablation_folds must be >= 2");
  if (variants.empty()) throw Error(Errc::InvalidConfig, "ablation needs at least one variant");
  const dataset::FoldAssignment assignment = dataset::stratified_kfold(labels, folds, derive_seed(seed, {5}));

  AblationReport report;
  report.folds = folds;
  report.seed = seed;
  for (const auto& v : variants) {
    AblationRow row;
    row.name = v.name;
    for (std::size_t f = 0; f < folds; ++f) {
      const SplitScore s = train_and_score(v.features, labels, num_classes, assignment.complement(f), assignment.members(f),
                                           forest_opts, derive_seed(seed, {6, f}), workers);
      row.per_fold_f1.push_back(s.test.macro_f1);
    }
    double sum = 0.0;
    for (double x : row.per_fold_f1) sum += x;
    row.mean_f1 = sum / static_cast<double>(folds);
    row.std_f1 = sample_std(row.per_fold_f1, row.mean_f1);
    report.variants.push_back(std::move(row));
  }
  return report;
}

std::vector<AblationVariant> branch_variants(const FeatureMatrix& fused) {
  if (fused.parafac_cols == 0 || fused.spatial_cols == 0) {
    throw Error(Errc::InvalidInput, "ablation needs both a PARAFAC and a spatial block");
  }
  std::vector<AblationVariant> out;
  out.push_back({"CNN-only", fused.column_block(fused.parafac_cols, fused.cols)});
  out.back().features.spatial_cols = fused.spatial_cols;
  out.push_back({"PARAFAC-only", fused.column_block(0, fused.parafac_cols)});
  out.back().features.parafac_cols = fused.parafac_cols;
  out.push_back({"Fused", fused});
  return out;
}

json to_json(const MetricsRecord& m) {
  json j;
  j["accuracy"] = m.accuracy;
  j["macro_precision"] = m.macro_precision;
  j["macro_recall"] = m.macro_recall;
  j["macro_f1"] = m.macro_f1;
  j["weighted_precision"] = m.weighted_precision;
  j["weighted_recall"] = m.weighted_recall;
  j["weighted_f1"] = m.weighted_f1;
  return j;
}

namespace {

json to_json(const Summary& s) {
  json j;
  j["mean"] = to_json(s.mean);
  j["std"] = to_json(s.std);
  return j;
}

}  // namespace

json to_json(const NestedCvReport& r) {
  json j;
  j["rank"] = r.rank;
  j["outer_k"] = r.outer_k;
  j["inner_k"] = r.inner_k;
  json outer = json::array();
  for (const auto& row : r.outer) {
    json o;
    o["fold"] = row.fold + 1;
    o["rank"] = row.rank;
    o["train"] = to_json(row.train);
    o["test"] = to_json(row.test);
    outer.push_back(std::move(o));
  }
  j["outer"] = {{"folds", std::move(outer)}, {"train", to_json(r.outer_train)}, {"test", to_json(r.outer_test)}};

  json pairs = json::array();
  for (const auto& row : r.inner) {
    json p;
    p["outer_fold"] = row.outer + 1;
    p["inner_fold"] = row.inner + 1;
    p["rank"] = row.rank;
    p["train"] = to_json(row.train);
    p["validation"] = to_json(row.validation);
    pairs.push_back(std::move(p));
  }
  json aggregate = json::array();
  for (std::size_t i = 0; i < r.inner_train_by_fold.size(); ++i) {
    json a;
    a["inner_fold"] = i + 1;
    a["train"] = to_json(r.inner_train_by_fold[i]);
    a["validation"] = to_json(r.inner_validation_by_fold[i]);
    aggregate.push_back(std::move(a));
  }
  j["inner"] = {{"pairs", std::move(pairs)},
                {"by_inner_fold", std::move(aggregate)},
                {"train", to_json(r.inner_train)},
                {"validation", to_json(r.inner_validation)}};
  return j;
}

json to_json(const AblationReport& r) {
  json j;
  j["folds"] = r.folds;
  j["seed"] = r.seed;
  json variants;
  for (const auto& v : r.variants) {
    variants[v.name] = {{"mean_f1", v.mean_f1}, {"std_f1", v.std_f1}, {"per_fold", v.per_fold_f1}};
  }
  j["variants"] = std::move(variants);
  return j;
}

std::string to_csv(const ConfusionMatrix& cm) {
  std::string out;
  for (std::size_t i = 0; i < cm.k; ++i) {
    for (std::size_t j = 0; j < cm.k; ++j) {
      if (j) out += ',';
      out += std::to_string(cm.at(i, j));
    }
    out += '\n';
  }
  return out;
}

}  // namespace tnfeat::eval
