#include "tnfeat/dataset.hpp"
#include "tnfeat/error.hpp"
#include "tnfeat/eval.hpp"
#include "tnfeat/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace tnfeat;
using namespace tnfeat::eval;
using features::FeatureMatrix;

namespace {

struct Oracle {
  double accuracy, macro_p, macro_r, macro_f1, weighted_p, weighted_r, weighted_f1;
  std::vector<double> p, r, f1;
};

/// Straight from the label lists, without a confusion matrix.
Oracle brute_force(const std::vector<int>& yt, const std::vector<int>& yp, int k) {
  Oracle o{};
  const double n = static_cast<double>(yt.size());
  double correct = 0;
  for (std::size_t i = 0; i < yt.size(); ++i) correct += yt[i] == yp[i];
  o.accuracy = correct / n;
  for (int c = 0; c < k; ++c) {
    double tp = 0, predicted = 0, actual = 0;
    for (std::size_t i = 0; i < yt.size(); ++i) {
      if (yp[i] == c) predicted += 1;
      if (yt[i] == c) actual += 1;
      if (yp[i] == c && yt[i] == c) tp += 1;
    }
    const double p = predicted > 0 ? tp / predicted : 0.0;
    const double r = actual > 0 ? tp / actual : 0.0;
    const double f = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    o.p.push_back(p);
    o.r.push_back(r);
    o.f1.push_back(f);
    o.macro_p += p / k;
    o.macro_r += r / k;
    o.macro_f1 += f / k;
    o.weighted_p += p * actual / n;
    o.weighted_r += r * actual / n;
    o.weighted_f1 += f * actual / n;
  }
  return o;
}

/// Clustered fused-layout features: `pcols` informative columns followed by
/// `scols` noisier ones.
FeatureMatrix clustered(std::uint64_t seed, const std::vector<int>& y, std::size_t pcols, std::size_t scols,
                        double spread) {
  Rng rng(seed);
  FeatureMatrix m(y.size(), pcols + scols);
  m.parafac_cols = pcols;
  m.spatial_cols = scols;
  for (std::size_t i = 0; i < y.size(); ++i) {
    for (std::size_t j = 0; j < pcols + scols; ++j) {
      const double centre = (j % 8 == static_cast<std::size_t>(y[i]) % 8) ? 3.0 : 0.0;
      const double noise = j < pcols ? spread : spread * 3.0;
      m(i, j) = static_cast<float>(centre + noise * rng.normal());
    }
  }
  return m;
}

std::vector<int> balanced_labels(int k, int per) {
  std::vector<int> y;
  for (int c = 0; c < k; ++c) y.insert(y.end(), per, c);
  return y;
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return Errc::InvalidInput;
}

forest::ForestOptions small_forest() {
  forest::ForestOptions f;
  f.tree_count = 15;
  return f;
}

}  // namespace

TEST_CASE("confusion matrix hand cases") {
  const std::vector<int> yt = {0, 0, 1}, yp = {0, 1, 1};
  const ConfusionMatrix cm = confusion_matrix(yt, yp, 2);
  CHECK(cm.counts == std::vector<std::size_t>{1, 1, 0, 1});

  const std::vector<int> same = {0, 2, 2, 1, 2};
  const ConfusionMatrix d = confusion_matrix(same, same, 3);
  CHECK(d.counts == std::vector<std::size_t>{1, 0, 0, 0, 1, 0, 0, 0, 3});

  const ConfusionMatrix e = confusion_matrix({}, {}, 3);
  CHECK(e.total() == 0);
  CHECK(e.counts.size() == 9);

  const std::vector<int> bad = {0, 3};
  CHECK(code_of([&] { confusion_matrix(bad, bad, 2); }) == Errc::InvalidLabel);
  CHECK(code_of([&] { confusion_matrix(yt, bad, 2); }) == Errc::ShapeMismatch);
}

TEST_CASE("metrics hand case") {
  ConfusionMatrix cm;
  cm.k = 2;
  cm.counts = {1, 1, 0, 1};
  const MetricsRecord m = compute_metrics(cm);
  CHECK(m.accuracy == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(m.precision[0] == 1.0);
  CHECK(m.precision[1] == 0.5);
  CHECK(m.recall[0] == 0.5);
  CHECK(m.recall[1] == 1.0);
  CHECK(m.f1[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(m.f1[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(m.macro_f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

  ConfusionMatrix perfect;
  perfect.k = 3;
  perfect.counts = {4, 0, 0, 0, 2, 0, 0, 0, 7};
  const MetricsRecord p = compute_metrics(perfect);
  for (double v : p.scalars()) CHECK(v == 1.0);

  ConfusionMatrix empty;
  empty.k = 2;
  empty.counts = {0, 0, 0, 0};
  CHECK(code_of([&] { compute_metrics(empty); }) == Errc::EmptyEvaluation);
}

TEST_CASE("metrics equal the brute-force oracle") {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = trial % 2 == 0 ? 2 : 8;
    const std::size_t n = 1 + rng.below(60);
    std::vector<int> yt(n), yp(n);
    for (std::size_t i = 0; i < n; ++i) {
      yt[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
      yp[i] = rng.uniform() < 0.6 ? yt[i] : static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
    }
    const MetricsRecord m = compute_metrics(confusion_matrix(yt, yp, static_cast<std::size_t>(k)));
    const Oracle o = brute_force(yt, yp, k);
    CHECK(std::abs(m.accuracy - o.accuracy) <= 1e-12);
    CHECK(std::abs(m.macro_precision - o.macro_p) <= 1e-12);
    CHECK(std::abs(m.macro_recall - o.macro_r) <= 1e-12);
    CHECK(std::abs(m.macro_f1 - o.macro_f1) <= 1e-12);
    CHECK(std::abs(m.weighted_precision - o.weighted_p) <= 1e-12);
    CHECK(std::abs(m.weighted_recall - o.weighted_r) <= 1e-12);
    CHECK(std::abs(m.weighted_f1 - o.weighted_f1) <= 1e-12);
    for (int c = 0; c < k; ++c) {
      CHECK(std::abs(m.precision[static_cast<std::size_t>(c)] - o.p[static_cast<std::size_t>(c)]) <= 1e-12);
      CHECK(std::abs(m.recall[static_cast<std::size_t>(c)] - o.r[static_cast<std::size_t>(c)]) <= 1e-12);
      CHECK(std::abs(m.f1[static_cast<std::size_t>(c)] - o.f1[static_cast<std::size_t>(c)]) <= 1e-12);
    }
  }
}

TEST_CASE("summaries use the sample standard deviation") {
  std::vector<MetricsRecord> rows(3);
  rows[0].accuracy = 0.9;
  rows[1].accuracy = 0.8;
  rows[2].accuracy = 0.7;
  const Summary s = summarize(rows);
  CHECK(s.mean.accuracy == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(s.std.accuracy == doctest::Approx(0.1).epsilon(1e-12));
  const std::vector<MetricsRecord> one(1, rows[0]);
  CHECK(summarize(one).std.accuracy == 0.0);
}

TEST_CASE("train_and_score keeps test rows out of training") {
  const std::vector<int> y = balanced_labels(4, 10);
  FeatureMatrix x = clustered(1, y, 8, 4, 1.0);
  const dataset::FoldAssignment fa = dataset::stratified_kfold(y, 5, 3);
  const auto test = fa.members(0);
  const auto train = fa.complement(0);
  const SplitScore base = train_and_score(x, y, 4, train, test, small_forest(), 11);

  FeatureMatrix poisoned = x;
  for (std::size_t i : test)
    for (std::size_t j = 0; j < x.cols; ++j) poisoned(i, j) = 1e6f;
  const SplitScore again = train_and_score(poisoned, y, 4, train, test, small_forest(), 11);
  CHECK(again.train.scalars() == base.train.scalars());
  CHECK(base.train_multiset_size == 32);

  std::vector<std::size_t> overlapping = train;
  overlapping.push_back(test.front());
  CHECK(code_of([&] { train_and_score(x, y, 4, overlapping, test, small_forest(), 11); }) == Errc::LeakageDetected);
}

TEST_CASE("nested CV report structure") {
  const std::vector<int> y = balanced_labels(8, 10);
  const FeatureMatrix x = clustered(2, y, 10, 6, 0.8);
  NestedCvOptions opts;
  opts.forest = small_forest();
  const std::map<std::size_t, FeatureMatrix> feats = {{3, x}};
  const NestedCvReport r = run_nested_cv(feats, y, 8, 3, opts);
  REQUIRE(r.outer.size() == 5);
  CHECK(r.inner.size() == 25);
  CHECK(r.inner_validation_by_fold.size() == 5);
  CHECK(r.outer_test.mean.accuracy >= 0.9);

  std::vector<MetricsRecord> tests;
  for (const OuterRow& row : r.outer) {
    tests.push_back(row.test);
    for (std::size_t c = 0; c < 8; ++c) CHECK(row.test_cm.row_sum(c) == 2);
  }
  const Summary s = summarize(tests);
  for (std::size_t i = 0; i < MetricsRecord::kScalarCount; ++i) {
    CHECK(std::abs(s.mean.scalars()[i] - r.outer_test.mean.scalars()[i]) <= 1e-12);
    CHECK(std::abs(s.std.scalars()[i] - r.outer_test.std.scalars()[i]) <= 1e-12);
  }
  const auto j = to_json(r);
  CHECK(j["outer"]["folds"].size() == 5);

  NestedCvOptions again = opts;
  again.workers = 3;
  CHECK(to_json(run_nested_cv(feats, y, 8, 3, again)).dump() == j.dump());
}

TEST_CASE("nested CV guards") {
  const std::vector<int> y = balanced_labels(2, 6);
  const std::map<std::size_t, FeatureMatrix> feats = {{3, clustered(3, y, 4, 2, 1.0)}};
  NestedCvOptions opts;
  opts.inner_k = 1;
  CHECK(code_of([&] { run_nested_cv(feats, y, 2, 3, opts); }) == Errc::InvalidConfig);
  opts.inner_k = 2;
  opts.outer_k = 1;
  CHECK(code_of([&] { run_nested_cv(feats, y, 2, 3, opts); }) == Errc::InvalidConfig);
  opts.outer_k = 2;
  CHECK_THROWS_AS(run_nested_cv(feats, y, 2, 16, opts), Error);
}

TEST_CASE("rank selection picks among candidates") {
  const std::vector<int> y = balanced_labels(4, 10);
  std::map<std::size_t, FeatureMatrix> feats = {{3, clustered(4, y, 6, 2, 0.5)}, {16, clustered(5, y, 6, 2, 6.0)}};
  NestedCvOptions opts;
  opts.forest = small_forest();
  opts.rank_candidates = {16, 3};
  const NestedCvReport r = run_nested_cv(feats, y, 4, 3, opts);
  CHECK(r.inner.size() == 5 * 5 * 2);
  for (const OuterRow& row : r.outer) CHECK(row.rank == 3);
}

TEST_CASE("ablation report") {
  const std::vector<int> y = balanced_labels(4, 9);
  const FeatureMatrix fused = clustered(6, y, 6, 4, 1.0);
  const auto variants = branch_variants(fused);
  REQUIRE(variants.size() == 3);
  CHECK(variants[0].name == "CNN-only");
  CHECK(variants[1].name == "PARAFAC-only");
  CHECK(variants[2].name == "Fused");
  CHECK(variants[0].features.cols == 4);
  CHECK(variants[1].features.cols == 6);
  const AblationReport rep = run_ablation(variants, y, 4, 3, small_forest(), 42);
  REQUIRE(rep.variants.size() == 3);
  for (const auto& row : rep.variants) CHECK(row.per_fold_f1.size() == 3);

  std::vector<AblationVariant> same = {{"a", fused}, {"b", fused}, {"c", fused}};
  const AblationReport ctrl = run_ablation(same, y, 4, 3, small_forest(), 42);
  CHECK(ctrl.variants[0].per_fold_f1 == ctrl.variants[1].per_fold_f1);
  CHECK(ctrl.variants[1].per_fold_f1 == ctrl.variants[2].per_fold_f1);

  FeatureMatrix no_spatial = fused.column_block(0, 6);
  no_spatial.parafac_cols = 6;
  CHECK(code_of([&] { branch_variants(no_spatial); }) == Errc::InvalidInput);
}

TEST_CASE("confusion matrix CSV") {
  ConfusionMatrix cm;
  cm.k = 2;
  cm.counts = {3, 1, 0, 5};
  CHECK(to_csv(cm) == "3,1\n0,5\n");
}
