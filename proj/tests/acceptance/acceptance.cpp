#include "support.hpp"

#include "tnfeat/cp.hpp"
#include "tnfeat/dataset.hpp"
#include "tnfeat/eval.hpp"
#include "tnfeat/features.hpp"
#include "tnfeat/flops.hpp"
#include "tnfeat/image_io.hpp"
#include "tnfeat/pipeline.hpp"
#include "tnfeat/preprocess.hpp"
#include "tnfeat/rng.hpp"
#include "tnfeat/synth.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

using namespace tnfeat;
using tnfeat::testing::constant_image;
using tnfeat::testing::random_image;
using tnfeat::testing::TempDir;
using tnfeat::testing::write_png;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ---------------------------------------------------------------- 1 and 2

tensor::Matrix random_factor(Rng& rng, std::size_t rows, std::size_t rank) {
  tensor::Matrix m(rows, rank);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0);
  return m;
}

/// Element-wise sum of weighted outer products, independent of the library's
/// unfolding and Khatri-Rao code.
std::vector<double> outer_sum(const std::vector<double>& w, const std::vector<tensor::Matrix>& f) {
  const std::size_t I = f[0].rows(), J = f[1].rows(), K = f[2].rows();
  std::vector<double> data(I * J * K, 0.0);
  for (std::size_t i = 0; i < I; ++i)
    for (std::size_t j = 0; j < J; ++j)
      for (std::size_t k = 0; k < K; ++k) {
        double s = 0.0;
        for (std::size_t r = 0; r < w.size(); ++r) s += w[r] * f[0](i, r) * f[1](j, r) * f[2](k, r);
        data[(i * J + j) * K + k] = s;
      }
  return data;
}

double oracle_fit(const tensor::CPModel& m, const std::vector<double>& data) {
  const std::vector<double> back = outer_sum(m.weights, m.factors);
  double err = 0.0, norm = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    err += (data[i] - back[i]) * (data[i] - back[i]);
    norm += data[i] * data[i];
  }
  return 1.0 - std::sqrt(err) / std::sqrt(norm);
}

Outcome cp_exactness() {
  double worst = 1.0, total = 0.0;
  int max_sweeps = 0;
  std::size_t passed = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(1000 + seed);
    std::vector<tensor::Matrix> f;
    for (int n = 0; n < 3; ++n) f.push_back(random_factor(rng, 16, 3));
    const std::vector<double> data = outer_sum({1.0, 1.0, 1.0}, f);
    const tensor::DenseTensor t({16, 16, 16}, data);
    tensor::AlsOptions opts;
    opts.max_sweeps = 200;
    opts.rel_fit_tolerance = 1e-10;
    const auto start = Clock::now();
    const tensor::AlsResult res = tensor::cp_als(t, 3, opts);
    total += seconds_since(start);
    const double fit = oracle_fit(res.model, data);
    worst = std::min(worst, fit);
    max_sweeps = std::max(max_sweeps, res.sweeps);
    passed += fit >= 0.999 && res.sweeps <= 200;
  }
  return {passed == 20 && total < 5.0, std::to_string(passed) + "/20 tensors fit >= 0.999, min fit " + fmt(worst, 6) +
                                           ", max sweeps " + std::to_string(max_sweeps) + ", " + fmt(total, 3) + " s"};
}

Outcome als_monotonicity() {
  std::size_t violations = 0, runs = 0, steps = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(5000 + seed);
    std::vector<double> data(4096);
    for (double& v : data) v = rng.uniform();
    const tensor::DenseTensor t({16, 16, 16}, data);
    for (std::size_t rank : {3u, 16u}) {
      for (tensor::AlsInit init : {tensor::AlsInit::Svd, tensor::AlsInit::Uniform}) {
        tensor::AlsOptions opts;
        opts.init = init;
        opts.line_search = init == tensor::AlsInit::Svd;
        opts.init_seed = seed;
        const tensor::AlsResult res = tensor::cp_als(t, rank, opts);
        ++runs;
        for (std::size_t i = 1; i < res.errors.size(); ++i) {
          ++steps;
          const double rise = res.errors[i] - res.errors[i - 1];
          worst = std::max(worst, rise);
          violations += rise > 1e-9;
        }
      }
    }
  }
  return {violations == 0, std::to_string(violations) + " violations over " + std::to_string(steps) + " sweeps in " +
                               std::to_string(runs) + " runs, largest rise " + fmt(worst, 12)};
}

// ---------------------------------------------------------------- 3

int gray_oracle(int r, int g, int b) {
  const long n = 2989L * r + 5870L * g + 1140L * b;
  const long q = n / 10000;
  return static_cast<int>(std::min<long>(255, q + (2 * (n % 10000) >= 10000 ? 1 : 0)));
}

preprocess::RawImage image(int w, int h, int channels, std::vector<std::uint8_t> px, std::optional<int> tag = {}) {
  preprocess::RawImage img;
  img.width = w;
  img.height = h;
  img.channels = channels;
  img.pixels = std::move(px);
  img.orientation = tag;
  return img;
}

Outcome preprocessing_goldens() {
  std::size_t gray_bad = 0, gray_total = 0;
  auto check_gray = [&](int r, int g, int b) {
    const auto out = preprocess::to_grayscale(
        image(1, 1, 3, {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)}));
    ++gray_total;
    gray_bad += out.pixels[0] != gray_oracle(r, g, b);
  };
  for (int r : {0, 255})
    for (int g : {0, 255})
      for (int b : {0, 255}) check_gray(r, g, b);
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const int r = static_cast<int>(rng.below(256)), g = static_cast<int>(rng.below(256)),
              b = static_cast<int>(rng.below(256));
    check_gray(r, g, b);
  }

  // a b / c d / e f, hand-enumerated per tag
  struct Case {
    int tag, w, h;
    std::vector<std::uint8_t> out;
  };
  const Case cases[] = {
      {1, 2, 3, {1, 2, 3, 4, 5, 6}}, {2, 2, 3, {2, 1, 4, 3, 6, 5}}, {3, 2, 3, {6, 5, 4, 3, 2, 1}},
      {4, 2, 3, {5, 6, 3, 4, 1, 2}}, {5, 3, 2, {1, 3, 5, 2, 4, 6}}, {6, 3, 2, {5, 3, 1, 6, 4, 2}},
      {7, 3, 2, {6, 4, 2, 5, 3, 1}}, {8, 3, 2, {2, 4, 6, 1, 3, 5}},
  };
  std::size_t exif_bad = 0;
  for (const Case& c : cases) {
    const auto out = preprocess::apply_exif_orientation(image(2, 3, 1, {1, 2, 3, 4, 5, 6}, c.tag));
    exif_bad += out.width != c.w || out.height != c.h || out.pixels != c.out;
  }

  std::size_t resize_bad = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const preprocess::RawImage img = random_image(seed, 64, 64, 1);
    const auto values = preprocess::resize_bilinear_values(img, 64, 64);
    const preprocess::GrayImage64 g = preprocess::resize_to_64(img);
    bool same = true;
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
      same = same && values[i] == static_cast<double>(img.pixels[i]) && g.pixels[i] == img.pixels[i];
    }
    resize_bad += !same;
  }
  return {gray_bad == 0 && exif_bad == 0 && resize_bad == 0,
          "grayscale " + std::to_string(gray_total - gray_bad) + "/" + std::to_string(gray_total) + ", EXIF " +
              std::to_string(8 - exif_bad) + "/8, resize identity " + std::to_string(20 - resize_bad) + "/20"};
}

// ---------------------------------------------------------------- 4

Outcome leakage_suite() {
  std::size_t violations = 0;
  Rng rng(4242);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 2 + rng.below(4);
    const std::size_t classes = 2 + rng.below(5);
    std::vector<int> y;
    for (std::size_t c = 0; c < classes; ++c) y.insert(y.end(), k + rng.below(15), static_cast<int>(c));
    rng.shuffle(y.begin(), y.end());
    const std::uint64_t seed = rng.next();
    const dataset::FoldAssignment folds = dataset::stratified_kfold(y, k, seed);
    const std::size_t f = rng.below(k);
    const auto test = folds.members(f);
    const auto train = folds.complement(f);
    const std::set<std::size_t> test_set(test.begin(), test.end());
    const std::set<std::size_t> train_set(train.begin(), train.end());

    for (std::size_t i : dataset::oversample(train, y, seed ^ 0x9e37)) {
      violations += test_set.count(i) + (train_set.count(i) == 0 ? 1 : 0);
    }

    features::FeatureMatrix x(y.size(), 6);
    for (float& v : x.data) v = static_cast<float>(rng.normal());
    features::FeatureMatrix poisoned = x;
    for (std::size_t i : test)
      for (std::size_t j = 0; j < x.cols; ++j) poisoned(i, j) = static_cast<float>(1e6 * (1.0 + rng.uniform()));
    const auto a = features::fit_standardizer(x.select_rows(train));
    const auto b = features::fit_standardizer(poisoned.select_rows(train));
    violations += a.mean != b.mean || a.stddev != b.stddev;

    forest::ForestOptions fo;
    fo.tree_count = 5;
    const auto clean = eval::train_and_score(x, y, classes, train, test, fo, seed);
    const auto dirty = eval::train_and_score(poisoned, y, classes, train, test, fo, seed);
    violations += clean.train.scalars() != dirty.train.scalars();
  }
  return {violations == 0, std::to_string(violations) + " violations over 100 configurations"};
}

// ---------------------------------------------------------------- 5

struct Fixture {
  std::size_t files = 0;
  std::size_t clean = 0;
  std::vector<std::vector<std::string>> groups;  // duplicate groups of relative paths
};

Outcome dedup_bookkeeping(const fs::path& root) {
  std::vector<std::pair<fs::path, Fixture>> fixtures;
  {
    const fs::path dir = root / "dedup_a";
    Fixture fx;
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < 4; ++i) {
        write_png(dir / ("k" + std::to_string(c)) / ("u" + std::to_string(i) + ".png"),
                  random_image(static_cast<std::uint64_t>(100 + 10 * c + i), 24, 24));
      }
    const auto dup1 = random_image(900, 24, 24);
    const auto dup2 = random_image(901, 30, 20, 3);
    write_png(dir / "k0/d1_a.png", dup1);
    write_png(dir / "k1/d1_b.png", dup1);
    write_png(dir / "k2/d1_c.png", dup1);
    write_png(dir / "k1/d2_a.png", dup2);
    write_png(dir / "k1/d2_b.png", dup2);
    write_png(dir / "k0/flat.png", constant_image(128, 24, 24));
    write_png(dir / "k2/flat.png", constant_image(0, 10, 10));
    io::write_bytes(dir / "k2/broken.png", std::vector<std::uint8_t>{0x89, 'P', 'N', 'G'});
    fx.files = 12 + 5 + 2 + 1;
    fx.clean = 12 + 2;
    fx.groups = {{"k0/d1_a.png", "k1/d1_b.png", "k2/d1_c.png"}, {"k1/d2_a.png", "k1/d2_b.png"}};
    fixtures.emplace_back(dir, fx);
  }
  {
    const fs::path dir = root / "dedup_b";
    synth::SynthOptions opts;
    opts.classes = 4;
    opts.per_class = {6, 5, 7, 3};
    opts.seed = 11;
    opts.duplicates = 3;
    synth::generate(dir, opts);
    Fixture fx;
    fx.files = 21 + 3;
    fx.clean = 21;
    fixtures.emplace_back(dir, fx);
  }
  {
    const fs::path dir = root / "dedup_c";
    Fixture fx;
    const auto same = random_image(77, 16, 16);
    for (int c = 0; c < 2; ++c)
      for (int i = 0; i < 3; ++i) write_png(dir / ("k" + std::to_string(c)) / ("s" + std::to_string(i) + ".png"), same);
    fx.files = 6;
    fx.clean = 1;
    fx.groups = {{"k0/s0.png", "k0/s1.png", "k0/s2.png", "k1/s0.png", "k1/s1.png", "k1/s2.png"}};
    fixtures.emplace_back(dir, fx);
  }

  std::size_t bad = 0;
  std::string detail;
  for (const auto& [dir, fx] : fixtures) {
    const dataset::Manifest m = dataset::ingest(dir).manifest;
    std::size_t raw_sum = 0, clean_sum = 0, clean_records = 0;
    for (std::size_t v : m.raw_counts) raw_sum += v;
    for (std::size_t v : m.clean_counts) clean_sum += v;
    std::map<std::string, const dataset::Record*> by_path;
    for (const auto& r : m.records) {
      by_path[r.path] = &r;
      clean_records += !r.rejection && !r.duplicate_of;
    }
    bool ok = m.raw_total == fx.files && raw_sum == fx.files && m.records.size() == fx.files &&
              m.clean_total == fx.clean && clean_sum == fx.clean && clean_records == fx.clean;
    for (const auto& group : fx.groups) {
      std::size_t survivors = 0;
      for (const auto& p : group) {
        const auto it = by_path.find(p);
        if (it == by_path.end()) {
          ok = false;
          continue;
        }
        survivors += !it->second->duplicate_of && !it->second->rejection;
      }
      ok = ok && survivors == 1;
    }
    bad += !ok;
    detail += (detail.empty() ? "" : "; ") + dir.filename().string() + " N0=" + std::to_string(m.raw_total) + "/" +
              std::to_string(fx.files) + " N1=" + std::to_string(m.clean_total) + "/" + std::to_string(fx.clean);
  }
  return {bad == 0, detail};
}

// ---------------------------------------------------------------- 6

struct OracleMetrics {
  double accuracy = 0, macro_p = 0, macro_r = 0, macro_f1 = 0, weighted_p = 0, weighted_r = 0, weighted_f1 = 0;
  std::vector<double> p, r, f1;
};

OracleMetrics brute_force(const std::vector<int>& yt, const std::vector<int>& yp, int k) {
  OracleMetrics o;
  const double n = static_cast<double>(yt.size());
  double correct = 0;
  for (std::size_t i = 0; i < yt.size(); ++i) correct += yt[i] == yp[i];
  o.accuracy = correct / n;
  for (int c = 0; c < k; ++c) {
    double tp = 0, predicted = 0, actual = 0;
    for (std::size_t i = 0; i < yt.size(); ++i) {
      predicted += yp[i] == c;
      actual += yt[i] == c;
      tp += yp[i] == c && yt[i] == c;
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

Outcome metric_oracle() {
  Rng rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = trial % 2 == 0 ? 2 : 8;
    const std::size_t n = 1 + rng.below(80);
    std::vector<int> yt(n), yp(n);
    for (std::size_t i = 0; i < n; ++i) {
      yt[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
      yp[i] = rng.uniform() < 0.5 ? yt[i] : static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
    }
    const eval::MetricsRecord m = eval::compute_metrics(eval::confusion_matrix(yt, yp, static_cast<std::size_t>(k)));
    const OracleMetrics o = brute_force(yt, yp, k);
    const double diffs[] = {m.accuracy - o.accuracy,       m.macro_precision - o.macro_p,
                            m.macro_recall - o.macro_r,    m.macro_f1 - o.macro_f1,
                            m.weighted_precision - o.weighted_p, m.weighted_recall - o.weighted_r,
                            m.weighted_f1 - o.weighted_f1};
    for (double d : diffs) worst = std::max(worst, std::abs(d));
    for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c) {
      worst = std::max({worst, std::abs(m.precision[c] - o.p[c]), std::abs(m.recall[c] - o.r[c]),
                        std::abs(m.f1[c] - o.f1[c])});
    }
  }
  eval::ConfusionMatrix hand;
  hand.k = 2;
  hand.counts = {1, 1, 0, 1};
  const eval::MetricsRecord h = eval::compute_metrics(hand);
  const bool hand_ok = h.accuracy == 2.0 / 3.0 && h.macro_f1 == 2.0 / 3.0;
  return {worst <= 1e-12 && hand_ok, "max deviation " + sci(worst) + " over 1000 pairs, hand case accuracy " +
                                         fmt(h.accuracy, 17) + " macro F1 " + fmt(h.macro_f1, 17)};
}

// ---------------------------------------------------------------- 9

Outcome flops_golden() {
  const std::uint64_t shape222[] = {2, 2, 2};
  const std::uint64_t golden = flops::cost_cp_als(shape222, 1, 1);
  std::size_t bad = 0, checked = 0;
  const std::vector<std::vector<std::uint64_t>> shapes = {{2, 2, 2}, {16, 16, 16}, {3, 5, 7}, {64, 64}, {4, 6, 8, 10}};
  for (const auto& shape : shapes) {
    for (std::uint64_t rank : {1u, 2u, 3u, 16u, 40u}) {
      for (std::uint64_t sweeps : {1u, 2u, 5u, 100u}) {
        ++checked;
        const std::uint64_t c = flops::cost_cp_als(shape, rank, sweeps);
        const std::uint64_t one = flops::cost_cp_als(shape, rank, 1);
        bad += c != sweeps * one;
        bad += flops::cost_cp_als(shape, rank + 1, sweeps) <= c;
      }
    }
  }
  return {golden == 78 && bad == 0, "cost((2,2,2),1,1) = " + std::to_string(golden) + ", " + std::to_string(bad) +
                                        " property failures over " + std::to_string(checked) + " grid points"};
}

// ---------------------------------------------------------------- 7, 8, 10

struct CliRunner {
  std::string exe;  // empty: in-process
  fs::path log_dir;

  bool operator()(const std::vector<std::string>& args, const std::string& name) const {
    if (exe.empty()) {
      std::ostringstream out, err;
      const int status = pipeline::cli_main(args, out, err);
      std::ofstream(log_dir / (name + ".log"), std::ios::binary) << out.str() << err.str();
      return status == 0;
    }
    std::string cmd = "\"" + exe + "\"";
    for (const auto& a : args) cmd += " \"" + a + "\"";
    cmd += " > \"" + (log_dir / (name + ".log")).string() + "\" 2>&1";
    return std::system(cmd.c_str()) == 0;
  }
};

std::string slurp(const fs::path& p) {
  const auto bytes = io::read_bytes(p);
  return std::string(bytes.begin(), bytes.end());
}

std::vector<std::string> determinism_files(const fs::path& dir) {
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string n = e.path().filename().string();
    if (n == "report.json" || n.rfind("features_", 0) == 0) names.push_back(n);
  }
  std::sort(names.begin(), names.end());
  return names;
}

}  // namespace

int main(int argc, char** argv) {
  TempDir work;
  CliRunner cli{argc > 1 ? argv[1] : "", work.path()};

  std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"CP exactness", cp_exactness},
      {"ALS monotonicity", als_monotonicity},
      {"Preprocessing goldens", preprocessing_goldens},
      {"Leakage suite", leakage_suite},
      {"Dedup and bookkeeping", [&] { return dedup_bookkeeping(work.path()); }},
      {"Metric oracle", metric_oracle},
  };

  const fs::path data = work / "synthetic";
  auto run_dir = [&](const char* name) { return work / name; };
  auto all_args = [&](const fs::path& out, const char* workers) {
    return std::vector<std::string>{"all", "--dataset_root", data.string(), "--output_dir", out.string(),
                                    "--parafac_rank", "16", "--compare_ranks", "3", "--outer_k", "5", "--inner_k", "5",
                                    "--ablation_folds", "3", "--workers", workers};
  };
  bool synth_ok = false, first_ok = false;
  double first_seconds = 0.0;
  auto ensure_first_run = [&] {
    static bool done = false;
    if (done) return;
    done = true;
    synth_ok = cli({"synth", "--classes", "8", "--per-class", "40,40,40,40,40,40,40,20", "--seed", "7", "--output",
                    data.string()},
                   "synth");
    if (!synth_ok) return;
    const auto start = Clock::now();
    first_ok = cli(all_args(run_dir("run_a"), "1"), "run_a");
    first_seconds = seconds_since(start);
  };

  criteria.emplace_back("End-to-end synthetic run", [&]() -> Outcome {
    ensure_first_run();
    if (!synth_ok || !first_ok) return {false, "pipeline run failed, see logs"};
    const auto report = nlohmann::json::parse(slurp(run_dir("run_a") / "report.json"));
    const auto& table = report["table"];
    std::map<int, std::vector<double>> acc;
    for (const auto& row : table["folds"]) {
      acc[16].push_back(row["r16_acc"].get<double>());
      acc[3].push_back(row["r3_acc"].get<double>());
    }
    auto mean = [](const std::vector<double>& v) {
      double s = 0.0;
      for (double x : v) s += x;
      return s / static_cast<double>(v.size());
    };
    auto sample_std = [&](const std::vector<double>& v) {
      const double m = mean(v);
      double s = 0.0;
      for (double x : v) s += (x - m) * (x - m);
      return std::sqrt(s / static_cast<double>(v.size() - 1));
    };
    const double m16 = mean(acc[16]), m3 = mean(acc[3]), s16 = sample_std(acc[16]), s3 = sample_std(acc[3]);
    const bool consistent = std::abs(m16 - table["mean"]["r16_acc"].get<double>()) <= 1e-12 &&
                            std::abs(m3 - table["mean"]["r3_acc"].get<double>()) <= 1e-12 &&
                            std::abs(s16 - table["std"]["r16_acc"].get<double>()) <= 1e-12 &&
                            std::abs(s3 - table["std"]["r3_acc"].get<double>()) <= 1e-12;
    const bool ok = report["samples"] == 300 && acc[16].size() == 5 && consistent && m16 >= 0.90 && m3 >= 0.90 &&
                    std::abs(m16 - m3) <= 0.05 && s16 <= 0.05 && s3 <= 0.05 && first_seconds < 600.0;
    return {ok, "acc r16 " + fmt(m16) + " +- " + fmt(s16) + ", r3 " + fmt(m3) + " +- " + fmt(s3) + ", |diff| " +
                    fmt(std::abs(m16 - m3)) + ", " + fmt(first_seconds, 1) + " s"};
  });

  criteria.emplace_back("Ablation echo", [&]() -> Outcome {
    ensure_first_run();
    if (!synth_ok || !first_ok) return {false, "pipeline run failed, see logs"};
    const auto ablation = nlohmann::json::parse(slurp(run_dir("run_a") / "ablation.json"));
    std::map<std::string, std::pair<double, double>> v;
    for (const auto& [name, row] : ablation["variants"].items()) {
      v[name] = {row["mean_f1"].get<double>(), row["std_f1"].get<double>()};
    }
    if (!v.count("CNN-only") || !v.count("PARAFAC-only") || !v.count("Fused")) return {false, "missing variants"};
    const double best = std::max(v["CNN-only"].first, v["PARAFAC-only"].first);
    const double best_std = std::max(v["CNN-only"].second, v["PARAFAC-only"].second);
    const bool ok = ablation["folds"] == 3 && v["Fused"].first >= best - 0.02 && v["Fused"].second <= best_std + 0.02;
    std::string detail;
    for (const char* name : {"CNN-only", "PARAFAC-only", "Fused"}) {
      detail += std::string(detail.empty() ? "" : ", ") + name + " " + fmt(v[name].first) + " +- " + fmt(v[name].second);
    }
    return {ok, detail};
  });

  criteria.emplace_back("FLOPs golden", flops_golden);

  criteria.emplace_back("Determinism", [&]() -> Outcome {
    ensure_first_run();
    if (!synth_ok || !first_ok) return {false, "pipeline run failed, see logs"};
    if (!cli(all_args(run_dir("run_b"), "1"), "run_b") || !cli(all_args(run_dir("run_c"), "8"), "run_c")) {
      return {false, "repeat run failed, see logs"};
    }
    const auto names = determinism_files(run_dir("run_a"));
    std::size_t differing = 0;
    for (const char* other : {"run_b", "run_c"}) {
      if (determinism_files(run_dir(other)) != names) ++differing;
      for (const auto& n : names) {
        if (!fs::exists(run_dir(other) / n) || slurp(run_dir("run_a") / n) != slurp(run_dir(other) / n)) ++differing;
      }
    }
    const bool ok = differing == 0 && names.size() >= 5;
    return {ok, std::to_string(names.size()) + " files compared across 3 runs (workers 1, 1, 8), " +
                    std::to_string(differing) + " differing"};
  });

  std::size_t failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << (i + 1 < 10 ? " " : "") << i + 1 << "] " << criteria[i].first
              << ": " << o.detail << " (" << fmt(seconds_since(start), 1) << " s)" << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  if (failures != 0) {
    for (const auto& e : fs::directory_iterator(work.path())) {
      if (e.path().extension() == ".log") std::cout << "--- " << e.path().filename().string() << "\n" << slurp(e.path());
    }
  }
  return failures == 0 ? 0 : 1;
}
