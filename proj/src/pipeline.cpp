#include "tnfeat/pipeline.hpp"

#include "tnfeat/dataset.hpp"
#include "tnfeat/error.hpp"
#include "tnfeat/eval.hpp"
#include "tnfeat/features.hpp"
#include "tnfeat/image_io.hpp"
#include "tnfeat/parallel.hpp"
#include "tnfeat/synth.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <chrono>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

namespace tnfeat::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

Error bad_value(const std::string& key, const std::string& value, const std::string& why) {
  return Error(Errc::InvalidConfig, key + ": " + why + " (got '" + value + "')");
}

template <typename T>
T parse_number(const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  T out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  if (value.empty() || (value.front() == '-' && std::is_unsigned_v<T>)) throw bad_value(key, raw, "expected a non-negative number");
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) throw bad_value(key, raw, "expected a number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& raw) {
  std::string v = trim(raw);
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw bad_value(key, raw, "expected true or false");
}

std::vector<std::string> split_list(const std::string& raw, char sep) {
  std::vector<std::string> out;
  const std::string v = trim(raw);
  if (v.empty() || v == "none") return out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = v.find(sep, start);
    std::string item = trim(std::string_view(v).substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (!item.empty()) out.push_back(std::move(item));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& raw) {
  std::vector<std::size_t> out;
  for (const std::string& item : split_list(raw, ',')) out.push_back(parse_number<std::size_t>(key, item));
  return out;
}

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

struct KeyHandler {
  const char* name;
  const char* help;
  std::function<void(RunConfig&, const std::string&)> set;
};

const std::vector<KeyHandler>& key_table() {
  static const std::vector<KeyHandler> table = {
      {"dataset_root", "class-per-folder image tree",
       [](RunConfig& c, const std::string& v) { c.dataset_root = trim(v); }},
      {"output_dir", "artifact directory", [](RunConfig& c, const std::string& v) { c.output_dir = trim(v); }},
      {"parafac_rank", "CP rank of the primary configuration",
       [](RunConfig& c, const std::string& v) { c.parafac_rank = parse_number<std::size_t>("parafac_rank", v); }},
      {"compare_ranks", "comma-separated ranks evaluated alongside parafac_rank ('none' for none)",
       [](RunConfig& c, const std::string& v) { c.compare_ranks = parse_size_list("compare_ranks", v); }},
      {"rank_candidates", "comma-separated ranks for inner-CV rank selection",
       [](RunConfig& c, const std::string& v) { c.rank_candidates = parse_size_list("rank_candidates", v); }},
      {"spatial_filters", "filters in the spatial branch",
       [](RunConfig& c, const std::string& v) { c.spatial_filters = parse_number<std::size_t>("spatial_filters", v); }},
      {"outer_k", "outer folds", [](RunConfig& c, const std::string& v) { c.outer_k = parse_number<std::size_t>("outer_k", v); }},
      {"inner_k", "inner folds", [](RunConfig& c, const std::string& v) { c.inner_k = parse_number<std::size_t>("inner_k", v); }},
      {"ablation_folds", "folds of the ablation study",
       [](RunConfig& c, const std::string& v) { c.ablation_folds = parse_number<std::size_t>("ablation_folds", v); }},
      {"seed", "base seed", [](RunConfig& c, const std::string& v) { c.seed = parse_number<std::uint64_t>("seed", v); }},
      {"tree_count", "trees per forest",
       [](RunConfig& c, const std::string& v) { c.tree_count = parse_number<std::size_t>("tree_count", v); }},
      {"max_depth", "tree depth limit (0: unlimited)",
       [](RunConfig& c, const std::string& v) { c.max_depth = parse_number<std::size_t>("max_depth", v); }},
      {"min_samples_split", "smallest node that may split",
       [](RunConfig& c, const std::string& v) { c.min_samples_split = parse_number<std::size_t>("min_samples_split", v); }},
      {"features_per_split", "features tried per split (0: sqrt)",
       [](RunConfig& c, const std::string& v) { c.features_per_split = parse_number<std::size_t>("features_per_split", v); }},
      {"bootstrap", "bootstrap resampling per tree",
       [](RunConfig& c, const std::string& v) { c.bootstrap = parse_bool("bootstrap", v); }},
      {"als_max_sweeps", "ALS sweep limit",
       [](RunConfig& c, const std::string& v) { c.als_max_sweeps = parse_number<int>("als_max_sweeps", v); }},
      {"als_tolerance", "ALS relative fit tolerance",
       [](RunConfig& c, const std::string& v) { c.als_tolerance = parse_number<double>("als_tolerance", v); }},
      {"als_ridge", "ALS ridge term",
       [](RunConfig& c, const std::string& v) { c.als_ridge = parse_number<double>("als_ridge", v); }},
      {"als_init", "ALS initialization: svd or uniform",
       [](RunConfig& c, const std::string& v) {
         const std::string t = trim(v);
         if (t == "svd") {
           c.als_init = tensor::AlsInit::Svd;
         } else if (t == "uniform") {
           c.als_init = tensor::AlsInit::Uniform;
         } else {
           throw bad_value("als_init", v, "expected svd or uniform");
         }
       }},
      {"als_line_search", "exact line search along the last ALS update",
       [](RunConfig& c, const std::string& v) { c.als_line_search = parse_bool("als_line_search", v); }},
      {"embeddings_file", "FMX1 file replacing the spatial branch",
       [](RunConfig& c, const std::string& v) {
         const std::string t = trim(v);
         if (t.empty() || t == "none") {
           c.embeddings_file.reset();
         } else {
           c.embeddings_file = t;
         }
       }},
      {"flops_reference", "';'-separated name:flops reference rows",
       [](RunConfig& c, const std::string& v) {
         c.flops_reference = split_list(v, ';');
         (void)parse_references(c.flops_reference);
       }},
      {"workers", "worker threads (0: all cores)",
       [](RunConfig& c, const std::string& v) { c.workers = parse_number<std::size_t>("workers", v); }},
  };
  return table;
}

void require(bool ok, const std::string& key, const std::string& why) {
  if (!ok) throw Error(Errc::InvalidConfig, key + ": " + why);
}

json read_json(const fs::path& path) {
  const auto bytes = io::read_bytes(path);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidInput, path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  io::write_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void ensure_output_dir(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) throw Error(Errc::IoError, "cannot create " + cfg.output_dir.string() + ": " + ec.message());
}

json environment(const RunConfig& cfg) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream when;
  when << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  json env;
  env["generated_at"] = when.str();
  env["hardware_threads"] = std::thread::hardware_concurrency();
  env["workers"] = resolve_workers(cfg.workers);
  env["output_dir"] = cfg.output_dir.generic_string();
#if defined(__clang__)
  env["compiler"] = std::string("clang ") + __clang_version__;
#elif defined(__GNUC__)
  env["compiler"] = std::string("gcc ") + __VERSION__;
#endif
  return env;
}

void finish(json& j, const RunConfig& cfg) {
  if (cfg.annotate) j["environment"] = environment(cfg);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fixed4(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << v;
  return s.str();
}

forest::ForestOptions forest_options(const RunConfig& cfg) {
  forest::ForestOptions f;
  f.tree_count = cfg.tree_count;
  f.max_depth = cfg.max_depth;
  f.min_samples_split = cfg.min_samples_split;
  f.features_per_split = cfg.features_per_split;
  f.bootstrap = cfg.bootstrap;
  f.seed = cfg.seed;
  return f;
}

struct LoadedFeatures {
  features::FeatureMatrix matrix;
  json sidecar;
};

/// Reads features_r<R>.fmx1 and checks it against the manifest's clean set.
LoadedFeatures load_features(const RunConfig& cfg, std::size_t rank, const dataset::Manifest& manifest) {
  LoadedFeatures out;
  out.sidecar = read_json(features_sidecar_path(cfg, rank));
  out.matrix = features::read_fmx1(features_path(cfg, rank));
  const auto clean = manifest.clean_indices();
  if (out.matrix.rows != clean.size()) {
    throw Error(Errc::ShapeMismatch, features_path(cfg, rank).string() + " has " + std::to_string(out.matrix.rows) +
                                         " rows, manifest has " + std::to_string(clean.size()) + " clean records");
  }
  if (out.sidecar.value("record_index", std::vector<std::size_t>{}) != clean) {
    throw Error(Errc::InvalidInput, features_sidecar_path(cfg, rank).string() + " does not match the manifest");
  }
  out.matrix.parafac_cols = out.sidecar.at("parafac_cols").get<std::size_t>();
  out.matrix.spatial_cols = out.sidecar.at("spatial_cols").get<std::size_t>();
  out.matrix.validate();
  return out;
}

json table_view(const std::vector<eval::NestedCvReport>& reports) {
  json columns = json::array();
  for (const auto& r : reports) {
    for (const char* m : {"acc", "prec", "rec", "f1"}) columns.push_back("r" + std::to_string(r.rank) + "_" + m);
  }
  auto fields = [&](auto&& pick) {
    json row;
    for (const auto& r : reports) {
      const eval::MetricsRecord& m = pick(r);
      const std::string p = "r" + std::to_string(r.rank) + "_";
      row[p + "acc"] = m.accuracy;
      row[p + "prec"] = m.weighted_precision;
      row[p + "rec"] = m.weighted_recall;
      row[p + "f1"] = m.weighted_f1;
    }
    return row;
  };
  json rows = json::array();
  const std::size_t folds = reports.empty() ? 0 : reports.front().outer.size();
  for (std::size_t f = 0; f < folds; ++f) {
    json row;
    row["fold"] = f + 1;
    row.update(fields([f](const eval::NestedCvReport& r) -> const eval::MetricsRecord& { return r.outer[f].test; }));
    rows.push_back(std::move(row));
  }
  json view;
  view["averaging"] = "weighted";
  view["columns"] = std::move(columns);
  view["folds"] = std::move(rows);
  view["mean"] = fields([](const eval::NestedCvReport& r) -> const eval::MetricsRecord& { return r.outer_test.mean; });
  view["std"] = fields([](const eval::NestedCvReport& r) -> const eval::MetricsRecord& { return r.outer_test.std; });
  return view;
}

}  // namespace

void RunConfig::validate() const {
  require(!dataset_root.empty(), "dataset_root", "must be set");
  require(!output_dir.empty(), "output_dir", "must be set");
  require(parafac_rank >= 1, "parafac_rank", "must be >= 1");
  for (std::size_t r : compare_ranks) require(r >= 1, "compare_ranks", "every rank must be >= 1");
  for (std::size_t r : rank_candidates) require(r >= 1, "rank_candidates", "every rank must be >= 1");
  require(spatial_filters >= 1 || embeddings_file.has_value(), "spatial_filters", "must be >= 1");
  require(outer_k >= 2, "outer_k", "must be >= 2 (got " + std::to_string(outer_k) + ")");
  require(inner_k >= 2, "inner_k", "must be >= 2 (got " + std::to_string(inner_k) + ")");
  require(ablation_folds >= 2, "ablation_folds", "must be >= 2 (got " + std::to_string(ablation_folds) + ")");
  require(tree_count >= 1, "tree_count", "must be >= 1");
  require(min_samples_split >= 2, "min_samples_split", "must be >= 2");
  require(als_max_sweeps >= 1, "als_max_sweeps", "must be >= 1");
  require(std::isfinite(als_tolerance) && als_tolerance >= 0.0, "als_tolerance", "must be finite and >= 0");
  require(std::isfinite(als_ridge) && als_ridge >= 0.0, "als_ridge", "must be finite and >= 0");
  require(!embeddings_file || !embeddings_file->empty(), "embeddings_file", "must not be empty");
}

std::vector<std::size_t> RunConfig::ranks() const {
  std::vector<std::size_t> out;
  auto add = [&](std::size_t r) {
    if (std::find(out.begin(), out.end(), r) == out.end()) out.push_back(r);
  };
  add(parafac_rank);
  for (std::size_t r : compare_ranks) add(r);
  for (std::size_t r : rank_candidates) add(r);
  return out;
}

std::vector<std::size_t> RunConfig::reported_ranks() const {
  std::vector<std::size_t> out{parafac_rank};
  for (std::size_t r : compare_ranks) {
    if (std::find(out.begin(), out.end(), r) == out.end()) out.push_back(r);
  }
  return out;
}

json RunConfig::to_json() const {
  json j;
  j["dataset_root"] = dataset_root.generic_string();
  j["parafac_rank"] = parafac_rank;
  j["compare_ranks"] = compare_ranks;
  j["rank_candidates"] = rank_candidates;
  j["spatial_filters"] = spatial_filters;
  j["outer_k"] = outer_k;
  j["inner_k"] = inner_k;
  j["ablation_folds"] = ablation_folds;
  j["seed"] = seed;
  j["tree_count"] = tree_count;
  j["max_depth"] = max_depth;
  j["min_samples_split"] = min_samples_split;
  j["features_per_split"] = features_per_split;
  j["bootstrap"] = bootstrap;
  j["als_max_sweeps"] = als_max_sweeps;
  j["als_tolerance"] = als_tolerance;
  j["als_ridge"] = als_ridge;
  j["als_init"] = als_init == tensor::AlsInit::Svd ? "svd" : "uniform";
  j["als_line_search"] = als_line_search;
  j["embeddings_file"] = embeddings_file ? json(embeddings_file->generic_string()) : json(nullptr);
  j["flops_reference"] = flops_reference;
  return j;
}

std::vector<flops::Reference> parse_references(const std::vector<std::string>& entries) {
  std::vector<flops::Reference> out;
  for (const std::string& e : entries) {
    const std::size_t colon = e.rfind(':');
    if (colon == std::string::npos || colon == 0) {
      throw Error(Errc::InvalidConfig, "flops_reference: expected name:flops (got '" + e + "')");
    }
    std::string digits;
    for (char c : e.substr(colon + 1)) {
      if (c != ',' && c != '_' && c != ' ') digits += c;
    }
    out.push_back({trim(e.substr(0, colon)), parse_number<std::uint64_t>("flops_reference", digits)});
  }
  return out;
}

fs::path manifest_path(const RunConfig& cfg) { return cfg.output_dir / "manifest.jsonl"; }

fs::path features_path(const RunConfig& cfg, std::size_t rank) {
  return cfg.output_dir / ("features_r" + std::to_string(rank) + ".fmx1");
}

fs::path features_sidecar_path(const RunConfig& cfg, std::size_t rank) {
  return cfg.output_dir / ("features_r" + std::to_string(rank) + ".json");
}

void ingest(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  ensure_output_dir(cfg);
  const dataset::IngestResult result = dataset::ingest(cfg.dataset_root, resolve_workers(cfg.workers));
  for (const std::string& w : result.warnings) log << "warning: " << w << "\n";
  const dataset::Manifest& m = result.manifest;
  dataset::write_manifest(manifest_path(cfg), m);

  std::size_t rejected = 0;
  std::size_t duplicates = 0;
  for (const auto& r : m.records) {
    if (!r.accepted) ++rejected;
    if (r.duplicate_of) ++duplicates;
  }
  log << "ingest: " << m.classes.size() << " classes, N0=" << m.raw_total << ", N1=" << m.clean_total
      << " (rejected " << rejected << ", duplicates " << duplicates << ") in " << fixed4(seconds_since(t0)) << " s\n";
}

void extract(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t workers = resolve_workers(cfg.workers);
  const dataset::Manifest manifest = dataset::read_manifest(manifest_path(cfg));
  const std::vector<std::size_t> clean = manifest.clean_indices();

  std::vector<preprocess::GrayImage64> images(clean.size());
  parallel_for(clean.size(), workers, [&](std::size_t i) {
    const dataset::Record& rec = manifest.records[clean[i]];
    preprocess::Outcome out = preprocess::run_file(cfg.dataset_root / fs::path(rec.path));
    if (!out.image) {
      throw Error(Errc::InvalidInput, rec.path + " no longer passes preprocessing; re-run ingest");
    }
    images[i] = *out.image;
  });

  features::SpatialFeatureSpec sspec;
  sspec.filter_count = cfg.spatial_filters;
  sspec.seed = cfg.seed;
  std::optional<features::FeatureMatrix> spatial;
  std::string spatial_source = "conv_bank";
  if (cfg.embeddings_file) {
    spatial = features::import_embeddings(*cfg.embeddings_file, clean.size());
    spatial_source = "embeddings";
  }

  for (std::size_t rank : cfg.ranks()) {
    features::ParafacFeatureSpec pspec;
    pspec.rank = rank;
    pspec.als.max_sweeps = cfg.als_max_sweeps;
    pspec.als.rel_fit_tolerance = cfg.als_tolerance;
    pspec.als.ridge = cfg.als_ridge;
    pspec.als.init_seed = cfg.seed;
    pspec.als.init = cfg.als_init;
    pspec.als.line_search = cfg.als_line_search;
    features::Extraction ex = features::extract(images, pspec, sspec, !spatial.has_value(), workers);
    if (!spatial) spatial = ex.spatial;
    const features::FeatureMatrix fused = features::concat_blocks(ex.parafac, *spatial);
    features::write_fmx1(features_path(cfg, rank), fused);

    std::vector<std::size_t> degenerate;
    for (std::size_t i = 0; i < ex.degenerate.size(); ++i) {
      if (ex.degenerate[i]) degenerate.push_back(i);
    }
    json side;
    side["rank"] = rank;
    side["rows"] = fused.rows;
    side["cols"] = fused.cols;
    side["parafac_cols"] = fused.parafac_cols;
    side["spatial_cols"] = fused.spatial_cols;
    side["spatial_source"] = spatial_source;
    side["degenerate_rows"] = degenerate;
    side["record_index"] = clean;
    side["als_sweeps"] = ex.sweeps;
    side["config"] = cfg.to_json();
    finish(side, cfg);
    write_json(features_sidecar_path(cfg, rank), side);
    log << "extract: rank " << rank << ", " << fused.rows << " x " << fused.cols << " (" << degenerate.size()
        << " degenerate)\n";
  }
  log << "extract: done in " << fixed4(seconds_since(t0)) << " s\n";
}

void evaluate(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const dataset::Manifest manifest = dataset::read_manifest(manifest_path(cfg));
  const std::vector<int> labels = manifest.clean_labels();
  const std::size_t k = manifest.classes.size();

  std::map<std::size_t, features::FeatureMatrix> matrices;
  for (std::size_t rank : cfg.ranks()) matrices.emplace(rank, load_features(cfg, rank, manifest).matrix);

  eval::NestedCvOptions opts;
  opts.outer_k = cfg.outer_k;
  opts.inner_k = cfg.inner_k;
  opts.seed = cfg.seed;
  opts.forest = forest_options(cfg);
  opts.rank_candidates = cfg.rank_candidates;
  opts.workers = resolve_workers(cfg.workers);

  std::vector<eval::NestedCvReport> reports;
  for (std::size_t rank : cfg.reported_ranks()) {
    reports.push_back(eval::run_nested_cv(matrices, labels, k, rank, opts));
    const eval::NestedCvReport& r = reports.back();
    log << "evaluate: rank " << rank << " outer accuracy " << fixed4(r.outer_test.mean.accuracy) << " +/- "
        << fixed4(r.outer_test.std.accuracy) << ", macro F1 " << fixed4(r.outer_test.mean.macro_f1) << "\n";
    for (const eval::OuterRow& row : r.outer) {
      const std::string fold = std::to_string(row.fold + 1);
      write_text(cfg.output_dir / ("cm_r" + std::to_string(rank) + "_fold" + fold + ".csv"), eval::to_csv(row.test_cm));
      if (rank == cfg.parafac_rank) {
        write_text(cfg.output_dir / ("cm_fold" + fold + ".csv"), eval::to_csv(row.test_cm));
      }
    }
  }

  json report;
  report["config"] = cfg.to_json();
  report["classes"] = manifest.classes.names;
  report["samples"] = labels.size();
  report["class_counts"] = manifest.clean_counts;
  json configs = json::array();
  for (const auto& r : reports) configs.push_back(eval::to_json(r));
  report["configurations"] = std::move(configs);
  report["table"] = table_view(reports);
  finish(report, cfg);
  write_json(cfg.output_dir / "report.json", report);
  log << "evaluate: done in " << fixed4(seconds_since(t0)) << " s\n";
}

void ablate(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const dataset::Manifest manifest = dataset::read_manifest(manifest_path(cfg));
  const std::vector<int> labels = manifest.clean_labels();
  const LoadedFeatures loaded = load_features(cfg, cfg.parafac_rank, manifest);
  const auto variants = eval::branch_variants(loaded.matrix);
  const eval::AblationReport rep = eval::run_ablation(variants, labels, manifest.classes.size(), cfg.ablation_folds,
                                                      forest_options(cfg), cfg.seed, resolve_workers(cfg.workers));
  json j;
  j["config"] = cfg.to_json();
  j["rank"] = cfg.parafac_rank;
  j["spatial_source"] = loaded.sidecar.value("spatial_source", "conv_bank");
  j.update(eval::to_json(rep));
  finish(j, cfg);
  write_json(cfg.output_dir / "ablation.json", j);
  for (const auto& row : rep.variants) {
    log << "ablate: " << row.name << " macro F1 " << fixed4(row.mean_f1) << " +/- " << fixed4(row.std_f1) << "\n";
  }
  log << "ablate: done in " << fixed4(seconds_since(t0)) << " s\n";
}

void flops(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const dataset::Manifest manifest = dataset::read_manifest(manifest_path(cfg));
  const std::uint64_t n = manifest.clean_total;
  const std::uint64_t train_rows = n - n / cfg.outer_k;
  json configs = json::array();
  std::vector<flops::Reference> refs = parse_references(cfg.flops_reference);
  for (std::size_t rank : cfg.reported_ranks()) {
    flops::PipelineCostInput in;
    in.images = n;
    in.rank = rank;
    in.sweeps = static_cast<std::uint64_t>(cfg.als_max_sweeps);
    in.filters = cfg.embeddings_file ? 0 : cfg.spatial_filters;
    in.trees = cfg.tree_count;
    in.expected_depth = cfg.max_depth == 0 ? flops::balanced_depth(train_rows)
                                           : std::min<std::uint64_t>(cfg.max_depth, flops::balanced_depth(train_rows));
    const flops::PipelineCost cost = flops::cost_pipeline(in);
    json c = flops::to_json(in, cost);
    c.erase("references");
    configs.push_back(std::move(c));
    log << "flops: rank " << rank << " total " << cost.total << " (" << cost.per_image_flops << " per image)\n";
  }
  json refs_json = json::array();
  for (const auto& r : refs) refs_json.push_back({{"name", r.name}, {"flops", r.flops}});
  json j;
  j["config"] = cfg.to_json();
  j["configurations"] = std::move(configs);
  j["references"] = std::move(refs_json);
  finish(j, cfg);
  write_json(cfg.output_dir / "flops.json", j);
}

void all(const RunConfig& cfg, std::ostream& log) {
  ingest(cfg, log);
  extract(cfg, log);
  evaluate(cfg, log);
  ablate(cfg, log);
  flops(cfg, log);
}

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Tensor-decomposition image features with a forest classifier", "tnfeat"};
  app.set_config("--config", "", "flat key = value file; flags override it");
  app.allow_config_extras(false);
  app.require_subcommand(1, 1);

  std::map<std::string, std::string> values;
  std::vector<std::pair<std::string, CLI::Option*>> key_options;
  for (const KeyHandler& h : key_table()) {
    CLI::Option* opt = app.add_option(std::string("--") + h.name, values[h.name], h.help);
    key_options.emplace_back(h.name, opt);
  }
  bool annotate = false;
  app.add_flag("--annotate", annotate, "add environment metadata to the artifacts");

  struct Step {
    const char* name;
    const char* help;
    void (*fn)(const RunConfig&, std::ostream&);
  };
  const Step steps[] = {
      {"ingest", "scan, preprocess and deduplicate the dataset (manifest.jsonl)", &ingest},
      {"extract", "compute feature matrices (features_r<R>.fmx1)", &extract},
      {"evaluate", "nested cross-validation (report.json, cm_fold*.csv)", &evaluate},
      {"ablate", "branch ablation (ablation.json)", &ablate},
      {"flops", "analytic cost model (flops.json)", &flops},
      {"all", "ingest, extract, evaluate, ablate and flops", &all},
  };
  std::vector<std::pair<CLI::App*, const Step*>> subs;
  for (const Step& s : steps) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    sub->fallthrough();
    subs.emplace_back(sub, &s);
  }

  CLI::App* synth_cmd = app.add_subcommand("synth", "write the synthetic class-per-folder fixture");
  synth_cmd->fallthrough();
  synth::SynthOptions synth_opts;
  std::string per_class;
  std::string synth_output;
  synth_cmd->add_option("--classes", synth_opts.classes, "number of classes");
  synth_cmd->add_option("--per-class,--per_class", per_class, "comma-separated image count per class (default 40 each)");
  synth_cmd->add_option("--seed", synth_opts.seed, "fixture seed");
  synth_cmd->add_option("--duplicates", synth_opts.duplicates, "byte-identical copies to plant");
  synth_cmd->add_option("--size", synth_opts.size, "image side in pixels");
  synth_cmd->add_option("--noise", synth_opts.noise, "pixel noise standard deviation");
  synth_cmd->add_option("--output", synth_output, "target directory (default: dataset_root, else ./synthetic)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    RunConfig cfg;
    for (const auto& [name, opt] : key_options) {
      if (opt->count() == 0) continue;
      for (const KeyHandler& h : key_table()) {
        if (name == h.name) h.set(cfg, values[name]);
      }
    }
    cfg.annotate = annotate;

    if (synth_cmd->parsed()) {
      synth_opts.per_class = parse_size_list("per-class", per_class);
      fs::path root = !synth_output.empty() ? fs::path(synth_output)
                      : !cfg.dataset_root.empty() ? cfg.dataset_root
                                                  : fs::path("synthetic");
      const synth::SynthSummary s = synth::generate(root, synth_opts);
      out << "synth: wrote " << s.images << " images to " << root.generic_string() << " (per class " << join(s.per_class)
          << ")\n";
      return 0;
    }
    for (const auto& [sub, step] : subs) {
      if (sub->parsed()) {
        step->fn(cfg, out);
        return 0;
      }
    }
    err << app.help();
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == Errc::IoError || e.code() == Errc::Unreadable ? 2 : 1;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace tnfeat::pipeline
