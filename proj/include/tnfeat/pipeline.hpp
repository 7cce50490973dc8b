#pragma once

#include "tnfeat/cp.hpp"
#include "tnfeat/flops.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace tnfeat::pipeline {

/// Every field is also a `--key value` flag and a `key = value` line in a
/// config file.
struct RunConfig {
  std::filesystem::path dataset_root;
  std::filesystem::path output_dir = "out";
  std::size_t parafac_rank = 16;
  /// Additional ranks evaluated side by side with parafac_rank.
  std::vector<std::size_t> compare_ranks = {3};
  /// Inner-CV rank selection candidates; empty disables selection.
  std::vector<std::size_t> rank_candidates;
  std::size_t spatial_filters = 32;
  std::size_t outer_k = 5;
  std::size_t inner_k = 5;
  std::size_t ablation_folds = 3;
  std::uint64_t seed = 42;

  std::size_t tree_count = 100;
  std::size_t max_depth = 0;
  std::size_t min_samples_split = 2;
  std::size_t features_per_split = 0;
  bool bootstrap = true;

  int als_max_sweeps = 100;
  double als_tolerance = 1e-6;
  double als_ridge = 1e-12;
  tensor::AlsInit als_init = tensor::AlsInit::Svd;
  bool als_line_search = true;

  std::optional<std::filesystem::path> embeddings_file;
  /// "name:flops" entries carried into flops.json as reference rows.
  std::vector<std::string> flops_reference;

  std::size_t workers = 0;
  bool annotate = false;

  /// Throws InvalidConfig with a message naming the offending key.
  void validate() const;
  /// parafac_rank, compare_ranks and rank_candidates, deduplicated, in that
  /// order.
  std::vector<std::size_t> ranks() const;
  /// parafac_rank then compare_ranks: the configurations reported.
  std::vector<std::size_t> reported_ranks() const;
  /// Canonical echo; omits output_dir, workers and annotate so artifacts do
  /// not depend on them.
  nlohmann::ordered_json to_json() const;
};

std::vector<flops::Reference> parse_references(const std::vector<std::string>& entries);

std::filesystem::path manifest_path(const RunConfig& cfg);
std::filesystem::path features_path(const RunConfig& cfg, std::size_t rank);
std::filesystem::path features_sidecar_path(const RunConfig& cfg, std::size_t rank);

/// Each step reads its inputs from and writes its artifacts to
/// cfg.output_dir. Progress goes to `log`. Errors are thrown.
void ingest(const RunConfig& cfg, std::ostream& log);
void extract(const RunConfig& cfg, std::ostream& log);
void evaluate(const RunConfig& cfg, std::ostream& log);
void ablate(const RunConfig& cfg, std::ostream& log);
void flops(const RunConfig& cfg, std::ostream& log);
void all(const RunConfig& cfg, std::ostream& log);

/// Full command-line entry point: parses args (without the program name),
/// runs the subcommand and returns the exit status (0 ok, 1 validation
/// error, 2 I/O error).
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tnfeat::pipeline
