#pragma once

#include "tnfeat/cp.hpp"
#include "tnfeat/feature_matrix.hpp"
#include "tnfeat/preprocess.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace tnfeat::features {

/// Per-image CP features. The 64x64 image is scaled to [0,1] and reshaped
/// row-major into a 16x16x16 tensor. Layout: [weights (R), factor 0, factor
/// 1, factor 2], each factor 16xR row-major.
struct ParafacFeatureSpec {
  std::size_t rank = 16;
  tensor::AlsOptions als;

  static constexpr std::size_t kSide = 16;
  std::size_t length() const noexcept { return rank * (1 + 3 * kSide); }
};

/// Stand-in for a CNN embedding: a seeded bank of 3x3 filters, zero-padded
/// stride-1 correlation, ReLU, then global average and global max per
/// filter, emitted as (avg, max) pairs.
struct SpatialFeatureSpec {
  std::size_t filter_count = 32;
  std::uint64_t seed = 0;

  std::size_t length() const noexcept { return 2 * filter_count; }
};

struct ParafacFeatures {
  std::vector<double> values;
  /// The decomposition was degenerate (zero image); values are all zero.
  bool degenerate = false;
  int sweeps = 0;
};

tensor::DenseTensor image_tensor(const preprocess::GrayImage64& img);

/// Emits the layout above from a model; canonicalizes first.
std::vector<double> parafac_layout(const tensor::CPModel& model);

ParafacFeatures parafac_features(const preprocess::GrayImage64& img, const ParafacFeatureSpec& spec);

using Filter3x3 = std::array<double, 9>;
std::vector<Filter3x3> filter_bank(const SpatialFeatureSpec& spec);
std::vector<double> spatial_features(const preprocess::GrayImage64& img, const SpatialFeatureSpec& spec);

struct Extraction {
  FeatureMatrix parafac;
  FeatureMatrix spatial;
  std::vector<bool> degenerate;
  std::vector<int> sweeps;
};

/// Both branches for every image, on up to `workers` threads. Row i always
/// belongs to images[i], whatever the schedule. With `with_spatial` false
/// the spatial block has zero columns.
Extraction extract(std::span<const preprocess::GrayImage64> images, const ParafacFeatureSpec& parafac,
                   const SpatialFeatureSpec& spatial, bool with_spatial = true, std::size_t workers = 1);

/// Reads an FMX1 file to be used verbatim as the spatial block. Throws
/// EmbeddingMismatch when the row count differs from expected_rows.
FeatureMatrix import_embeddings(const std::filesystem::path& path, std::size_t expected_rows);
FeatureMatrix import_embeddings(std::span<const std::uint8_t> fmx1, std::size_t expected_rows);

struct Standardizer {
  static constexpr double kMinStd = 1e-8;
  std::vector<double> mean;
  std::vector<double> stddev;

  /// (x - mean) / std per column. Throws ShapeMismatch on a column count
  /// mismatch.
  FeatureMatrix apply(const FeatureMatrix& m) const;
};

/// Column means and population standard deviations (floored at kMinStd)
/// of the given rows. Throws InvalidInput with fewer than 2 rows.
Standardizer fit_standardizer(const FeatureMatrix& train);

/// Concatenates the blocks (either may have zero columns) and standardizes
/// the result. Throws ShapeMismatch on differing row counts.
FeatureMatrix fuse(const FeatureMatrix& parafac, const FeatureMatrix& spatial, const Standardizer& standardizer);

}  // namespace tnfeat::features
