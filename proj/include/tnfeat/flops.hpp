#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace tnfeat::flops {

/// Analytic operation counts; one multiply-add counts as 2 FLOPs.
///
/// One ALS sweep over an N-way tensor with dimensions I_1..I_N and rank R
/// updates every mode n once. For mode n, with J_n = prod_{m != n} I_m:
///   MTTKRP                 X_(n) (I_n x J_n) times the Khatri-Rao product
///                          (J_n x R):                  2 * R * I_n * J_n
///   Gram matrices          A_m^T A_m for every m != n:  sum 2 * I_m * R^2
///   Hadamard combination   N - 2 elementwise R x R products: R^2 * (N - 2)
///   normal-equation solve  R^3
/// Khatri-Rao formation and column normalization are not counted.
std::uint64_t cost_cp_als(std::span<const std::uint64_t> shape, std::uint64_t rank, std::uint64_t sweeps);

struct Reference {
  std::string name;
  std::uint64_t flops = 0;
};

struct PipelineCostInput {
  std::uint64_t images = 0;
  std::uint64_t rank = 16;
  std::uint64_t sweeps = 100;
  std::uint64_t filters = 32;
  std::uint64_t trees = 100;
  std::uint64_t expected_depth = 0;
  std::vector<Reference> references;
};

struct PipelineCost {
  std::uint64_t cp_als = 0;
  std::uint64_t spatial_conv = 0;
  std::uint64_t total = 0;  // cp_als + spatial_conv
  /// Forest inference, counted as threshold comparisons, not FLOPs.
  std::uint64_t forest_comparisons = 0;
  std::uint64_t per_image_flops = 0;
  std::vector<Reference> references;
};

/// CP-ALS on the 16x16x16 image tensor plus 2 * filters * 9 * 64 * 64 per
/// image for the convolution bank; forest inference as trees * depth
/// comparisons per image.
PipelineCost cost_pipeline(const PipelineCostInput& in);

/// ceil(log2(n)) with a floor of 1; the depth of a balanced tree over n
/// training rows.
std::uint64_t balanced_depth(std::uint64_t n);

nlohmann::ordered_json to_json(const PipelineCostInput& in, const PipelineCost& cost);

}  // namespace tnfeat::flops
