#include "tnfeat/flops.hpp"

#include "tnfeat/error.hpp"

#include <bit>

namespace tnfeat::flops {

std::uint64_t cost_cp_als(std::span<const std::uint64_t> shape, std::uint64_t rank, std::uint64_t sweeps) {
  if (shape.size() < 2) throw Error(Errc::InvalidInput, "cost model needs at least two modes");
  if (rank == 0 || sweeps == 0) throw Error(Errc::InvalidInput, "rank and sweeps must be >= 1");
  for (std::uint64_t d : shape) {
    if (d == 0) throw Error(Errc::InvalidInput, "dimensions must be positive");
  }
  const std::uint64_t order = shape.size();
  const std::uint64_t r2 = rank * rank;
  std::uint64_t per_sweep = 0;
  for (std::uint64_t n = 0; n < order; ++n) {
    std::uint64_t others = 1;
    std::uint64_t grams = 0;
    for (std::uint64_t m = 0; m < order; ++m) {
      if (m == n) continue;
      others *= shape[m];
      grams += 2 * shape[m] * r2;
    }
    per_sweep += 2 * rank * shape[n] * others + grams + r2 * (order - 2) + r2 * rank;
  }
  return sweeps * per_sweep;
}

std::uint64_t balanced_depth(std::uint64_t n) {
  if (n <= 2) return 1;
  return std::bit_width(n - 1);
}

PipelineCost cost_pipeline(const PipelineCostInput& in) {
  PipelineCost out;
  out.references = in.references;
  if (in.images == 0) return out;
  const std::uint64_t image_shape[] = {16, 16, 16};
  const std::uint64_t per_image_cp = cost_cp_als(image_shape, in.rank, in.sweeps);
  const std::uint64_t per_image_conv = 2 * in.filters * 9 * 64 * 64;
  out.cp_als = in.images * per_image_cp;
  out.spatial_conv = in.images * per_image_conv;
  out.total = out.cp_als + out.spatial_conv;
  out.per_image_flops = per_image_cp + per_image_conv;
  out.forest_comparisons = in.images * in.trees * in.expected_depth;
  return out;
}

nlohmann::ordered_json to_json(const PipelineCostInput& in, const PipelineCost& cost) {
  nlohmann::ordered_json j;
  j["images"] = in.images;
  j["rank"] = in.rank;
  j["sweeps"] = in.sweeps;
  j["filters"] = in.filters;
  j["trees"] = in.trees;
  j["expected_depth"] = in.expected_depth;
  j["stages"] = {{"cp_als", cost.cp_als}, {"spatial_conv", cost.spatial_conv}};
  j["total_flops"] = cost.total;
  j["per_image_flops"] = cost.per_image_flops;
  j["forest_inference_comparisons"] = cost.forest_comparisons;
  nlohmann::ordered_json refs = nlohmann::ordered_json::array();
  for (const Reference& r : cost.references) refs.push_back({{"name", r.name}, {"flops", r.flops}});
  j["references"] = std::move(refs);
  return j;
}

}  // namespace tnfeat::flops
