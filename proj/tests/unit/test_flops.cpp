#include "tnfeat/error.hpp"
#include "tnfeat/flops.hpp"

#include <doctest.h>

#include <vector>

using namespace tnfeat;
using namespace tnfeat::flops;

namespace {

/// Term-by-term count for a 3-way tensor, written out without loops over
/// modes.
std::uint64_t three_way(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t r) {
  const std::uint64_t r2 = r * r;
  const std::uint64_t mode0 = 2 * r * a * (b * c) + 2 * b * r2 + 2 * c * r2 + r2 + r2 * r;
  const std::uint64_t mode1 = 2 * r * b * (a * c) + 2 * a * r2 + 2 * c * r2 + r2 + r2 * r;
  const std::uint64_t mode2 = 2 * r * c * (a * b) + 2 * a * r2 + 2 * b * r2 + r2 + r2 * r;
  return mode0 + mode1 + mode2;
}

}  // namespace

TEST_CASE("golden (2,2,2) rank 1 count") {
  const std::uint64_t shape[] = {2, 2, 2};
  CHECK(cost_cp_als(shape, 1, 1) == 78);
  CHECK(cost_cp_als(shape, 1, 2) == 156);
}

TEST_CASE("count matches the term-by-term formula on a grid") {
  for (std::uint64_t a : {2u, 3u, 16u})
    for (std::uint64_t b : {2u, 5u, 16u})
      for (std::uint64_t c : {1u, 4u, 16u})
        for (std::uint64_t r : {1u, 3u, 16u})
          for (std::uint64_t s : {1u, 7u, 100u}) {
            const std::uint64_t shape[] = {a, b, c};
            const std::uint64_t v = cost_cp_als(shape, r, s);
            CHECK(v == s * three_way(a, b, c, r));
            CHECK(v == s * cost_cp_als(shape, r, 1));
            CHECK(cost_cp_als(shape, r + 1, s) > v);
          }
}

TEST_CASE("rank 16 costs more than rank 3 on 16x16x16") {
  const std::uint64_t shape[] = {16, 16, 16};
  CHECK(cost_cp_als(shape, 16, 1) > cost_cp_als(shape, 3, 1));
}

TEST_CASE("invalid cost model inputs") {
  const std::uint64_t one[] = {4};
  CHECK_THROWS_AS(cost_cp_als(one, 1, 1), Error);
  const std::uint64_t zero[] = {4, 0};
  CHECK_THROWS_AS(cost_cp_als(zero, 1, 1), Error);
}

TEST_CASE("pipeline cost") {
  PipelineCostInput in;
  in.images = 0;
  const PipelineCost none = cost_pipeline(in);
  CHECK(none.total == 0);
  CHECK(none.cp_als == 0);
  CHECK(none.spatial_conv == 0);
  CHECK(none.forest_comparisons == 0);

  in.images = 10;
  in.rank = 3;
  in.sweeps = 50;
  in.filters = 32;
  in.trees = 100;
  in.expected_depth = 8;
  in.references = {{"AlexNet", 714197696}};
  const PipelineCost c3 = cost_pipeline(in);
  CHECK(c3.total == c3.cp_als + c3.spatial_conv);
  CHECK(c3.spatial_conv == 10u * 2 * 32 * 9 * 64 * 64);
  CHECK(c3.forest_comparisons == 10u * 100 * 8);
  const std::uint64_t shape[] = {16, 16, 16};
  CHECK(c3.cp_als == 10 * cost_cp_als(shape, 3, 50));
  CHECK(c3.per_image_flops * 10 == c3.total);

  in.images = 20;
  CHECK(cost_pipeline(in).total == 2 * c3.total);
  in.images = 10;
  in.rank = 16;
  CHECK(cost_pipeline(in).total > c3.total);

  const auto j = to_json(in, cost_pipeline(in));
  REQUIRE(j["references"].size() == 1);
  CHECK(j["references"][0]["name"] == "AlexNet");
  CHECK(j["references"][0]["flops"] == 714197696u);
}

TEST_CASE("balanced depth") {
  CHECK(balanced_depth(1) == 1);
  CHECK(balanced_depth(2) == 1);
  CHECK(balanced_depth(3) == 2);
  CHECK(balanced_depth(4) == 2);
  CHECK(balanced_depth(5) == 3);
  CHECK(balanced_depth(1024) == 10);
  CHECK(balanced_depth(1025) == 11);
}
