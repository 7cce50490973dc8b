#pragma once

#include "tnfeat/preprocess.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace tnfeat::synth {

/// Fixture of class-per-folder grayscale PNGs. Class c renders a Gaussian
/// blob whose centre sits on a ring at angle 2*pi*c/K and whose width
/// alternates between two scales; every image jitters centre, width and
/// amplitude and adds Gaussian pixel noise.
struct SynthOptions {
  std::size_t classes = 8;
  std::vector<std::size_t> per_class;  // empty: 40 each
  std::uint64_t seed = 7;
  std::size_t duplicates = 0;  // extra byte-identical copies planted across classes
  int size = 64;
  double noise = 8.0;
};

struct SynthSummary {
  std::size_t images = 0;  // including duplicates
  std::vector<std::size_t> per_class;
};

preprocess::RawImage render(std::size_t class_id, std::size_t index, const SynthOptions& opts);

/// Writes root/class_<c>/img_<i>.png (and dup_<n>.png copies). Throws
/// InvalidConfig or IoError.
SynthSummary generate(const std::filesystem::path& root, const SynthOptions& opts);

}  // namespace tnfeat::synth
