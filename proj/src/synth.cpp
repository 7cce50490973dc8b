#include "tnfeat/synth.hpp"

#include "tnfeat/error.hpp"
#include "tnfeat/image_io.hpp"
#include "tnfeat/rng.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>

namespace tnfeat::synth {

namespace fs = std::filesystem;

namespace {

std::string padded(std::size_t value, std::size_t width) {
  std::string s = std::to_string(value);
  if (s.size() < width) s.insert(0, width - s.size(), '0');
  return s;
}

std::string class_folder(std::size_t c, std::size_t classes) {
  return "class_" + padded(c, std::to_string(classes - 1).size());
}

}  // namespace

preprocess::RawImage render(std::size_t class_id, std::size_t index, const SynthOptions& opts) {
  Rng rng(derive_seed(opts.seed, {class_id, index}));
  const double s = opts.size;
  const double angle = 2.0 * std::numbers::pi * static_cast<double>(class_id) / static_cast<double>(opts.classes);
  const double ring = 0.22 * s;
  const double cx = s / 2.0 + ring * std::cos(angle) + rng.uniform(-0.03, 0.03) * s;
  const double cy = s / 2.0 + ring * std::sin(angle) + rng.uniform(-0.03, 0.03) * s;
  const double base_width = (class_id % 2 == 0 ? 0.08 : 0.14) * s;
  const double width = base_width * rng.uniform(0.9, 1.1);
  const double amplitude = rng.uniform(160.0, 200.0);
  const double background = 20.0;

  preprocess::RawImage img;
  img.width = opts.size;
  img.height = opts.size;
  img.channels = 1;
  img.pixels.resize(static_cast<std::size_t>(opts.size) * opts.size);
  for (int y = 0; y < opts.size; ++y) {
    for (int x = 0; x < opts.size; ++x) {
      const double dx = x + 0.5 - cx;
      const double dy = y + 0.5 - cy;
      const double v = background + amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * width * width)) + opts.noise * rng.normal();
      img.pixels[static_cast<std::size_t>(y) * opts.size + x] = preprocess::quantize(v);
    }
  }
  return img;
}

SynthSummary generate(const fs::path& root, const SynthOptions& opts) {
  if (opts.classes == 0) throw Error(Errc::InvalidConfig, "classes must be >= 1");
  if (opts.size < 4) throw Error(Errc::InvalidConfig, "size must be >= 4");
  std::vector<std::size_t> counts = opts.per_class;
  if (counts.empty()) counts.assign(opts.classes, 40);
  if (counts.size() != opts.classes) {
    throw Error(Errc::InvalidConfig, "per-class list has " + std::to_string(counts.size()) + " entries for " +
                                         std::to_string(opts.classes) + " classes");
  }

  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw Error(Errc::IoError, "cannot create " + root.string() + ": " + ec.message());

  SynthSummary summary;
  summary.per_class = counts;
  std::vector<fs::path> written;
  for (std::size_t c = 0; c < opts.classes; ++c) {
    const fs::path dir = root / class_folder(c, opts.classes);
    fs::create_directories(dir, ec);
    if (ec) throw Error(Errc::IoError, "cannot create " + dir.string() + ": " + ec.message());
    const std::size_t width = std::max<std::size_t>(4, std::to_string(counts[c]).size());
    for (std::size_t i = 0; i < counts[c]; ++i) {
      const fs::path file = dir / ("img_" + padded(i, width) + ".png");
      io::write_bytes(file, io::encode_png(render(c, i, opts)));
      written.push_back(file);
    }
  }
  summary.images = written.size();

  if (opts.duplicates > 0 && !written.empty()) {
    Rng rng(derive_seed(opts.seed, {0xD0Bu}));
    for (std::size_t d = 0; d < opts.duplicates; ++d) {
      const fs::path& source = written[rng.below(written.size())];
      const std::size_t target = rng.below(opts.classes);
      const fs::path file = root / class_folder(target, opts.classes) / ("dup_" + padded(d, 4) + ".png");
      io::write_bytes(file, io::read_bytes(source));
      ++summary.per_class[target];
      ++summary.images;
    }
  }
  return summary;
}

}  // namespace tnfeat::synth
