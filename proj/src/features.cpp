#include "tnfeat/features.hpp"

#include "tnfeat/error.hpp"
#include "tnfeat/image_io.hpp"
#include "tnfeat/parallel.hpp"
#include "tnfeat/rng.hpp"

#include <algorithm>
#include <cmath>

namespace tnfeat::features {

using preprocess::GrayImage64;

tensor::DenseTensor image_tensor(const GrayImage64& img) {
  constexpr std::size_t s = ParafacFeatureSpec::kSide;
  std::vector<double> data(img.pixels.size());
  std::transform(img.pixels.begin(), img.pixels.end(), data.begin(), [](std::uint8_t v) { return v / 255.0; });
  return tensor::DenseTensor({s, s, s}, std::move(data));
}

std::vector<double> parafac_layout(const tensor::CPModel& model) {
  const tensor::CPModel canon = tensor::canonicalize(model);
  std::vector<double> out(canon.weights.begin(), canon.weights.end());
  for (const auto& f : canon.factors) {
    for (Eigen::Index i = 0; i < f.rows(); ++i) {
      for (Eigen::Index r = 0; r < f.cols(); ++r) out.push_back(f(i, r));
    }
  }
  return out;
}

ParafacFeatures parafac_features(const GrayImage64& img, const ParafacFeatureSpec& spec) {
  if (spec.rank == 0) throw Error(Errc::InvalidConfig, "parafac rank must be >= 1");
  const tensor::AlsResult fit = tensor::cp_als(image_tensor(img), spec.rank, spec.als);
  ParafacFeatures out;
  out.sweeps = fit.sweeps;
  if (fit.model.degenerate) {
    out.values.assign(spec.length(), 0.0);
    out.degenerate = true;
    return out;
  }
  out.values = parafac_layout(fit.model);
  return out;
}

std::vector<Filter3x3> filter_bank(const SpatialFeatureSpec& spec) {
  Rng rng(derive_seed(spec.seed, {0x5EA7u}));
  std::vector<Filter3x3> bank(spec.filter_count);
  for (auto& f : bank) {
    for (double& w : f) w = rng.uniform(-1.0, 1.0);
  }
  return bank;
}

std::vector<double> spatial_features(const GrayImage64& img, const SpatialFeatureSpec& spec) {
  if (spec.filter_count == 0) throw Error(Errc::InvalidConfig, "spatial filter_count must be >= 1");
  constexpr int side = preprocess::kSide;
  // Zero-padded copy of the [0,1]-scaled image.
  std::array<double, (side + 2) * (side + 2)> padded{};
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) padded[(r + 1) * (side + 2) + c + 1] = img.at(r, c) / 255.0;
  }

  const auto bank = filter_bank(spec);
  std::vector<double> out;
  out.reserve(spec.length());
  for (const Filter3x3& f : bank) {
    double sum = 0.0;
    double peak = 0.0;
    for (int r = 0; r < side; ++r) {
      for (int c = 0; c < side; ++c) {
        double acc = 0.0;
        for (int dr = 0; dr < 3; ++dr) {
          for (int dc = 0; dc < 3; ++dc) acc += f[dr * 3 + dc] * padded[(r + dr) * (side + 2) + c + dc];
        }
        const double relu = std::max(acc, 0.0);
        sum += relu;
        peak = std::max(peak, relu);
      }
    }
    out.push_back(sum / preprocess::kPixels);
    out.push_back(peak);
  }
  return out;
}

Extraction extract(std::span<const GrayImage64> images, const ParafacFeatureSpec& parafac,
                   const SpatialFeatureSpec& spatial, bool with_spatial, std::size_t workers) {
  Extraction out;
  const std::size_t n = images.size();
  out.parafac = FeatureMatrix(n, parafac.length());
  out.spatial = FeatureMatrix(n, with_spatial ? spatial.length() : 0);
  out.degenerate.assign(n, false);
  out.sweeps.assign(n, 0);
  std::vector<char> degenerate(n, 0);

  parallel_for(n, workers, [&](std::size_t i) {
    const ParafacFeatures pf = parafac_features(images[i], parafac);
    std::transform(pf.values.begin(), pf.values.end(), out.parafac.row(i).begin(), [](double v) { return static_cast<float>(v); });
    degenerate[i] = pf.degenerate ? 1 : 0;
    out.sweeps[i] = pf.sweeps;
    if (with_spatial) {
      const auto sf = spatial_features(images[i], spatial);
      std::transform(sf.begin(), sf.end(), out.spatial.row(i).begin(), [](double v) { return static_cast<float>(v); });
    }
  });
  for (std::size_t i = 0; i < n; ++i) out.degenerate[i] = degenerate[i] != 0;
  return out;
}

FeatureMatrix import_embeddings(std::span<const std::uint8_t> fmx1, std::size_t expected_rows) {
  FeatureMatrix m = decode_fmx1(fmx1);
  if (m.rows != expected_rows) {
    throw Error(Errc::EmbeddingMismatch, "embedding file has " + std::to_string(m.rows) + " rows, expected " +
                                             std::to_string(expected_rows));
  }
  return m;
}

FeatureMatrix import_embeddings(const std::filesystem::path& path, std::size_t expected_rows) {
  return import_embeddings(io::read_bytes(path), expected_rows);
}

Standardizer fit_standardizer(const FeatureMatrix& train) {
  if (train.rows < 2) throw Error(Errc::InvalidInput, "standardizer needs at least two rows");
  Standardizer s;
  s.mean.assign(train.cols, 0.0);
  s.stddev.assign(train.cols, 0.0);
  const auto n = static_cast<double>(train.rows);
  for (std::size_t i = 0; i < train.rows; ++i) {
    for (std::size_t j = 0; j < train.cols; ++j) s.mean[j] += train(i, j);
  }
  for (double& m : s.mean) m /= n;
  for (std::size_t i = 0; i < train.rows; ++i) {
    for (std::size_t j = 0; j < train.cols; ++j) {
      const double d = train(i, j) - s.mean[j];
      s.stddev[j] += d * d;
    }
  }
  for (double& v : s.stddev) v = std::max(std::sqrt(v / n), Standardizer::kMinStd);
  return s;
}

FeatureMatrix Standardizer::apply(const FeatureMatrix& m) const {
  if (m.cols != mean.size()) {
    throw Error(Errc::ShapeMismatch, "standardizer fitted on " + std::to_string(mean.size()) + " columns, got " +
                                         std::to_string(m.cols));
  }
  FeatureMatrix out = m;
  for (std::size_t i = 0; i < m.rows; ++i) {
    auto row = out.row(i);
    for (std::size_t j = 0; j < m.cols; ++j) row[j] = static_cast<float>((m(i, j) - mean[j]) / stddev[j]);
  }
  return out;
}

FeatureMatrix fuse(const FeatureMatrix& parafac, const FeatureMatrix& spatial, const Standardizer& standardizer) {
  return standardizer.apply(concat_blocks(parafac, spatial));
}

}  // namespace tnfeat::features
