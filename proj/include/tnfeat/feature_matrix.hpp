#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace tnfeat::features {

/// Row-major float32 sample-by-feature matrix. `parafac_cols` and
/// `spatial_cols` record the fused block layout (PARAFAC block first).
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;
  std::size_t parafac_cols = 0;
  std::size_t spatial_cols = 0;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0f) {}

  std::span<float> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const float> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  float operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  float& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }

  /// Throws InvalidInput on non-finite values or an inconsistent layout.
  void validate() const;

  /// Rows in the given order (indices may repeat).
  FeatureMatrix select_rows(std::span<const std::size_t> indices) const;
  /// Columns [begin, end).
  FeatureMatrix column_block(std::size_t begin, std::size_t end) const;

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;
};

/// Side-by-side concatenation; either block may be empty (0 columns). The
/// result records the two block widths.
FeatureMatrix concat_blocks(const FeatureMatrix& parafac, const FeatureMatrix& spatial);

/// FMX1: "FMX1", u32 LE rows, u32 LE cols, rows*cols float32 LE row-major.
std::vector<std::uint8_t> encode_fmx1(const FeatureMatrix& m);
/// Throws InvalidInput on a malformed buffer or non-finite values.
FeatureMatrix decode_fmx1(std::span<const std::uint8_t> bytes);
void write_fmx1(const std::filesystem::path& path, const FeatureMatrix& m);
FeatureMatrix read_fmx1(const std::filesystem::path& path);

/// Header "f0,f1,...", one sample per line, shortest round-trip decimals.
std::string to_csv(const FeatureMatrix& m);

}  // namespace tnfeat::features
