#include "tnfeat/feature_matrix.hpp"

#include "tnfeat/error.hpp"
#include "tnfeat/image_io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>

namespace tnfeat::features {

void FeatureMatrix::validate() const {
  if (data.size() != rows * cols) throw Error(Errc::InvalidInput, "feature matrix data length mismatch");
  if (parafac_cols + spatial_cols != cols && parafac_cols + spatial_cols != 0) {
    throw Error(Errc::InvalidInput, "feature block widths do not sum to the column count");
  }
  for (float v : data) {
    if (!std::isfinite(v)) throw Error(Errc::InvalidInput, "feature matrix contains non-finite values");
  }
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> indices) const {
  FeatureMatrix out(indices.size(), cols);
  out.parafac_cols = parafac_cols;
  out.spatial_cols = spatial_cols;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows) throw Error(Errc::InvalidInput, "row index out of range");
    const auto src = row(indices[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

FeatureMatrix FeatureMatrix::column_block(std::size_t begin, std::size_t end) const {
  if (begin > end || end > cols) throw Error(Errc::InvalidInput, "column block out of range");
  FeatureMatrix out(rows, end - begin);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto src = row(i).subspan(begin, end - begin);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

FeatureMatrix concat_blocks(const FeatureMatrix& parafac, const FeatureMatrix& spatial) {
  if (parafac.cols > 0 && spatial.cols > 0 && parafac.rows != spatial.rows) {
    throw Error(Errc::ShapeMismatch, "feature blocks have different row counts: " + std::to_string(parafac.rows) +
                                         " vs " + std::to_string(spatial.rows));
  }
  const std::size_t rows = parafac.cols > 0 ? parafac.rows : spatial.rows;
  FeatureMatrix out(rows, parafac.cols + spatial.cols);
  out.parafac_cols = parafac.cols;
  out.spatial_cols = spatial.cols;
  for (std::size_t i = 0; i < rows; ++i) {
    auto dst = out.row(i);
    if (parafac.cols > 0) std::copy(parafac.row(i).begin(), parafac.row(i).end(), dst.begin());
    if (spatial.cols > 0) {
      std::copy(spatial.row(i).begin(), spatial.row(i).end(), dst.begin() + static_cast<std::ptrdiff_t>(parafac.cols));
    }
  }
  return out;
}

namespace {

void put_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

std::uint32_t get_u32le(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
}

}  // namespace

std::vector<std::uint8_t> encode_fmx1(const FeatureMatrix& m) {
  if (m.rows > UINT32_MAX || m.cols > UINT32_MAX) throw Error(Errc::InvalidInput, "matrix too large for FMX1");
  std::vector<std::uint8_t> out = {'F', 'M', 'X', '1'};
  out.reserve(12 + 4 * m.data.size());
  put_u32le(out, static_cast<std::uint32_t>(m.rows));
  put_u32le(out, static_cast<std::uint32_t>(m.cols));
  for (float v : m.data) put_u32le(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

FeatureMatrix decode_fmx1(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "FMX1", 4) != 0) {
    throw Error(Errc::InvalidInput, "not an FMX1 buffer");
  }
  const std::size_t rows = get_u32le(&bytes[4]);
  const std::size_t cols = get_u32le(&bytes[8]);
  if ((bytes.size() - 12) / 4 != rows * cols || (bytes.size() - 12) % 4 != 0) {
    throw Error(Errc::InvalidInput, "FMX1 payload length does not match " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  FeatureMatrix m(rows, cols);
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = std::bit_cast<float>(get_u32le(&bytes[12 + 4 * i]));
  m.validate();
  return m;
}

void write_fmx1(const std::filesystem::path& path, const FeatureMatrix& m) { io::write_bytes(path, encode_fmx1(m)); }

FeatureMatrix read_fmx1(const std::filesystem::path& path) { return decode_fmx1(io::read_bytes(path)); }

std::string to_csv(const FeatureMatrix& m) {
  std::string out;
  for (std::size_t j = 0; j < m.cols; ++j) {
    if (j) out += ',';
    out += 'f';
    out += std::to_string(j);
  }
  out += '\n';
  char buf[32];
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < m.cols; ++j) {
      if (j) out += ',';
      const auto res = std::to_chars(buf, buf + sizeof buf, m(i, j));
      out.append(buf, res.ptr);
    }
    out += '\n';
  }
  return out;
}

}  // namespace tnfeat::features
