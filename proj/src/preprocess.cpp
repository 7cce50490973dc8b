#include "tnfeat/preprocess.hpp"

#include "tnfeat/error.hpp"
#include "tnfeat/image_io.hpp"

#include <algorithm>
#include <cmath>

namespace tnfeat::preprocess {

void RawImage::validate() const {
  if (width <= 0 || height <= 0) throw Error(Errc::InvalidInput, "image dimensions must be positive");
  if (channels != 1 && channels != 3) throw Error(Errc::InvalidInput, "image must have 1 or 3 channels");
  if (pixels.size() != static_cast<std::size_t>(width) * height * channels) {
    throw Error(Errc::InvalidInput, "pixel buffer does not match width*height*channels");
  }
}

const char* to_string(RejectionReason r) noexcept {
  switch (r) {
    case RejectionReason::NonFinite: return "NonFinite";
    case RejectionReason::UniformIntensity: return "UniformIntensity";
    case RejectionReason::Unreadable: return "Unreadable";
  }
  return "Unknown";
}

std::optional<RejectionReason> rejection_from_string(std::string_view s) noexcept {
  if (s == "NonFinite") return RejectionReason::NonFinite;
  if (s == "UniformIntensity") return RejectionReason::UniformIntensity;
  if (s == "Unreadable") return RejectionReason::Unreadable;
  return std::nullopt;
}

std::uint8_t quantize(double v) noexcept {
  // std::round rounds halfway cases away from zero.
  return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
}

RawImage apply_exif_orientation(const RawImage& img, bool* invalid_tag) {
  img.validate();
  int tag = img.orientation.value_or(1);
  if (invalid_tag) *invalid_tag = false;
  if (tag < 1 || tag > 8) {
    if (invalid_tag) *invalid_tag = true;
    tag = 1;
  }

  const int w = img.width;
  const int h = img.height;
  const bool swaps = tag >= 5;
  RawImage out;
  out.width = swaps ? h : w;
  out.height = swaps ? w : h;
  out.channels = img.channels;
  out.orientation = 1;
  out.pixels.resize(img.pixels.size());

  // For every output pixel, the source coordinate it reads from.
  auto source = [&](int x, int y) -> std::pair<int, int> {
    switch (tag) {
      case 2: return {w - 1 - x, y};
      case 3: return {w - 1 - x, h - 1 - y};
      case 4: return {x, h - 1 - y};
      case 5: return {y, x};
      case 6: return {y, h - 1 - x};
      case 7: return {w - 1 - y, h - 1 - x};
      case 8: return {w - 1 - y, x};
      default: return {x, y};
    }
  };

  const auto ch = static_cast<std::size_t>(img.channels);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const auto [sx, sy] = source(x, y);
      const std::size_t dst = (static_cast<std::size_t>(y) * out.width + x) * ch;
      const std::size_t src = (static_cast<std::size_t>(sy) * w + sx) * ch;
      std::copy_n(img.pixels.begin() + static_cast<std::ptrdiff_t>(src), ch, out.pixels.begin() + static_cast<std::ptrdiff_t>(dst));
    }
  }
  return out;
}

RawImage to_grayscale(const RawImage& img) {
  img.validate();
  if (img.channels == 1) return img;
  RawImage out;
  out.width = img.width;
  out.height = img.height;
  out.channels = 1;
  out.orientation = img.orientation;
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  out.pixels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Weights scaled by 10^4 keep the sum exact; +5000 then truncation is
    // round-half-up, which equals half-away-from-zero for nonnegative sums.
    const std::uint32_t sum = 2989u * img.pixels[3 * i] + 5870u * img.pixels[3 * i + 1] + 1140u * img.pixels[3 * i + 2];
    out.pixels[i] = static_cast<std::uint8_t>(std::min<std::uint32_t>((sum + 5000u) / 10000u, 255u));
  }
  return out;
}

std::vector<double> resize_bilinear_values(const RawImage& img, int out_w, int out_h) {
  img.validate();
  if (img.channels != 1) throw Error(Errc::InvalidInput, "resize expects a single-channel image");
  if (out_w <= 0 || out_h <= 0) throw Error(Errc::InvalidInput, "output size must be positive");

  const int w = img.width;
  const int h = img.height;
  auto axis = [](int i, int in, int out) {
    double s = (i + 0.5) * static_cast<double>(in) / out - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(in - 1));
    const int i0 = static_cast<int>(std::floor(s));
    const int i1 = std::min(i0 + 1, in - 1);
    return std::tuple{i0, i1, s - i0};
  };

  std::vector<double> out(static_cast<std::size_t>(out_w) * out_h);
  for (int y = 0; y < out_h; ++y) {
    const auto [y0, y1, fy] = axis(y, h, out_h);
    for (int x = 0; x < out_w; ++x) {
      const auto [x0, x1, fx] = axis(x, w, out_w);
      const double top = img.at(x0, y0) * (1.0 - fx) + img.at(x1, y0) * fx;
      const double bottom = img.at(x0, y1) * (1.0 - fx) + img.at(x1, y1) * fx;
      out[static_cast<std::size_t>(y) * out_w + x] = top * (1.0 - fy) + bottom * fy;
    }
  }
  return out;
}

RawImage resize_bilinear(const RawImage& img, int out_w, int out_h) {
  const auto values = resize_bilinear_values(img, out_w, out_h);
  RawImage out;
  out.width = out_w;
  out.height = out_h;
  out.channels = 1;
  out.orientation = img.orientation;
  out.pixels.reserve(values.size());
  for (double v : values) out.pixels.push_back(quantize(v));
  return out;
}

GrayImage64 resize_to_64(const RawImage& img) {
  const RawImage r = resize_bilinear(img, kSide, kSide);
  GrayImage64 out;
  std::copy(r.pixels.begin(), r.pixels.end(), out.pixels.begin());
  return out;
}

std::optional<RejectionReason> quality_check(std::span<const double> samples) {
  if (samples.empty()) return RejectionReason::Unreadable;
  for (double v : samples) {
    if (!std::isfinite(v)) return RejectionReason::NonFinite;
  }
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  if (*lo == *hi) return RejectionReason::UniformIntensity;
  return std::nullopt;
}

std::vector<double> flatten(const GrayImage64& img) {
  return std::vector<double>(img.pixels.begin(), img.pixels.end());
}

Outcome run(const RawImage& img) {
  Outcome outcome;
  bool invalid_tag = false;
  const RawImage upright = apply_exif_orientation(img, &invalid_tag);
  if (invalid_tag) outcome.warnings.push_back("orientation tag " + std::to_string(*img.orientation) + " outside 1..8, treated as 1");

  const RawImage gray = to_grayscale(upright);
  const auto values = resize_bilinear_values(gray, kSide, kSide);
  if (auto reason = quality_check(values)) {
    outcome.rejection = reason;
    return outcome;
  }

  GrayImage64 quantized;
  std::transform(values.begin(), values.end(), quantized.pixels.begin(), quantize);
  // Uniformity is judged on what downstream stages see.
  if (auto reason = quality_check(flatten(quantized))) {
    outcome.rejection = reason;
    return outcome;
  }
  outcome.image = quantized;
  return outcome;
}

Outcome run_file(const std::filesystem::path& path) {
  RawImage img;
  try {
    img = io::read_image(path);
  } catch (const Error& e) {
    Outcome outcome;
    outcome.rejection = RejectionReason::Unreadable;
    outcome.warnings.push_back(e.what());
    return outcome;
  }
  return run(img);
}

}  // namespace tnfeat::preprocess
