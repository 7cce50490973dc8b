#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tnfeat::preprocess {

/// Decoded image: 8-bit samples, row-major, channels interleaved.
struct RawImage {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> pixels;
  /// EXIF orientation code; nullopt when the file carried none.
  std::optional<int> orientation;

  std::uint8_t at(int x, int y, int c = 0) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  /// Throws InvalidInput when dimensions, channel count or pixel count are
  /// inconsistent.
  void validate() const;
};

inline constexpr int kSide = 64;
inline constexpr int kPixels = kSide * kSide;

struct GrayImage64 {
  std::array<std::uint8_t, kPixels> pixels{};

  std::uint8_t at(int row, int col) const { return pixels[static_cast<std::size_t>(row) * kSide + col]; }
  std::uint8_t& at(int row, int col) { return pixels[static_cast<std::size_t>(row) * kSide + col]; }

  friend bool operator==(const GrayImage64&, const GrayImage64&) = default;
};

enum class RejectionReason { NonFinite, UniformIntensity, Unreadable };

const char* to_string(RejectionReason r) noexcept;
std::optional<RejectionReason> rejection_from_string(std::string_view s) noexcept;

/// Applies the EXIF orientation transform and resets the tag to 1. Missing
/// tags act as 1; tags outside 1..8 also act as 1 and set *invalid_tag.
RawImage apply_exif_orientation(const RawImage& img, bool* invalid_tag = nullptr);

/// Luma 0.2989 R + 0.5870 G + 0.1140 B, rounded half away from zero.
/// Single-channel input is returned unchanged.
RawImage to_grayscale(const RawImage& img);

/// Bilinear resize of a single-channel image with half-pixel centers and
/// border clamping. Returns real-valued samples, row-major, before
/// quantization.
std::vector<double> resize_bilinear_values(const RawImage& img, int out_w, int out_h);

/// Quantizes resize_bilinear_values to 8 bits (round half away from zero).
RawImage resize_bilinear(const RawImage& img, int out_w, int out_h);

GrayImage64 resize_to_64(const RawImage& img);

/// nullopt means accept.
std::optional<RejectionReason> quality_check(std::span<const double> samples);

/// x[64*row + col] = pixel(row, col).
std::vector<double> flatten(const GrayImage64& img);

std::uint8_t quantize(double v) noexcept;

struct Outcome {
  std::optional<GrayImage64> image;
  std::optional<RejectionReason> rejection;
  std::vector<std::string> warnings;

  bool accepted() const noexcept { return image.has_value(); }
};

/// Orientation, grayscale, resize, quality check.
Outcome run(const RawImage& img);

/// Decodes the file first; decode failures become Unreadable.
Outcome run_file(const std::filesystem::path& path);

}  // namespace tnfeat::preprocess
