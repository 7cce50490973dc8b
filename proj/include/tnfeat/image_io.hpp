#pragma once

#include "tnfeat/preprocess.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace tnfeat::io {

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// Decodes PNG, JPEG or BMP by signature. Alpha is dropped, gray+alpha and
/// palette images are expanded, 16-bit samples are reduced to 8 bits. The
/// orientation is read from JPEG EXIF and is nullopt for other formats.
/// Throws Unreadable.
preprocess::RawImage decode_image(std::span<const std::uint8_t> bytes);
preprocess::RawImage read_image(const std::filesystem::path& path);

/// EXIF Orientation (tag 0x0112) from a JPEG APP1 segment, if present.
std::optional<int> jpeg_exif_orientation(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_png(const preprocess::RawImage& img);
/// Baseline JPEG; when `orientation` is set an APP1 EXIF block carrying it
/// is embedded.
std::vector<std::uint8_t> encode_jpeg(const preprocess::RawImage& img, int quality = 95,
                                      std::optional<int> orientation = std::nullopt);
/// Uncompressed 24-bit (or 8-bit paletted grayscale) bottom-up BMP.
std::vector<std::uint8_t> encode_bmp(const preprocess::RawImage& img);

}  // namespace tnfeat::io
