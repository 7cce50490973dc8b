#include "tnfeat/image_io.hpp"

#include "tnfeat/error.hpp"

#include <cstdio>
#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <array>
#include <csetjmp>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iterator>

namespace tnfeat::io {

using preprocess::RawImage;

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(Errc::IoError, "read failed for " + path.string());
  return bytes;
}

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

namespace {

std::uint16_t read_u16(const std::uint8_t* p, bool little) {
  return little ? static_cast<std::uint16_t>(p[0] | (p[1] << 8)) : static_cast<std::uint16_t>((p[0] << 8) | p[1]);
}

std::uint32_t read_u32(const std::uint8_t* p, bool little) {
  return little ? (std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24))
                : ((std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]});
}

void put_u16le(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

// Orientation from a TIFF structure (the payload of an EXIF APP1 segment
// after the "Exif\0\0" prefix).
std::optional<int> tiff_orientation(std::span<const std::uint8_t> tiff) {
  if (tiff.size() < 8) return std::nullopt;
  bool little;
  if (tiff[0] == 'I' && tiff[1] == 'I') {
    little = true;
  } else if (tiff[0] == 'M' && tiff[1] == 'M') {
    little = false;
  } else {
    return std::nullopt;
  }
  if (read_u16(&tiff[2], little) != 42) return std::nullopt;
  const std::uint32_t ifd = read_u32(&tiff[4], little);
  if (ifd > tiff.size() || tiff.size() - ifd < 2) return std::nullopt;
  const std::uint16_t entries = read_u16(&tiff[ifd], little);
  for (std::uint32_t e = 0; e < entries; ++e) {
    const std::size_t off = ifd + 2 + std::size_t{12} * e;
    if (off + 12 > tiff.size()) return std::nullopt;
    if (read_u16(&tiff[off], little) != 0x0112) continue;
    if (read_u16(&tiff[off + 2], little) != 3) return std::nullopt;  // SHORT
    return static_cast<int>(read_u16(&tiff[off + 8], little));
  }
  return std::nullopt;
}

bool is_png(std::span<const std::uint8_t> b) { return b.size() >= 8 && png_sig_cmp(b.data(), 0, 8) == 0; }
bool is_jpeg(std::span<const std::uint8_t> b) { return b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF; }
bool is_bmp(std::span<const std::uint8_t> b) { return b.size() >= 2 && b[0] == 'B' && b[1] == 'M'; }

RawImage decode_png(std::span<const std::uint8_t> bytes) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw Error(Errc::Unreadable, std::string("png: ") + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;

  RawImage out;
  out.width = static_cast<int>(image.width);
  out.height = static_cast<int>(image.height);
  out.channels = color ? 3 : 1;
  out.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    const std::string message = image.message;
    png_image_free(&image);
    throw Error(Errc::Unreadable, "png: " + message);
  }
  return out;
}

struct JpegErrorManager {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

void jpeg_silent(j_common_ptr, int) {}

// Returns false with `message` filled on a libjpeg error. Keeps no objects
// with destructors between setjmp and the decompress calls.
bool decode_jpeg_into(std::span<const std::uint8_t> bytes, RawImage& out, std::string& message) {
  jpeg_decompress_struct cinfo;
  JpegErrorManager err;
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = jpeg_error_exit;
  err.pub.emit_message = jpeg_silent;
  if (setjmp(err.jump)) {
    message = err.message;
    jpeg_destroy_decompress(&cinfo);
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  if (cinfo.jpeg_color_space == JCS_CMYK || cinfo.jpeg_color_space == JCS_YCCK) {
    std::strcpy(err.message, "CMYK jpeg not supported");
    std::longjmp(err.jump, 1);
  }
  cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_start_decompress(&cinfo);

  out.width = static_cast<int>(cinfo.output_width);
  out.height = static_cast<int>(cinfo.output_height);
  out.channels = cinfo.output_components;
  out.pixels.resize(static_cast<std::size_t>(out.width) * out.height * out.channels);
  const std::size_t stride = static_cast<std::size_t>(out.width) * out.channels;
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = out.pixels.data() + cinfo.output_scanline * stride;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return true;
}

RawImage decode_jpeg(std::span<const std::uint8_t> bytes) {
  RawImage out;
  std::string message;
  if (!decode_jpeg_into(bytes, out, message)) throw Error(Errc::Unreadable, "jpeg: " + message);
  out.orientation = jpeg_exif_orientation(bytes);
  return out;
}

RawImage decode_bmp(std::span<const std::uint8_t> b) {
  if (b.size() < 54) throw Error(Errc::Unreadable, "bmp: truncated header");
  const std::uint32_t data_offset = read_u32(&b[10], true);
  const std::uint32_t dib_size = read_u32(&b[14], true);
  const auto width = static_cast<std::int32_t>(read_u32(&b[18], true));
  const auto raw_height = static_cast<std::int32_t>(read_u32(&b[22], true));
  const std::uint16_t bpp = read_u16(&b[28], true);
  const std::uint32_t compression = read_u32(&b[30], true);
  if (dib_size < 40) throw Error(Errc::Unreadable, "bmp: unsupported header");
  if (compression != 0) throw Error(Errc::Unreadable, "bmp: compressed bitmaps not supported");
  if (bpp != 8 && bpp != 24 && bpp != 32) throw Error(Errc::Unreadable, "bmp: unsupported bit depth");
  if (width <= 0 || raw_height == 0 || raw_height == INT32_MIN) throw Error(Errc::Unreadable, "bmp: bad dimensions");
  const bool top_down = raw_height < 0;
  const std::int32_t height = top_down ? -raw_height : raw_height;

  std::vector<std::array<std::uint8_t, 3>> palette;
  if (bpp == 8) {
    std::uint32_t colors = read_u32(&b[46], true);
    if (colors == 0) colors = 256;
    const std::size_t base = 14 + std::size_t{dib_size};
    if (colors > 256 || base + std::size_t{4} * colors > b.size()) throw Error(Errc::Unreadable, "bmp: bad palette");
    for (std::uint32_t i = 0; i < colors; ++i) {
      const std::uint8_t* p = &b[base + 4 * i];
      palette.push_back({p[2], p[1], p[0]});
    }
  }

  const std::size_t stride = (static_cast<std::size_t>(width) * bpp / 8 + 3) & ~std::size_t{3};
  if (data_offset > b.size() || b.size() - data_offset < stride * static_cast<std::size_t>(height)) {
    throw Error(Errc::Unreadable, "bmp: truncated pixel data");
  }

  const bool gray_palette =
      bpp == 8 && std::all_of(palette.begin(), palette.end(), [](const auto& c) { return c[0] == c[1] && c[1] == c[2]; });
  RawImage out;
  out.width = width;
  out.height = height;
  out.channels = gray_palette ? 1 : 3;
  out.pixels.resize(static_cast<std::size_t>(width) * height * out.channels);
  for (std::int32_t y = 0; y < height; ++y) {
    const std::int32_t src_row = top_down ? y : height - 1 - y;
    const std::uint8_t* row = &b[data_offset + static_cast<std::size_t>(src_row) * stride];
    for (std::int32_t x = 0; x < width; ++x) {
      std::uint8_t* dst = &out.pixels[(static_cast<std::size_t>(y) * width + x) * out.channels];
      if (bpp == 8) {
        const std::uint8_t idx = row[x];
        if (idx >= palette.size()) throw Error(Errc::Unreadable, "bmp: palette index out of range");
        if (gray_palette) {
          dst[0] = palette[idx][0];
        } else {
          std::copy(palette[idx].begin(), palette[idx].end(), dst);
        }
      } else {
        const std::uint8_t* px = row + static_cast<std::size_t>(x) * (bpp / 8);
        dst[0] = px[2];
        dst[1] = px[1];
        dst[2] = px[0];
      }
    }
  }
  return out;
}

std::vector<std::uint8_t> exif_orientation_block(int orientation) {
  std::vector<std::uint8_t> out = {'E', 'x', 'i', 'f', 0, 0, 'I', 'I', 42, 0};
  put_u32le(out, 8);  // IFD0 offset
  put_u16le(out, 1);  // entry count
  put_u16le(out, 0x0112);
  put_u16le(out, 3);
  put_u32le(out, 1);
  put_u16le(out, static_cast<std::uint16_t>(orientation));
  put_u16le(out, 0);
  put_u32le(out, 0);  // no next IFD
  return out;
}

bool encode_jpeg_into(const RawImage& img, int quality, const std::vector<std::uint8_t>& app1,
                      std::vector<std::uint8_t>& out, std::string& message) {
  jpeg_compress_struct cinfo;
  JpegErrorManager err;
  unsigned char* buffer = nullptr;
  unsigned long size = 0;
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = jpeg_error_exit;
  err.pub.emit_message = jpeg_silent;
  if (setjmp(err.jump)) {
    message = err.message;
    jpeg_destroy_compress(&cinfo);
    std::free(buffer);
    return false;
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, &buffer, &size);
  cinfo.image_width = static_cast<JDIMENSION>(img.width);
  cinfo.image_height = static_cast<JDIMENSION>(img.height);
  cinfo.input_components = img.channels;
  cinfo.in_color_space = img.channels == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  if (!app1.empty()) jpeg_write_marker(&cinfo, JPEG_APP0 + 1, app1.data(), static_cast<unsigned int>(app1.size()));
  const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
  while (cinfo.next_scanline < cinfo.image_height) {
    auto row = const_cast<JSAMPROW>(img.pixels.data() + cinfo.next_scanline * stride);
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  out.assign(buffer, buffer + size);
  jpeg_destroy_compress(&cinfo);
  std::free(buffer);
  return true;
}

}  // namespace

std::optional<int> jpeg_exif_orientation(std::span<const std::uint8_t> b) {
  if (b.size() < 4 || b[0] != 0xFF || b[1] != 0xD8) return std::nullopt;
  std::size_t pos = 2;
  while (pos + 4 <= b.size()) {
    if (b[pos] != 0xFF) return std::nullopt;
    const std::uint8_t marker = b[pos + 1];
    if (marker == 0xFF) {
      ++pos;
      continue;
    }
    if (marker == 0xDA || marker == 0xD9) return std::nullopt;  // scan data or end of image
    const std::size_t length = read_u16(&b[pos + 2], false);
    if (length < 2 || pos + 2 + length > b.size()) return std::nullopt;
    const std::span<const std::uint8_t> payload = b.subspan(pos + 4, length - 2);
    if (marker == 0xE1 && payload.size() >= 6 && std::memcmp(payload.data(), "Exif\0\0", 6) == 0) {
      return tiff_orientation(payload.subspan(6));
    }
    pos += 2 + length;
  }
  return std::nullopt;
}

RawImage decode_image(std::span<const std::uint8_t> bytes) {
  RawImage img;
  if (is_png(bytes)) {
    img = decode_png(bytes);
  } else if (is_jpeg(bytes)) {
    img = decode_jpeg(bytes);
  } else if (is_bmp(bytes)) {
    img = decode_bmp(bytes);
  } else {
    throw Error(Errc::Unreadable, "unrecognized image format");
  }
  if (img.width <= 0 || img.height <= 0) throw Error(Errc::Unreadable, "image has no pixels");
  return img;
}

RawImage read_image(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_bytes(path);
  } catch (const Error& e) {
    throw Error(Errc::Unreadable, e.what());
  }
  return decode_image(bytes);
}

std::vector<std::uint8_t> encode_png(const RawImage& img) {
  img.validate();
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = img.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.pixels.data(), 0, nullptr)) {
    throw Error(Errc::IoError, std::string("png encode: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.pixels.data(), 0, nullptr)) {
    throw Error(Errc::IoError, std::string("png encode: ") + image.message);
  }
  out.resize(size);
  return out;
}

std::vector<std::uint8_t> encode_jpeg(const RawImage& img, int quality, std::optional<int> orientation) {
  img.validate();
  std::vector<std::uint8_t> app1;
  if (orientation) app1 = exif_orientation_block(*orientation);
  std::vector<std::uint8_t> out;
  std::string message;
  if (!encode_jpeg_into(img, quality, app1, out, message)) throw Error(Errc::IoError, "jpeg encode: " + message);
  return out;
}

std::vector<std::uint8_t> encode_bmp(const RawImage& img) {
  img.validate();
  const int bpp = img.channels == 1 ? 8 : 24;
  const std::uint32_t palette_bytes = bpp == 8 ? 1024 : 0;
  const std::size_t stride = (static_cast<std::size_t>(img.width) * bpp / 8 + 3) & ~std::size_t{3};
  const std::uint32_t data_offset = 14 + 40 + palette_bytes;
  const auto image_bytes = static_cast<std::uint32_t>(stride * img.height);

  std::vector<std::uint8_t> out = {'B', 'M'};
  put_u32le(out, data_offset + image_bytes);
  put_u32le(out, 0);
  put_u32le(out, data_offset);
  put_u32le(out, 40);
  put_u32le(out, static_cast<std::uint32_t>(img.width));
  put_u32le(out, static_cast<std::uint32_t>(img.height));
  put_u16le(out, 1);
  put_u16le(out, static_cast<std::uint16_t>(bpp));
  put_u32le(out, 0);
  put_u32le(out, image_bytes);
  put_u32le(out, 2835);
  put_u32le(out, 2835);
  put_u32le(out, bpp == 8 ? 256 : 0);
  put_u32le(out, 0);
  if (bpp == 8) {
    for (int i = 0; i < 256; ++i) {
      const auto v = static_cast<std::uint8_t>(i);
      out.insert(out.end(), {v, v, v, 0});
    }
  }
  for (int y = img.height - 1; y >= 0; --y) {
    const std::size_t row_start = out.size();
    for (int x = 0; x < img.width; ++x) {
      if (bpp == 8) {
        out.push_back(img.at(x, y));
      } else {
        out.insert(out.end(), {img.at(x, y, 2), img.at(x, y, 1), img.at(x, y, 0)});
      }
    }
    out.resize(row_start + stride, 0);
  }
  return out;
}

}  // namespace tnfeat::io
