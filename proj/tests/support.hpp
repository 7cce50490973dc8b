#pragma once

#include "tnfeat/image_io.hpp"
#include "tnfeat/preprocess.hpp"
#include "tnfeat/rng.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <string>
#include <unistd.h>

namespace tnfeat::testing {

/// Directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "tnfeat") {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(stamp) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline preprocess::RawImage random_image(std::uint64_t seed, int w, int h, int channels = 1) {
  Rng rng(seed);
  preprocess::RawImage img;
  img.width = w;
  img.height = h;
  img.channels = channels;
  img.pixels.resize(static_cast<std::size_t>(w) * h * channels);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

inline preprocess::RawImage constant_image(std::uint8_t value, int w, int h) {
  preprocess::RawImage img;
  img.width = w;
  img.height = h;
  img.channels = 1;
  img.pixels.assign(static_cast<std::size_t>(w) * h, value);
  return img;
}

inline void write_png(const std::filesystem::path& path, const preprocess::RawImage& img) {
  std::filesystem::create_directories(path.parent_path());
  io::write_bytes(path, io::encode_png(img));
}

}  // namespace tnfeat::testing
