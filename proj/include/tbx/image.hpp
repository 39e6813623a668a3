#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace tbx {

// 8-bit raster, row-major, 1 (gray) or 3 (RGB) interleaved channels.
class PageImage {
 public:
  PageImage(std::string drawing_id, int width, int height, int channels,
            std::vector<std::uint8_t> pixels, double dpi = 300.0);

  // White gray image.
  static PageImage blank(std::string drawing_id, int width, int height,
                         double dpi = 300.0);

  const std::string& drawing_id() const noexcept { return drawing_id_; }
  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  double dpi() const noexcept { return dpi_; }
  std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }
  std::span<std::uint8_t> pixels() noexcept { return pixels_; }

  std::uint8_t at(int x, int y, int c = 0) const {
    return pixels_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  std::uint8_t& at(int x, int y, int c = 0) {
    return pixels_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  // Luma per pixel (ITU-R BT.601 weights for RGB input).
  std::vector<std::uint8_t> to_gray() const;

  void set_drawing_id(std::string id) { drawing_id_ = std::move(id); }

 private:
  std::string drawing_id_;
  int width_;
  int height_;
  int channels_;
  double dpi_;
  std::vector<std::uint8_t> pixels_;
};

// Decodes png/jpg/tiff from disk; drawing_id defaults to the file stem.
// Throws Error(kImageError) on unreadable files.
PageImage load_image(const std::filesystem::path& path);

void save_png(const PageImage& img, const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const PageImage& img);

// Proportional downscale so that the longest side is at most max_side.
PageImage limit_size(const PageImage& img, int max_side);

bool is_supported_image(const std::filesystem::path& path);

}  // namespace tbx
