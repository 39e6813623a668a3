#include "tbx/image.hpp"

#include <algorithm>
#include <cmath>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "tbx/errors.hpp"
#include "tbx/text.hpp"

namespace tbx {

namespace {

cv::Mat to_mat(const PageImage& img) {
  const int type = img.channels() == 1 ? CV_8UC1 : CV_8UC3;
  cv::Mat view(img.height(), img.width(), type,
               const_cast<std::uint8_t*>(img.pixels().data()));
  cv::Mat out;
  if (img.channels() == 3) {
    cv::cvtColor(view, out, cv::COLOR_RGB2BGR);
  } else {
    out = view.clone();
  }
  return out;
}

PageImage from_mat(const cv::Mat& mat, std::string id, double dpi) {
  cv::Mat src = mat;
  int channels = 1;
  if (mat.channels() == 4) {
    cv::cvtColor(mat, src, cv::COLOR_BGRA2RGB);
    channels = 3;
  } else if (mat.channels() == 3) {
    cv::cvtColor(mat, src, cv::COLOR_BGR2RGB);
    channels = 3;
  }
  if (src.depth() != CV_8U) {
    src.convertTo(src, CV_8U, src.depth() == CV_16U ? 1.0 / 257.0 : 1.0);
  }
  if (!src.isContinuous()) src = src.clone();
  std::vector<std::uint8_t> px(src.data, src.data + src.total() * channels);
  return PageImage(std::move(id), src.cols, src.rows, channels, std::move(px),
                   dpi);
}

}  // namespace

PageImage::PageImage(std::string drawing_id, int width, int height,
                     int channels, std::vector<std::uint8_t> pixels,
                     double dpi)
    : drawing_id_(std::move(drawing_id)),
      width_(width),
      height_(height),
      channels_(channels),
      dpi_(dpi),
      pixels_(std::move(pixels)) {
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::kImageError, "image dimensions must be positive");
  }
  if (channels != 1 && channels != 3) {
    throw Error(ErrorCode::kImageError, "image must have 1 or 3 channels");
  }
  if (pixels_.size() !=
      static_cast<std::size_t>(width) * height * static_cast<std::size_t>(channels)) {
    throw Error(ErrorCode::kImageError, "pixel buffer size mismatch");
  }
}

PageImage PageImage::blank(std::string drawing_id, int width, int height,
                           double dpi) {
  std::vector<std::uint8_t> px(
      static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0), 255);
  return PageImage(std::move(drawing_id), width, height, 1, std::move(px), dpi);
}

std::vector<std::uint8_t> PageImage::to_gray() const {
  if (channels_ == 1) return pixels_;
  std::vector<std::uint8_t> gray(static_cast<std::size_t>(width_) * height_);
  for (std::size_t i = 0; i < gray.size(); ++i) {
    const std::uint8_t* p = &pixels_[i * 3];
    gray[i] = static_cast<std::uint8_t>(
        std::lround(0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]));
  }
  return gray;
}

PageImage load_image(const std::filesystem::path& path) {
  cv::Mat mat;
  try {
    mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  } catch (const cv::Exception& e) {
    throw Error(ErrorCode::kImageError,
                "cannot decode " + path.string() + ": " + e.what());
  }
  if (mat.empty()) {
    throw Error(ErrorCode::kImageError, "cannot decode " + path.string());
  }
  return from_mat(mat, path.stem().string(), 300.0);
}

void save_png(const PageImage& img, const std::filesystem::path& path) {
  if (!cv::imwrite(path.string(), to_mat(img))) {
    throw Error(ErrorCode::kImageError, "cannot write " + path.string());
  }
}

std::vector<std::uint8_t> encode_png(const PageImage& img) {
  std::vector<std::uint8_t> buf;
  if (!cv::imencode(".png", to_mat(img), buf)) {
    throw Error(ErrorCode::kImageError, "png encoding failed");
  }
  return buf;
}

PageImage limit_size(const PageImage& img, int max_side) {
  const int longest = std::max(img.width(), img.height());
  if (longest <= max_side) return img;
  const double scale = static_cast<double>(max_side) / longest;
  const int w = std::max(1, static_cast<int>(std::lround(img.width() * scale)));
  const int h = std::max(1, static_cast<int>(std::lround(img.height() * scale)));
  const int type = img.channels() == 1 ? CV_8UC1 : CV_8UC3;
  cv::Mat view(img.height(), img.width(), type,
               const_cast<std::uint8_t*>(img.pixels().data()));
  cv::Mat small;
  cv::resize(view, small, cv::Size(w, h), 0, 0, cv::INTER_AREA);
  std::vector<std::uint8_t> px(small.data,
                               small.data + small.total() * img.channels());
  return PageImage(img.drawing_id(), w, h, img.channels(), std::move(px),
                   img.dpi() * scale);
}

bool is_supported_image(const std::filesystem::path& path) {
  const std::string ext = text::to_lower(path.extension().string());
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".tif" ||
         ext == ".tiff";
}

}  // namespace tbx
