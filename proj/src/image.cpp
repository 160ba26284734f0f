#include "mononext/image.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "mononext/error.hpp"

namespace mononext {

namespace {

cv::Mat to_bgr_mat(const Image& image) {
  cv::Mat rgb(image.height, image.width, CV_8UC3, const_cast<std::uint8_t*>(image.pixels.data()));
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  return bgr;
}

Image from_bgr_mat(const cv::Mat& bgr) {
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  Image out(rgb.cols, rgb.rows);
  for (int r = 0; r < rgb.rows; ++r) {
    std::copy_n(rgb.ptr<std::uint8_t>(r), static_cast<std::size_t>(rgb.cols) * 3,
                out.pixels.data() + static_cast<std::size_t>(r) * rgb.cols * 3);
  }
  return out;
}

}  // namespace

Image read_image(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw IoError("cannot read image " + path.string());
  return from_bgr_mat(bgr);
}

void write_image(const std::filesystem::path& path, const Image& image) {
  if (image.empty()) throw ArgumentError("write_image: empty image");
  if (!cv::imwrite(path.string(), to_bgr_mat(image))) {
    throw IoError("cannot write image " + path.string());
  }
}

Image resize_bilinear(const Image& image, int width, int height) {
  if (width <= 0 || height <= 0) throw ArgumentError("resize_bilinear: non-positive size");
  if (image.width == width && image.height == height) return image;
  cv::Mat src(image.height, image.width, CV_8UC3, const_cast<std::uint8_t*>(image.pixels.data()));
  cv::Mat dst;
  cv::resize(src, dst, cv::Size(width, height), 0, 0, cv::INTER_LINEAR);
  Image out(width, height);
  for (int r = 0; r < height; ++r) {
    std::copy_n(dst.ptr<std::uint8_t>(r), static_cast<std::size_t>(width) * 3,
                out.pixels.data() + static_cast<std::size_t>(r) * width * 3);
  }
  return out;
}

Image mirror_horizontal(const Image& image) {
  Image out(image.width, image.height);
  for (int r = 0; r < image.height; ++r) {
    for (int c = 0; c < image.width; ++c) {
      for (int ch = 0; ch < 3; ++ch) out.at(r, image.width - 1 - c, ch) = image.at(r, c, ch);
    }
  }
  return out;
}

void append_normalized(const Image& image, std::vector<float>& out) {
  out.reserve(out.size() + image.pixels.size());
  for (std::uint8_t v : image.pixels) out.push_back(static_cast<float>(v) / 255.0f);
}

}  // namespace mononext
