#include "defocus/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

namespace defocus {

Image::Image(int width, int height, int channels, double fill)
    : width_(width), height_(height), channels_(channels) {
  if (width < 1 || height < 1) {
    throw std::domain_error("Image: width and height must be >= 1");
  }
  if (channels != 1 && channels != 3) {
    throw std::domain_error("Image: channels must be 1 or 3, got " + std::to_string(channels));
  }
  data_.assign(pixel_count() * static_cast<std::size_t>(channels), fill);
}

Image::Image(int width, int height, int channels, std::vector<double> data)
    : Image(width, height, channels) {
  if (data.size() != data_.size()) {
    throw std::domain_error("Image: data length does not match width*height*channels");
  }
  data_ = std::move(data);
}

Image crop(const Image& img, const Rect& rect) {
  if (rect.x < 0 || rect.y < 0 || rect.width < 1 || rect.height < 1 ||
      rect.x + rect.width > img.width() || rect.y + rect.height > img.height()) {
    throw std::domain_error("crop: rectangle outside image");
  }
  Image out(rect.width, rect.height, img.channels());
  const auto row_len = static_cast<std::size_t>(rect.width * img.channels());
  for (int y = 0; y < rect.height; ++y) {
    const auto src = img.row(rect.y + y).subspan(static_cast<std::size_t>(rect.x * img.channels()), row_len);
    std::copy(src.begin(), src.end(), out.row(y).begin());
  }
  return out;
}

Image extract_channel(const Image& img, int channel) {
  if (channel < 0 || channel >= img.channels()) {
    throw std::domain_error("extract_channel: channel out of range");
  }
  Image out(img.width(), img.height(), 1);
  auto dst = out.data();
  const auto src = img.data();
  const auto c = static_cast<std::size_t>(img.channels());
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[i * c + static_cast<std::size_t>(channel)];
  return out;
}

Image merge_channels(std::span<const Image> planes) {
  if (planes.size() != 1 && planes.size() != 3) {
    throw std::domain_error("merge_channels: need 1 or 3 planes");
  }
  for (const auto& p : planes) {
    if (p.channels() != 1 || !p.same_size(planes[0])) {
      throw std::domain_error("merge_channels: planes must be single-channel and equal size");
    }
  }
  const int c = static_cast<int>(planes.size());
  Image out(planes[0].width(), planes[0].height(), c);
  auto dst = out.data();
  for (int k = 0; k < c; ++k) {
    const auto src = planes[static_cast<std::size_t>(k)].data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i * static_cast<std::size_t>(c) + static_cast<std::size_t>(k)] = src[i];
  }
  return out;
}

double mean(const Image& img) {
  double s = 0.0;
  for (double v : img.data()) s += v;
  return img.empty() ? 0.0 : s / static_cast<double>(img.size());
}

double variance(const Image& img) {
  if (img.empty()) return 0.0;
  const double m = mean(img);
  double s = 0.0;
  for (double v : img.data()) s += (v - m) * (v - m);
  return s / static_cast<double>(img.size());
}

double min_value(const Image& img) {
  return img.empty() ? 0.0 : *std::min_element(img.data().begin(), img.data().end());
}

double max_value(const Image& img) {
  return img.empty() ? 0.0 : *std::max_element(img.data().begin(), img.data().end());
}

bool all_finite(const Image& img) {
  return std::all_of(img.data().begin(), img.data().end(), [](double v) { return std::isfinite(v); });
}

Image clamp(const Image& img, double lo, double hi) {
  Image out = img;
  for (double& v : out.data()) v = std::clamp(v, lo, hi);
  return out;
}

std::uint64_t image_digest(const Image& img) {
  std::uint64_t h = 14695981039346656037ull;
  auto feed = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  const int shape[3] = {img.width(), img.height(), img.channels()};
  feed(shape, sizeof(shape));
  feed(img.data().data(), img.size() * sizeof(double));
  return h;
}

}  // namespace defocus
