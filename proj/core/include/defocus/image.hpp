#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace defocus {

/// Axis-aligned pixel rectangle.
struct Rect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
};

/// Row-major, channel-interleaved raster of doubles. Nominal value range is
/// [0,1] for photographs; blur maps and filter responses use their own range.
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels = 1, double fill = 0.0);
  Image(int width, int height, int channels, std::vector<double> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }
  std::size_t size() const noexcept { return data_.size(); }

  double& at(int x, int y, int c = 0) noexcept { return data_[index(x, y, c)]; }
  double at(int x, int y, int c = 0) const noexcept { return data_[index(x, y, c)]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> row(int y) noexcept {
    return {data_.data() + index(0, y, 0), static_cast<std::size_t>(width_ * channels_)};
  }
  std::span<const double> row(int y) const noexcept {
    return {data_.data() + index(0, y, 0), static_cast<std::size_t>(width_ * channels_)};
  }

  bool same_shape(const Image& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
  }
  bool same_size(const Image& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int x, int y, int c) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(channels_) +
           static_cast<std::size_t>(c);
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

Image crop(const Image& img, const Rect& rect);
Image extract_channel(const Image& img, int channel);
Image merge_channels(std::span<const Image> planes);

/// Mean / population variance over every sample of every channel.
double mean(const Image& img);
double variance(const Image& img);

double min_value(const Image& img);
double max_value(const Image& img);
bool all_finite(const Image& img);

Image clamp(const Image& img, double lo, double hi);

/// 64-bit FNV-1a over the raw sample bytes and the shape.
std::uint64_t image_digest(const Image& img);

}  // namespace defocus
