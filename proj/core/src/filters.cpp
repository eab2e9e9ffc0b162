#include "defocus/filters.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "defocus/parallel.hpp"

namespace defocus {

namespace {

constexpr int clamp_index(int v, int n) noexcept { return v < 0 ? 0 : (v >= n ? n - 1 : v); }

// Core of every Gaussian path. Output pixels of `region` are computed from a
// horizontal pass over the rows they depend on, then a vertical pass, with a
// fixed tap order so that any region reproduces the full-image result.
Image convolve_region(const Image& img, const Kernel& kernel, const Rect& region) {
  const int w = img.width();
  const int h = img.height();
  const int ch = img.channels();
  const int radius = kernel.radius();
  const int taps = kernel.size();
  const auto& k = kernel.taps;

  const int row_lo = clamp_index(region.y - radius, h);
  const int row_hi = clamp_index(region.y + region.height - 1 + radius, h);
  const int rows = row_hi - row_lo + 1;
  const int stride = region.width * ch;

  std::vector<double> tmp(static_cast<std::size_t>(rows) * static_cast<std::size_t>(stride));
  parallel_for(0, rows, [&](int r) {
    const auto src = img.row(row_lo + r);
    double* dst = tmp.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(stride);
    for (int x = 0; x < region.width; ++x) {
      const int cx = region.x + x;
      for (int c = 0; c < ch; ++c) {
        double s = 0.0;
        for (int t = 0; t < taps; ++t) {
          s += k[static_cast<std::size_t>(t)] *
               src[static_cast<std::size_t>(clamp_index(cx + t - radius, w) * ch + c)];
        }
        dst[x * ch + c] = s;
      }
    }
  });

  Image out(region.width, region.height, ch);
  parallel_for(0, region.height, [&](int y) {
    auto dst = out.row(y);
    const int cy = region.y + y;
    for (int i = 0; i < stride; ++i) {
      double s = 0.0;
      for (int t = 0; t < taps; ++t) {
        const int src_row = clamp_index(cy + t - radius, h) - row_lo;
        s += k[static_cast<std::size_t>(t)] *
             tmp[static_cast<std::size_t>(src_row) * static_cast<std::size_t>(stride) + static_cast<std::size_t>(i)];
      }
      dst[static_cast<std::size_t>(i)] = s;
    }
  });
  return out;
}

void require_nonnegative(double sigma, const char* what) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw std::domain_error(std::string(what) + ": sigma must be finite and >= 0");
  }
}

}  // namespace

Kernel gaussian_kernel(double sigma) {
  require_nonnegative(sigma, "gaussian_kernel");
  if (sigma == 0.0) return Kernel{{1.0}};
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  Kernel kernel;
  kernel.taps.resize(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int x = -radius; x <= radius; ++x) {
    const double v = std::exp(-static_cast<double>(x * x) / (2.0 * sigma * sigma));
    kernel.taps[static_cast<std::size_t>(x + radius)] = v;
    sum += v;
  }
  for (double& v : kernel.taps) v /= sum;
  return kernel;
}

Image convolve_separable(const Image& img, const Kernel& kernel) {
  if (kernel.size() % 2 == 0) throw std::domain_error("convolve_separable: kernel size must be odd");
  return convolve_region(img, kernel, Rect{0, 0, img.width(), img.height()});
}

Image blur_image(const Image& img, double sigma, double noise_std, std::uint64_t seed) {
  require_nonnegative(sigma, "blur_image");
  if (!(noise_std >= 0.0)) throw std::domain_error("blur_image: noise_std must be >= 0");
  if (sigma == 0.0 && noise_std == 0.0) return img;

  Image out = sigma == 0.0 ? img : convolve_separable(img, gaussian_kernel(sigma));
  if (noise_std > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, noise_std);
    for (double& v : out.data()) v += noise(rng);
  }
  for (double& v : out.data()) v = std::clamp(v, 0.0, 1.0);
  return out;
}

Image blur_region(const Image& img, double sigma, const Rect& region) {
  require_nonnegative(sigma, "blur_region");
  if (sigma == 0.0) return crop(img, region);
  if (region.x < 0 || region.y < 0 || region.width < 1 || region.height < 1 ||
      region.x + region.width > img.width() || region.y + region.height > img.height()) {
    throw std::domain_error("blur_region: region outside image");
  }
  return convolve_region(img, gaussian_kernel(sigma), region);
}

Image laplacian(const Image& img) {
  if (img.channels() != 1) throw std::domain_error("laplacian: single-channel input required");
  const int w = img.width();
  const int h = img.height();
  Image out(w, h, 1);
  parallel_for(0, h, [&](int y) {
    const int yu = clamp_index(y - 1, h);
    const int yd = clamp_index(y + 1, h);
    for (int x = 0; x < w; ++x) {
      const int xl = clamp_index(x - 1, w);
      const int xr = clamp_index(x + 1, w);
      out.at(x, y) = img.at(x, yu) + img.at(xl, y) + img.at(xr, y) + img.at(x, yd) - 4.0 * img.at(x, y);
    }
  });
  return out;
}

Image window_mean(const Image& img, int lo, int hi) {
  if (lo > hi) throw std::domain_error("window_mean: lo must be <= hi");
  if (lo == 0 && hi == 0) return img;
  const int w = img.width();
  const int h = img.height();
  const int ch = img.channels();
  const int span = hi - lo + 1;
  const double inv_area = 1.0 / (static_cast<double>(span) * static_cast<double>(span));

  // Row sums via prefix sums over the border-extended row, then the same
  // along columns. Cost per pixel does not depend on the window size.
  Image rows(w, h, ch);
  parallel_for(0, h, [&](int y) {
    const auto src = img.row(y);
    auto dst = rows.row(y);
    std::vector<double> prefix(static_cast<std::size_t>(w + span));
    for (int c = 0; c < ch; ++c) {
      prefix[0] = 0.0;
      for (int j = 0; j + 1 < w + span; ++j) {
        prefix[static_cast<std::size_t>(j + 1)] =
            prefix[static_cast<std::size_t>(j)] + src[static_cast<std::size_t>(clamp_index(j + lo, w) * ch + c)];
      }
      for (int x = 0; x < w; ++x) {
        dst[static_cast<std::size_t>(x * ch + c)] =
            prefix[static_cast<std::size_t>(x + span)] - prefix[static_cast<std::size_t>(x)];
      }
    }
  });

  Image out(w, h, ch);
  const int stride = w * ch;
  parallel_for(0, stride, [&](int i) {
    std::vector<double> prefix(static_cast<std::size_t>(h + span));
    const auto rd = rows.data();
    auto od = out.data();
    prefix[0] = 0.0;
    for (int j = 0; j + 1 < h + span; ++j) {
      prefix[static_cast<std::size_t>(j + 1)] =
          prefix[static_cast<std::size_t>(j)] +
          rd[static_cast<std::size_t>(clamp_index(j + lo, h)) * static_cast<std::size_t>(stride) + static_cast<std::size_t>(i)];
    }
    for (int y = 0; y < h; ++y) {
      od[static_cast<std::size_t>(y) * static_cast<std::size_t>(stride) + static_cast<std::size_t>(i)] =
          (prefix[static_cast<std::size_t>(y + span)] - prefix[static_cast<std::size_t>(y)]) * inv_area;
    }
  });
  return out;
}

Image box_mean(const Image& img, int radius) {
  if (radius < 0) throw std::domain_error("box_mean: radius must be >= 0");
  return window_mean(img, -radius, radius);
}

Image to_grayscale(const Image& img) {
  if (img.channels() == 1) return img;
  if (img.channels() != 3) throw std::domain_error("to_grayscale: expected 1 or 3 channels");
  Image out(img.width(), img.height(), 1);
  const auto src = img.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const double r = src[3 * i];
    const double g = src[3 * i + 1];
    const double b = src[3 * i + 2];
    // Written relative to G so that gray pixels map to themselves exactly.
    const double luma = g + 0.299 * (r - g) + 0.114 * (b - g);
    dst[i] = std::clamp(luma, std::min({r, g, b}), std::max({r, g, b}));
  }
  return out;
}

double coc_diameter(const LensConfig& cfg) {
  if (!(cfg.focal_length > 0.0) || !(cfg.aperture_diameter > 0.0) || !(cfg.focus_distance > 0.0) ||
      !(cfg.object_distance > 0.0)) {
    throw std::domain_error("coc_diameter: all lens parameters must be strictly positive");
  }
  if (cfg.focus_distance == cfg.focal_length) {
    throw std::domain_error("coc_diameter: focus distance equals focal length");
  }
  return cfg.aperture_diameter * cfg.focal_length * std::abs(cfg.object_distance - cfg.focus_distance) /
         (cfg.object_distance * std::abs(cfg.focus_distance - cfg.focal_length));
}

}  // namespace defocus
