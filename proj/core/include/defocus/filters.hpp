#pragma once

#include <cstdint>
#include <vector>

#include "defocus/image.hpp"

namespace defocus {

/// Odd-length 1-D kernel. Gaussian kernels are applied separably.
struct Kernel {
  std::vector<double> taps;

  int size() const noexcept { return static_cast<int>(taps.size()); }
  int radius() const noexcept { return size() / 2; }
};

/// Sampled Gaussian truncated at ceil(3 sigma), normalized to unit sum.
/// sigma == 0 yields the single-tap identity kernel.
Kernel gaussian_kernel(double sigma);

/// Separable convolution with the same kernel along x and y, replicate borders.
Image convolve_separable(const Image& img, const Kernel& kernel);

/// Gaussian defocus model: separable blur, optional additive zero-mean
/// Gaussian noise (seeded), result clamped to [0,1].
Image blur_image(const Image& img, double sigma, double noise_std = 0.0,
                 std::uint64_t seed = 0);

/// Equals crop(convolve_separable(img, gaussian_kernel(sigma)), region)
/// bit-for-bit but only touches the pixels the region depends on.
Image blur_region(const Image& img, double sigma, const Rect& region);

/// 4-neighbour Laplacian, replicate borders, unclamped. Single channel only.
Image laplacian(const Image& img);

/// Mean over the (2r+1)^2 window, replicate borders, O(1) per pixel.
Image box_mean(const Image& img, int radius);

/// Mean over the window [x+lo, x+hi] x [y+lo, y+hi], replicate borders.
/// Supports even-sized, off-centre windows (lo = -8, hi = 7 for 16x16).
Image window_mean(const Image& img, int lo, int hi);

/// ITU-R BT.601 luma for 3-channel input; 1-channel input passes through.
Image to_grayscale(const Image& img);

/// Thin-lens configuration, all lengths in millimetres.
struct LensConfig {
  double focal_length = 0.0;
  double aperture_diameter = 0.0;
  double focus_distance = 0.0;
  double object_distance = 0.0;
};

/// Diameter of the circle of confusion: A f |S2 - S1| / (S2 |S1 - f|).
double coc_diameter(const LensConfig& cfg);

}  // namespace defocus
