#pragma once

#include <cstdint>

#include "defocus/blurmap.hpp"
#include "defocus/image.hpp"

namespace defocus {

/// Radius, regularization and pass count shared by guided-filter stages.
struct GuidedFilterParams {
  int radius = 16;
  double epsilon = 0.005;
  int iterations = 7;

  void validate() const;
};

inline constexpr double kDefaultEdgeRegularizer = 1e-6;

/// Guided filter: per-window linear model q = a I + b with
/// a = cov(I,p) / (var(I) + eps), b = mean(p) - a mean(I); window statistics
/// via box_mean(radius), coefficients averaged over overlapping windows.
/// p and guide must be single-channel and the same size.
Image guided_filter(const Image& p, const Image& guide, int radius, double epsilon);

/// Edge-aware weight Gamma(k) = (v(k) + lambda) * mean_k'(1 / (v(k') + lambda))
/// where v is the 3x3 local variance of the guide. Gamma > 1 on edges,
/// < 1 in flat regions; the mean of 1/Gamma is exactly 1.
Image edge_aware_weights(const Image& guide, double lambda_w = kDefaultEdgeRegularizer);

/// Weighted guided filter: as guided_filter with per-window regularization
/// eps / Gamma(k).
Image weighted_guided_filter(const Image& p, const Image& guide, int radius, double epsilon,
                             double lambda_w = kDefaultEdgeRegularizer);

/// Texture-suppressed guidance: `params.iterations` self-guided WGIF passes,
/// each pass using the previous output as both input and guide.
Image make_guidance(const Image& img, const GuidedFilterParams& params,
                    double lambda_w = kDefaultEdgeRegularizer);

struct RefinedMap {
  Image values;
  GuidedFilterParams params;
  std::uint64_t guidance_hash = 0;
};

struct RefineOptions {
  GuidedFilterParams guidance;
  /// WGIF passes applied to the map itself (guidance stays fixed).
  int map_passes = 1;
  double lambda_w = kDefaultEdgeRegularizer;
};

/// Normalizes the map to [0,1], filters it with WGIF steered by
/// make_guidance(luma(img)), rescales to [0,19] and clamps.
RefinedMap refine_map(const Image& map, const Image& img, const RefineOptions& options = {});
RefinedMap refine_map(const BlurMap& map, const Image& img, const RefineOptions& options = {});

/// 0 where M(q) <= lambda, 1 otherwise.
Image binary_map(const Image& map, double lambda = 4.0);

}  // namespace defocus
