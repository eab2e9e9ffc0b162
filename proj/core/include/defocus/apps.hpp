#pragma once

#include <span>
#include <vector>

#include "defocus/image.hpp"
#include "defocus/refine.hpp"

namespace defocus {

inline constexpr double kDefaultUnsharpSigma = 2.0;

// --- Adaptive sharpening ----------------------------------------------------

/// Sigmoid gain shaping on the normalized map m = M / 19.
struct GainParams {
  double alpha1 = 46.0;
  double beta1 = 0.1;
  double alpha2 = 183.0;
  double beta2 = 0.27;
  double lambda_max = 2.0;

  void validate() const;
};

/// J = I + lambda (I - B), B the Gaussian low-pass of I; clamped to [0,1].
Image unsharp_mask(const Image& img, double lambda, double sigma = kDefaultUnsharpSigma);
/// Per-pixel gain raster (single channel, broadcast over color channels).
Image unsharp_mask(const Image& img, const Image& gain, double sigma = kDefaultUnsharpSigma);

/// Rising sigmoid 1 / (1 + exp(-alpha (m - beta))).
double rising_sigmoid(double m, double alpha, double beta);
/// lambda_max * rising(m; a1, b1) * (1 - rising(m; a2, b2)).
double gain_at(double normalized_level, const GainParams& params);

/// Gain raster from a blur map in [0, 19].
Image gain_map(const Image& map, const GainParams& params);

Image adaptive_enhance(const Image& img, const Image& map, const GainParams& params,
                       double sigma = kDefaultUnsharpSigma);

// --- Shallow depth of field ---------------------------------------------------

struct SDoFParams {
  /// Anchor levels on the raw [0, 19] map: W(c0) = w0, W(c1) = w1.
  double c0 = 1.0;
  double c1 = 7.0;
  double w0 = 0.999;
  double w1 = 0.001;
  /// Iterated self-guided smoothing; epsilon 128 in 8-bit squared units.
  GuidedFilterParams smooth{33, 128.0 / (255.0 * 255.0), 5};
  double sharpen_lambda = 0.25;
  double unsharp_sigma = kDefaultUnsharpSigma;

  void validate() const;
};

struct SDoFWeights {
  double sigma = 0.0;
  double gamma = 0.0;
};

/// Solves 1 - exp(-|(c - 10) / sigma|^gamma) = w at both anchors.
/// Symmetric in the anchor order. Throws when an anchor sits at level 10 or
/// both anchors are equidistant from it.
SDoFWeights solve_sdof_weights(double c0, double w0, double c1, double w1);
SDoFWeights solve_sdof_weights(const SDoFParams& params);

/// W(M) = 1 - exp(-|(M - 10) / sigma|^gamma). Symmetric about M = 10.
double sdof_weight(double level, const SDoFWeights& weights);

/// R = W S + (1 - W) B, evaluated as B + W (S - B); clamped to [0,1]. W is single-channel.
Image sdof_blend(const Image& sharpened, const Image& smoothed, const Image& weight);

/// Self-guided guided filter iterated per channel; each pass guides with
/// the previous output.
Image iterative_self_guided(const Image& img, const GuidedFilterParams& params);

struct SDoFResult {
  Image output;
  Image weight;
  Image smoothed;
  Image sharpened;
  SDoFWeights solved;
};

SDoFResult sdof(const Image& img, const Image& map, const SDoFParams& params);

// --- Multi-focus fusion -------------------------------------------------------

struct FusionParams {
  int gf_radius = 7;
  double gf_epsilon = 1e-3;
  double delta = 1e-6;
  int step = 4;

  void validate() const;
};

/// D_n(q) = 1 where M_n(q) equals the per-pixel minimum over all maps.
std::vector<Image> fusion_decision(std::span<const Image> maps);

struct FusionResult {
  Image fused;
  std::vector<Image> decisions;
  std::vector<Image> weights;
};

/// Guided-filtered decision maps (guide: luma of each input), clamped to
/// [0,1], offset by delta and normalized to sum to one; the weights are
/// shared by all color channels.
FusionResult fuse(std::span<const Image> images, std::span<const Image> maps, const FusionParams& params);

}  // namespace defocus
