#include "defocus/apps.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "defocus/filters.hpp"

namespace defocus {

namespace {

constexpr double kSdofCenter = 10.0;

void require_same_size(const Image& a, const Image& b, const char* what) {
  if (!a.same_size(b)) throw std::domain_error(std::string(what) + ": dimension mismatch");
}

}  // namespace

// --- Adaptive sharpening ----------------------------------------------------

void GainParams::validate() const {
  if (!(lambda_max > 0.0)) throw std::domain_error("gain: lambda_max must be > 0");
  if (!(beta1 >= 0.0 && beta1 <= 1.0) || !(beta2 >= 0.0 && beta2 <= 1.0)) {
    throw std::domain_error("gain: beta1 and beta2 must lie in [0, 1]");
  }
}

Image unsharp_mask(const Image& img, double lambda, double sigma) {
  Image gain(img.width(), img.height(), 1, lambda);
  return unsharp_mask(img, gain, sigma);
}

Image unsharp_mask(const Image& img, const Image& gain, double sigma) {
  if (gain.channels() != 1) throw std::domain_error("unsharp_mask: gain raster must be single-channel");
  require_same_size(img, gain, "unsharp_mask");
  const Image low = convolve_separable(img, gaussian_kernel(sigma));
  Image out(img.width(), img.height(), img.channels());
  const auto ch = static_cast<std::size_t>(img.channels());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double in = img.data()[i];
    const double lambda = gain.data()[i / ch];
    out.data()[i] = std::clamp(in + lambda * (in - low.data()[i]), 0.0, 1.0);
  }
  return out;
}

double rising_sigmoid(double m, double alpha, double beta) { return 1.0 / (1.0 + std::exp(-alpha * (m - beta))); }

double gain_at(double normalized_level, const GainParams& params) {
  const double lower = rising_sigmoid(normalized_level, params.alpha1, params.beta1);
  // 1 - s(x) written as s(-x) so the factor never rounds to exactly zero.
  const double upper = 1.0 / (1.0 + std::exp(params.alpha2 * (normalized_level - params.beta2)));
  return params.lambda_max * lower * upper;
}

Image gain_map(const Image& map, const GainParams& params) {
  params.validate();
  if (map.channels() != 1) throw std::domain_error("gain_map: map must be single-channel");
  Image out(map.width(), map.height(), 1);
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = gain_at(map.data()[i] / 19.0, params);
  return out;
}

Image adaptive_enhance(const Image& img, const Image& map, const GainParams& params, double sigma) {
  require_same_size(img, map, "adaptive_enhance");
  return unsharp_mask(img, gain_map(map, params), sigma);
}

// --- Shallow depth of field ---------------------------------------------------

void SDoFParams::validate() const {
  if (!(c0 >= 0.0 && c1 <= 19.0)) throw std::domain_error("sdof: anchor levels must lie in [0, 19]");
  if (!(c0 < c1)) throw std::domain_error("sdof: degenerate anchors, c0 must be < c1");
  if (!(c1 <= kSdofCenter)) throw std::domain_error("sdof: c1 must be <= 10 (weight curve is symmetric about 10)");
  if (!(w1 > 0.0 && w1 < w0 && w0 < 1.0)) throw std::domain_error("sdof: weights must satisfy 0 < w1 < w0 < 1");
  if (!(sharpen_lambda >= 0.0)) throw std::domain_error("sdof: sharpen_lambda must be >= 0");
  smooth.validate();
}

SDoFWeights solve_sdof_weights(double c0, double w0, double c1, double w1) {
  const double d0 = std::abs(c0 - kSdofCenter);
  const double d1 = std::abs(c1 - kSdofCenter);
  if (d0 == 0.0 || d1 == 0.0) throw std::domain_error("sdof: an anchor at level 10 has weight 0 for any parameters");
  if (d0 == d1) throw std::domain_error("sdof: degenerate anchors, |c0 - 10| equals |c1 - 10|");
  if (!(w0 > 0.0 && w0 < 1.0 && w1 > 0.0 && w1 < 1.0)) throw std::domain_error("sdof: weights must lie in (0, 1)");
  // -ln(1 - W) = (d / sigma)^gamma  =>  ln(-ln(1 - W)) = gamma (ln d - ln sigma)
  const double l0 = std::log(-std::log1p(-w0));
  const double l1 = std::log(-std::log1p(-w1));
  const double gamma = (l0 - l1) / (std::log(d0) - std::log(d1));
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw std::domain_error("sdof: anchors give a non-positive exponent; the weight must fall toward level 10");
  }
  const double s0 = d0 / std::pow(-std::log1p(-w0), 1.0 / gamma);
  const double s1 = d1 / std::pow(-std::log1p(-w1), 1.0 / gamma);
  return SDoFWeights{std::sqrt(s0 * s1), gamma};
}

SDoFWeights solve_sdof_weights(const SDoFParams& params) {
  params.validate();
  return solve_sdof_weights(params.c0, params.w0, params.c1, params.w1);
}

double sdof_weight(double level, const SDoFWeights& weights) {
  return -std::expm1(-std::pow(std::abs((level - kSdofCenter) / weights.sigma), weights.gamma));
}

Image sdof_blend(const Image& sharpened, const Image& smoothed, const Image& weight) {
  if (!sharpened.same_shape(smoothed)) throw std::domain_error("sdof_blend: sharpened and smoothed differ in shape");
  if (weight.channels() != 1) throw std::domain_error("sdof_blend: weight must be single-channel");
  require_same_size(sharpened, weight, "sdof_blend");
  Image out(sharpened.width(), sharpened.height(), sharpened.channels());
  const auto ch = static_cast<std::size_t>(sharpened.channels());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double w = weight.data()[i / ch];
    const double b = smoothed.data()[i];
    out.data()[i] = std::clamp(b + w * (sharpened.data()[i] - b), 0.0, 1.0);
  }
  return out;
}

Image iterative_self_guided(const Image& img, const GuidedFilterParams& params) {
  params.validate();
  std::vector<Image> planes;
  for (int c = 0; c < img.channels(); ++c) {
    Image plane = extract_channel(img, c);
    for (int i = 0; i < params.iterations; ++i) plane = guided_filter(plane, plane, params.radius, params.epsilon);
    planes.push_back(std::move(plane));
  }
  return merge_channels(planes);
}

SDoFResult sdof(const Image& img, const Image& map, const SDoFParams& params) {
  if (map.channels() != 1) throw std::domain_error("sdof: map must be single-channel");
  require_same_size(img, map, "sdof");
  SDoFResult r;
  r.solved = solve_sdof_weights(params);
  r.smoothed = iterative_self_guided(img, params.smooth);
  r.sharpened = unsharp_mask(img, params.sharpen_lambda, params.unsharp_sigma);
  r.weight = Image(map.width(), map.height(), 1);
  for (std::size_t i = 0; i < map.size(); ++i) r.weight.data()[i] = sdof_weight(map.data()[i], r.solved);
  r.output = sdof_blend(r.sharpened, r.smoothed, r.weight);
  return r;
}

// --- Multi-focus fusion -------------------------------------------------------

void FusionParams::validate() const {
  if (gf_radius < 1) throw std::domain_error("fuse: radius must be >= 1");
  if (!(gf_epsilon > 0.0)) throw std::domain_error("fuse: epsilon must be > 0");
  if (!(delta > 0.0)) throw std::domain_error("fuse: delta must be > 0");
  if (step < 1 || step > 32) throw std::domain_error("fuse: step must be in [1, 32]");
}

std::vector<Image> fusion_decision(std::span<const Image> maps) {
  if (maps.size() < 2) throw std::domain_error("fusion_decision: need at least two maps");
  for (const auto& m : maps) {
    if (m.channels() != 1 || !m.same_size(maps[0])) {
      throw std::domain_error("fusion_decision: maps must be single-channel with equal dimensions");
    }
  }
  const std::size_t n = maps[0].size();
  std::vector<double> lowest(n);
  for (std::size_t i = 0; i < n; ++i) {
    double m = maps[0].data()[i];
    for (const auto& map : maps) m = std::min(m, map.data()[i]);
    lowest[i] = m;
  }
  std::vector<Image> out;
  out.reserve(maps.size());
  for (const auto& map : maps) {
    Image d(map.width(), map.height(), 1);
    for (std::size_t i = 0; i < n; ++i) d.data()[i] = map.data()[i] == lowest[i] ? 1.0 : 0.0;
    out.push_back(std::move(d));
  }
  return out;
}

FusionResult fuse(std::span<const Image> images, std::span<const Image> maps, const FusionParams& params) {
  params.validate();
  if (images.size() < 2) throw std::domain_error("fuse: need at least two images");
  if (images.size() != maps.size()) throw std::domain_error("fuse: image and map counts differ");
  for (std::size_t n = 0; n < images.size(); ++n) {
    if (!images[n].same_shape(images[0])) throw std::domain_error("fuse: images must share dimensions and channels");
    require_same_size(images[n], maps[n], "fuse");
  }

  FusionResult r;
  r.decisions = fusion_decision(maps);
  const std::size_t pixels = images[0].pixel_count();
  std::vector<double> total(pixels, 0.0);
  for (std::size_t n = 0; n < images.size(); ++n) {
    Image w = guided_filter(r.decisions[n], to_grayscale(images[n]), params.gf_radius, params.gf_epsilon);
    // Clamp filter overshoot so every weight stays non-negative.
    for (double& v : w.data()) v = std::clamp(v, 0.0, 1.0) + params.delta;
    for (std::size_t i = 0; i < pixels; ++i) total[i] += w.data()[i];
    r.weights.push_back(std::move(w));
  }
  for (auto& w : r.weights) {
    for (std::size_t i = 0; i < pixels; ++i) w.data()[i] /= total[i];
  }

  const auto ch = static_cast<std::size_t>(images[0].channels());
  r.fused = Image(images[0].width(), images[0].height(), images[0].channels());
  for (std::size_t i = 0; i < r.fused.size(); ++i) {
    double s = 0.0;
    for (std::size_t n = 0; n < images.size(); ++n) s += r.weights[n].data()[i / ch] * images[n].data()[i];
    r.fused.data()[i] = s;
  }
  return r;
}

}  // namespace defocus
