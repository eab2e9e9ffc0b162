#include "defocus/refine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "defocus/filters.hpp"

namespace defocus {

void GuidedFilterParams::validate() const {
  if (radius < 1) throw std::domain_error("guided filter: radius must be >= 1");
  if (!(epsilon > 0.0)) throw std::domain_error("guided filter: epsilon must be > 0");
  if (iterations < 1) throw std::domain_error("guided filter: iterations must be >= 1");
}

namespace {

void check_pair(const Image& p, const Image& guide, int radius, double epsilon, const char* what) {
  if (p.channels() != 1 || guide.channels() != 1) {
    throw std::domain_error(std::string(what) + ": input and guide must be single-channel");
  }
  if (!p.same_size(guide)) throw std::domain_error(std::string(what) + ": input and guide dimensions differ");
  if (radius < 0) throw std::domain_error(std::string(what) + ": radius must be >= 0");
  if (!(epsilon > 0.0)) throw std::domain_error(std::string(what) + ": epsilon must be > 0");
}

Image multiply(const Image& a, const Image& b) {
  Image out(a.width(), a.height(), 1);
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
  return out;
}

// Shared body of GF / WGIF. `weights` may be null (plain GF).
Image guided_filter_impl(const Image& p, const Image& guide, int radius, double epsilon, const Image* weights) {
  const Image mean_i = box_mean(guide, radius);
  const Image mean_p = box_mean(p, radius);
  const Image corr_ip = box_mean(multiply(guide, p), radius);
  const Image corr_ii = box_mean(multiply(guide, guide), radius);

  Image a(p.width(), p.height(), 1);
  Image b(p.width(), p.height(), 1);
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double mi = mean_i.data()[k];
    const double mp = mean_p.data()[k];
    const double var = corr_ii.data()[k] - mi * mi;
    const double cov = corr_ip.data()[k] - mi * mp;
    const double reg = weights ? epsilon / weights->data()[k] : epsilon;
    const double ak = cov / (var + reg);
    a.data()[k] = ak;
    b.data()[k] = mp - ak * mi;
  }
  const Image mean_a = box_mean(a, radius);
  const Image mean_b = box_mean(b, radius);
  Image q(p.width(), p.height(), 1);
  for (std::size_t k = 0; k < q.size(); ++k) {
    q.data()[k] = mean_a.data()[k] * guide.data()[k] + mean_b.data()[k];
  }
  return q;
}

}  // namespace

Image guided_filter(const Image& p, const Image& guide, int radius, double epsilon) {
  check_pair(p, guide, radius, epsilon, "guided_filter");
  return guided_filter_impl(p, guide, radius, epsilon, nullptr);
}

Image edge_aware_weights(const Image& guide, double lambda_w) {
  if (guide.channels() != 1) throw std::domain_error("edge_aware_weights: guide must be single-channel");
  if (!(lambda_w > 0.0)) throw std::domain_error("edge_aware_weights: lambda_w must be > 0");
  // Variance of guide - guide[0]: same value, no cancellation on flat areas.
  Image centered = guide;
  const double ref = guide.size() > 0 ? guide.data()[0] : 0.0;
  for (double& v : centered.data()) v -= ref;
  const Image m = box_mean(centered, 1);
  const Image m2 = box_mean(multiply(centered, centered), 1);
  Image shifted(guide.width(), guide.height(), 1);
  double inv_sum = 0.0;
  for (std::size_t k = 0; k < shifted.size(); ++k) {
    const double v = std::max(0.0, m2.data()[k] - m.data()[k] * m.data()[k]);
    shifted.data()[k] = v + lambda_w;
    inv_sum += 1.0 / shifted.data()[k];
  }
  const double inv_mean = inv_sum / static_cast<double>(shifted.size());
  for (double& g : shifted.data()) g *= inv_mean;
  return shifted;
}

Image weighted_guided_filter(const Image& p, const Image& guide, int radius, double epsilon, double lambda_w) {
  check_pair(p, guide, radius, epsilon, "weighted_guided_filter");
  const Image weights = edge_aware_weights(guide, lambda_w);
  return guided_filter_impl(p, guide, radius, epsilon, &weights);
}

Image make_guidance(const Image& img, const GuidedFilterParams& params, double lambda_w) {
  params.validate();
  Image g = to_grayscale(img);
  for (int i = 0; i < params.iterations; ++i) {
    g = weighted_guided_filter(g, g, params.radius, params.epsilon, lambda_w);
  }
  return g;
}

RefinedMap refine_map(const Image& map, const Image& img, const RefineOptions& options) {
  options.guidance.validate();
  if (options.map_passes < 1) throw std::domain_error("refine_map: map_passes must be >= 1");
  if (map.channels() != 1) throw std::domain_error("refine_map: map must be single-channel");
  if (!map.same_size(img)) throw std::domain_error("refine_map: map and image dimensions differ");

  const Image guide = make_guidance(img, options.guidance, options.lambda_w);
  Image m = map;
  for (double& v : m.data()) v /= 19.0;
  for (int i = 0; i < options.map_passes; ++i) {
    m = weighted_guided_filter(m, guide, options.guidance.radius, options.guidance.epsilon, options.lambda_w);
  }
  for (double& v : m.data()) v = std::clamp(v * 19.0, 0.0, 19.0);
  return RefinedMap{std::move(m), options.guidance, image_digest(guide)};
}

RefinedMap refine_map(const BlurMap& map, const Image& img, const RefineOptions& options) {
  return refine_map(map.values, img, options);
}

Image binary_map(const Image& map, double lambda) {
  if (map.channels() != 1) throw std::domain_error("binary_map: map must be single-channel");
  if (std::isnan(lambda)) throw std::domain_error("binary_map: lambda must not be NaN");
  Image out(map.width(), map.height(), 1);
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = map.data()[i] <= lambda ? 0.0 : 1.0;
  return out;
}

}  // namespace defocus
