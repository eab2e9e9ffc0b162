#pragma once

#include <cstdint>
#include <random>

#include "defocus/dataset.hpp"
#include "defocus/filters.hpp"
#include "defocus/image.hpp"

namespace fixture {

using defocus::Image;

inline Image random_image(int w, int h, std::uint64_t seed, int channels = 1) {
  std::mt19937_64 rng(seed);
  Image img(w, h, channels);
  for (double& v : img.data()) v = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return img;
}

// Band-limited texture from the bundled corpus generator.
inline Image texture(int size, int index = 3) { return defocus::desk_texture(index, size); }

// Vertical step edge: 0.2 left of column w/2, 0.8 from it on.
inline Image step_edge(int w, int h) {
  Image img(w, h, 1, 0.2);
  for (int y = 0; y < h; ++y)
    for (int x = w / 2; x < w; ++x) img.at(x, y) = 0.8;
  return img;
}

// Left half taken from `a`, right half from `b`.
inline Image splice(const Image& a, const Image& b) {
  Image out = a;
  for (int y = 0; y < a.height(); ++y)
    for (int x = a.width() / 2; x < a.width(); ++x)
      for (int c = 0; c < a.channels(); ++c) out.at(x, y, c) = b.at(x, y, c);
  return out;
}

inline Image zone_map(int w, int h, double left, double right) {
  Image m(w, h, 1, left);
  for (int y = 0; y < h; ++y)
    for (int x = w / 2; x < w; ++x) m.at(x, y) = right;
  return m;
}

// Sharp left half, right half blurred at `sigma`; truth map 0 | sigma.
struct TwoZone {
  Image image;
  Image truth;
};

inline TwoZone two_zone(int size = 128, double sigma = 10.0) {
  const Image sharp = texture(size);
  return {splice(sharp, defocus::blur_image(sharp, sigma)), zone_map(size, size, 0.0, sigma)};
}

// Registered multi-focus pair from one source: each input has one half blurred.
struct HalfBlurPair {
  Image source;
  Image left_sharp;
  Image right_sharp;
  Image truth_left_sharp;
  Image truth_right_sharp;
};

inline HalfBlurPair half_blur_pair(int size = 128, double sigma = 4.0) {
  HalfBlurPair p;
  p.source = texture(size, 5);
  const Image blurred = defocus::blur_image(p.source, sigma);
  p.left_sharp = splice(p.source, blurred);
  p.right_sharp = splice(blurred, p.source);
  p.truth_left_sharp = zone_map(size, size, 0.0, sigma);
  p.truth_right_sharp = zone_map(size, size, sigma, 0.0);
  return p;
}

inline double region_mean(const Image& img, int x0, int y0, int x1, int y1) {
  double s = 0.0;
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) s += img.at(x, y);
  return s / (static_cast<double>(x1 - x0) * (y1 - y0));
}

}  // namespace fixture
