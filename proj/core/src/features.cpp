#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "defocus/classifier.hpp"
#include "defocus/filters.hpp"

namespace defocus {

namespace {

constexpr int N = kPatchSize;

struct Twiddles {
  std::array<double, N * N> cos_table{};
  std::array<double, N * N> sin_table{};
  // Spectrum bin of each (u, v); -1 when outside [1, 16] cycles.
  std::array<int, N * N> bin{};
  std::array<int, kSpectrumBins> bin_size{};
  std::array<double, N> window{};

  Twiddles() {
    for (int k = 0; k < N; ++k) {
      for (int n = 0; n < N; ++n) {
        const double a = 2.0 * std::numbers::pi * static_cast<double>((k * n) % N) / N;
        cos_table[static_cast<std::size_t>(k * N + n)] = std::cos(a);
        sin_table[static_cast<std::size_t>(k * N + n)] = std::sin(a);
      }
    }
    for (int n = 0; n < N; ++n) window[static_cast<std::size_t>(n)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (n + 1) / (N + 1));
    const double width = (N / 2.0 - 1.0) / kSpectrumBins;
    for (int v = 0; v < N; ++v) {
      for (int u = 0; u < N; ++u) {
        const int fu = u < N / 2 ? u : u - N;
        const int fv = v < N / 2 ? v : v - N;
        const double r = std::sqrt(static_cast<double>(fu * fu + fv * fv));
        int b = -1;
        if (r >= 1.0 && r <= N / 2.0) b = std::min(kSpectrumBins - 1, static_cast<int>((r - 1.0) / width));
        bin[static_cast<std::size_t>(v * N + u)] = b;
        if (b >= 0) ++bin_size[static_cast<std::size_t>(b)];
      }
    }
  }
};

const Twiddles& twiddles() {
  static const Twiddles t;
  return t;
}

}  // namespace

FeatureVector extract_features(const Image& patch) {
  if (patch.width() != N || patch.height() != N || patch.channels() != 1) {
    throw std::domain_error("extract_features: expected a 32x32 single-channel patch");
  }
  const auto& tw = twiddles();

  // Intensities on the 0-255 scale, like the sharpness score.
  Image scaled = patch;
  for (double& v : scaled.data()) v *= 255.0;

  // Mean-removed, Hann-windowed copy for the spectrum; keeps the patch
  // border from leaking power into every bin. The spectrum uses the 16-bit
  // intensity scale so log1p stays far from its floor for strong blur.
  const double m = mean(scaled);
  constexpr double kSpectrumGain = 65535.0 / 255.0;
  std::array<double, N * N> windowed{};
  for (int y = 0; y < N; ++y)
    for (int x = 0; x < N; ++x)
      windowed[static_cast<std::size_t>(y * N + x)] =
          kSpectrumGain * (scaled.at(x, y) - m) * tw.window[static_cast<std::size_t>(x)] * tw.window[static_cast<std::size_t>(y)];

  // Row transforms, then column transforms.
  std::array<double, N * N> re{}, im{};
  for (int y = 0; y < N; ++y) {
    for (int u = 0; u < N; ++u) {
      double sr = 0.0, si = 0.0;
      for (int x = 0; x < N; ++x) {
        const double v = windowed[static_cast<std::size_t>(y * N + x)];
        sr += v * tw.cos_table[static_cast<std::size_t>(u * N + x)];
        si -= v * tw.sin_table[static_cast<std::size_t>(u * N + x)];
      }
      re[static_cast<std::size_t>(y * N + u)] = sr;
      im[static_cast<std::size_t>(y * N + u)] = si;
    }
  }
  std::array<double, kSpectrumBins> power{};
  for (int v = 0; v < N; ++v) {
    for (int u = 0; u < N; ++u) {
      const int b = tw.bin[static_cast<std::size_t>(v * N + u)];
      if (b < 0) continue;
      double sr = 0.0, si = 0.0;
      for (int y = 0; y < N; ++y) {
        const double c = tw.cos_table[static_cast<std::size_t>(v * N + y)];
        const double s = tw.sin_table[static_cast<std::size_t>(v * N + y)];
        const double a = re[static_cast<std::size_t>(y * N + u)];
        const double bi = im[static_cast<std::size_t>(y * N + u)];
        // (a + i b)(c - i s)
        sr += a * c + bi * s;
        si += bi * c - a * s;
      }
      power[static_cast<std::size_t>(b)] += sr * sr + si * si;
    }
  }

  FeatureVector f{};
  for (int b = 0; b < kSpectrumBins; ++b) {
    const int count = tw.bin_size[static_cast<std::size_t>(b)];
    const double mean_power = count > 0 ? power[static_cast<std::size_t>(b)] / count : 0.0;
    f[static_cast<std::size_t>(b)] = std::log1p(mean_power);
  }
  f[kSpectrumBins] = std::log1p(variance(laplacian(scaled)));
  f[kSpectrumBins + 1] = std::log1p(variance(scaled));
  return f;
}

}  // namespace defocus
