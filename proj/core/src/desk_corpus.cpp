#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "defocus/dataset.hpp"

namespace defocus {

namespace {

// Uniform [0,1) from raw engine bits; avoids distribution objects whose
// output differs between standard library implementations.
class Uniform {
 public:
  explicit Uniform(std::uint64_t seed) : rng_(seed) {}
  double operator()() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  double operator()(double lo, double hi) { return lo + (hi - lo) * (*this)(); }
  double normal() {
    const double a = 1.0 - (*this)();
    const double b = (*this)();
    return std::sqrt(-2.0 * std::log(a)) * std::cos(2.0 * std::numbers::pi * b);
  }

 private:
  std::mt19937_64 rng_;
};

using cplx = std::complex<double>;

// In-place iterative radix-2 FFT, inverse without the 1/n factor.
void fft(std::vector<cplx>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * std::numbers::pi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        const cplx w = std::polar(1.0, ang * static_cast<double>(k));
        const cplx u = a[i + k];
        const cplx v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
      }
    }
  }
}

void ifft2(std::vector<cplx>& a, std::size_t n) {
  std::vector<cplx> line(n);
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) line[x] = a[y * n + x];
    fft(line, true);
    for (std::size_t x = 0; x < n; ++x) a[y * n + x] = line[x];
  }
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t y = 0; y < n; ++y) line[y] = a[y * n + x];
    fft(line, true);
    for (std::size_t y = 0; y < n; ++y) a[y * n + x] = line[y];
  }
}

// Gaussian noise with power ~ 1/f^beta, no content below low_cut cycles/pixel.
std::vector<double> power_law_noise(std::size_t n, double beta, double low_cut, Uniform& u) {
  std::vector<cplx> spec(n * n);
  for (std::size_t v = 0; v < n; ++v) {
    for (std::size_t h = 0; h < n; ++h) {
      const double fu = (h < n / 2 ? static_cast<double>(h) : static_cast<double>(h) - n) / n;
      const double fv = (v < n / 2 ? static_cast<double>(v) : static_cast<double>(v) - n) / n;
      const double f = std::sqrt(fu * fu + fv * fv);
      const double re = u.normal();
      const double im = u.normal();
      if (f < low_cut) continue;
      spec[v * n + h] = cplx(re, im) / std::pow(f, beta / 2.0);
    }
  }
  ifft2(spec, n);
  std::vector<double> out(n * n);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = spec[i].real();
  return out;
}

}  // namespace

Image desk_texture(int index, int size) {
  if (index < 0) throw std::domain_error("desk_texture: index must be >= 0");
  if (size < kPatchSize) throw std::domain_error("desk_texture: size must be >= 32");
  Uniform u(0xDEF0C05ull + static_cast<std::uint64_t>(index) * 7919ull);
  std::size_t n = 1;
  while (n < static_cast<std::size_t>(size)) n <<= 1;

  const double beta = u(0.8, 1.2);
  const double contrast = u(0.18, 0.22);
  const std::vector<double> field = power_law_noise(n, beta, 0.03, u);

  Image img(size, size, 1, 0.0);
  double sum = 0.0, sum_sq = 0.0;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double v = field[static_cast<std::size_t>(y) * n + static_cast<std::size_t>(x)];
      sum += v;
      sum_sq += v * v;
    }
  }
  const double count = static_cast<double>(size) * size;
  const double m = sum / count;
  const double sd = std::sqrt(std::max(0.0, sum_sq / count - m * m));
  const double scale = sd > 0.0 ? contrast / sd : 0.0;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double v = field[static_cast<std::size_t>(y) * n + static_cast<std::size_t>(x)];
      img.at(x, y) = std::clamp(0.5 + (v - m) * scale, 0.0, 1.0);
    }
  }
  return img;
}

std::vector<std::pair<std::string, Image>> desk_corpus(int count, int size) {
  std::vector<std::pair<std::string, Image>> out;
  out.reserve(static_cast<std::size_t>(std::max(0, count)));
  for (int i = 0; i < count; ++i) {
    std::string id = "texture_" + std::string(i < 10 ? "0" : "") + std::to_string(i) + ".png";
    out.emplace_back(std::move(id), desk_texture(i, size));
  }
  return out;
}

}  // namespace defocus
