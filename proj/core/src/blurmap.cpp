#include "defocus/blurmap.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "defocus/filters.hpp"
#include "defocus/io.hpp"
#include "defocus/parallel.hpp"
#include "json.hpp"

namespace defocus {

namespace {

void validate_geometry(int width, int height, int step) {
  if (width < kPatchSize || height < kPatchSize) {
    throw std::domain_error("blur map: image must be at least 32x32");
  }
  if (step < 1 || step > kPatchSize) throw std::domain_error("blur map: step must be in [1, 32]");
}

int clamp_index(int v, int n) { return v < 0 ? 0 : (v >= n ? n - 1 : v); }

}  // namespace

std::vector<int> window_origins(int length, int step) {
  if (length < kPatchSize) throw std::domain_error("window_origins: length must be >= 32");
  if (step < 1 || step > kPatchSize) throw std::domain_error("window_origins: step must be in [1, 32]");
  std::vector<int> out;
  for (int o = 0; o + kPatchSize <= length; o += step) out.push_back(o);
  if (out.back() + kPatchSize < length) out.push_back(length - kPatchSize);
  return out;
}

std::vector<int> coverage_count(int width, int height, int step) {
  validate_geometry(width, height, step);
  const auto xs = window_origins(width, step);
  const auto ys = window_origins(height, step);
  // Counts separate: |Omega_q| = (#x windows over q.x) * (#y windows over q.y).
  auto axis = [](const std::vector<int>& origins, int length) {
    std::vector<int> c(static_cast<std::size_t>(length), 0);
    for (int o : origins)
      for (int i = o; i < o + kPatchSize; ++i) ++c[static_cast<std::size_t>(i)];
    return c;
  };
  const auto cx = axis(xs, width);
  const auto cy = axis(ys, height);
  std::vector<int> out(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      out[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)] =
          cx[static_cast<std::size_t>(x)] * cy[static_cast<std::size_t>(y)];
  return out;
}

BlurMap estimate_map(const Image& img, const PatchPredictor& backend, int step, std::string_view source_id) {
  validate_geometry(img.width(), img.height(), step);
  const Image gray = to_grayscale(img);
  const auto xs = window_origins(gray.width(), step);
  const auto ys = window_origins(gray.height(), step);
  const int nx = static_cast<int>(xs.size());
  const int windows = nx * static_cast<int>(ys.size());

  std::vector<int> predictions(static_cast<std::size_t>(windows));
  parallel_for(0, windows, [&](int i) {
    const int x = xs[static_cast<std::size_t>(i % nx)];
    const int y = ys[static_cast<std::size_t>(i / nx)];
    const Image patch = crop(gray, Rect{x, y, kPatchSize, kPatchSize});
    const int level = backend.predict(patch, PatchContext{source_id, x, y});
    if (level < 0 || level > kMaxBlurLevel) throw std::domain_error("estimate_map: backend returned level out of range");
    predictions[static_cast<std::size_t>(i)] = level;
  });

  const int w = gray.width();
  const int h = gray.height();
  std::vector<std::int64_t> sums(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0);
  for (int i = 0; i < windows; ++i) {
    const int x0 = xs[static_cast<std::size_t>(i % nx)];
    const int y0 = ys[static_cast<std::size_t>(i / nx)];
    const int p = predictions[static_cast<std::size_t>(i)];
    for (int y = y0; y < y0 + kPatchSize; ++y)
      for (int x = x0; x < x0 + kPatchSize; ++x)
        sums[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x)] += p;
  }
  const auto counts = coverage_count(w, h, step);

  BlurMap map;
  map.values = Image(w, h, 1);
  map.step = step;
  map.backend_id = backend.id();
  auto d = map.values.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<double>(sums[i]) / static_cast<double>(counts[i]);
  return map;
}

ClassicalMethod parse_classical_method(std::string_view name) {
  if (name == "entropy") return ClassicalMethod::entropy;
  if (name == "stddev") return ClassicalMethod::stddev;
  if (name == "var_laplacian" || name == "var-laplacian") return ClassicalMethod::var_laplacian;
  throw std::domain_error("unknown classical method '" + std::string(name) +
                          "' (expected entropy, stddev or var_laplacian)");
}

std::string_view to_string(ClassicalMethod method) {
  switch (method) {
    case ClassicalMethod::entropy: return "entropy";
    case ClassicalMethod::stddev: return "stddev";
    case ClassicalMethod::var_laplacian: return "var_laplacian";
  }
  return "unknown";
}

namespace {

Image windowed_variance(const Image& img, int lo, int hi) {
  // Shifting by a sample value keeps E[x^2] - E[x]^2 from cancelling badly
  // and makes flat regions exactly zero.
  const double ref = img.size() > 0 ? img.data()[0] : 0.0;
  Image shifted = img;
  for (double& v : shifted.data()) v -= ref;
  Image sq = shifted;
  for (double& v : sq.data()) v *= v;
  const Image m = window_mean(shifted, lo, hi);
  const Image m2 = window_mean(sq, lo, hi);
  Image out(img.width(), img.height(), 1);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data()[i] = std::max(0.0, m2.data()[i] - m.data()[i] * m.data()[i]);
  }
  return out;
}

Image windowed_entropy(const Image& img, int lo, int hi) {
  const int w = img.width();
  const int h = img.height();
  std::vector<std::uint8_t> q(img.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    q[i] = static_cast<std::uint8_t>(std::lround(std::clamp(img.data()[i], 0.0, 1.0) * 255.0));
  }
  auto level = [&](int x, int y) {
    return q[static_cast<std::size_t>(clamp_index(y, h)) * static_cast<std::size_t>(w) +
             static_cast<std::size_t>(clamp_index(x, w))];
  };
  const int span = hi - lo + 1;
  const double total = static_cast<double>(span) * span;
  // -sum p log2 p = log2(T) - (1/T) sum c log2 c
  std::vector<double> c_log_c(static_cast<std::size_t>(span * span + 1), 0.0);
  for (std::size_t c = 1; c < c_log_c.size(); ++c) c_log_c[c] = static_cast<double>(c) * std::log2(static_cast<double>(c));

  Image out(w, h, 1);
  parallel_for(0, h, [&](int y) {
    std::array<int, 256> hist{};
    auto add = [&](std::uint8_t v, int delta) { hist[v] += delta; };
    for (int dy = lo; dy <= hi; ++dy)
      for (int dx = lo; dx <= hi; ++dx) add(level(dx, y + dy), +1);
    for (int x = 0; x < w; ++x) {
      if (x > 0) {
        for (int dy = lo; dy <= hi; ++dy) {
          add(level(x - 1 + lo, y + dy), -1);
          add(level(x + hi, y + dy), +1);
        }
      }
      double s = 0.0;
      for (int c : hist) s += c_log_c[static_cast<std::size_t>(c)];
      out.at(x, y) = std::max(0.0, std::log2(total) - s / total);
    }
  });
  return out;
}

}  // namespace

Image classical_map(const Image& img, ClassicalMethod method, int window) {
  if (window < 1) throw std::domain_error("classical_map: window must be >= 1");
  const Image gray = to_grayscale(img);
  const int lo = -(window / 2);
  const int hi = lo + window - 1;
  switch (method) {
    case ClassicalMethod::entropy:
      return windowed_entropy(gray, lo, hi);
    case ClassicalMethod::stddev: {
      Image v = windowed_variance(gray, lo, hi);
      for (double& x : v.data()) x = std::sqrt(x);
      return v;
    }
    case ClassicalMethod::var_laplacian:
      return windowed_variance(laplacian(gray), lo, hi);
  }
  throw std::domain_error("classical_map: unknown method");
}

double predict_runtime(double seconds_per_patch, double pixels, int step) {
  if (!(seconds_per_patch > 0.0) || !(pixels > 0.0) || step < 1) {
    throw std::domain_error("predict_runtime: inputs must be positive");
  }
  return seconds_per_patch * pixels / (static_cast<double>(step) * static_cast<double>(step));
}

std::filesystem::path sidecar_path(const std::filesystem::path& map_path) {
  std::filesystem::path p = map_path;
  p.replace_extension(".json");
  return p;
}

void save_blur_map(const std::filesystem::path& path, const BlurMap& map) {
  write_map_pgm16(path, map.values);
  const nlohmann::json meta = {{"step", map.step},
                               {"backend", map.backend_id},
                               {"width", map.values.width()},
                               {"height", map.values.height()},
                               {"min", min_value(map.values)},
                               {"max", max_value(map.values)},
                               {"encoding", "round(M / 19 * 65535)"}};
  write_file_atomic(sidecar_path(path), meta.dump(2) + "\n");
}

BlurMap load_blur_map(const std::filesystem::path& path) {
  BlurMap map;
  map.values = read_map_pgm16(path);
  const auto side = sidecar_path(path);
  if (std::filesystem::exists(side)) {
    try {
      const auto meta = nlohmann::json::parse(read_file(side));
      map.step = meta.value("step", kDefaultStep);
      map.backend_id = meta.value("backend", std::string{});
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("bad map sidecar " + side.string() + ": " + e.what());
    }
  }
  return map;
}

}  // namespace defocus
