#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "defocus/image.hpp"
#include "defocus/predictor.hpp"

namespace defocus {

inline constexpr int kDefaultStep = 16;

/// Per-pixel blur level in [0, 19] at the source image's resolution.
struct BlurMap {
  Image values;
  int step = kDefaultStep;
  std::string backend_id;
};

/// Window origins along one axis: 0, step, 2*step, ... plus a final window
/// flush with the far edge when the regular grid leaves pixels uncovered.
std::vector<int> window_origins(int length, int step);

/// |Omega_q|: number of 32x32 windows covering each pixel (row-major).
std::vector<int> coverage_count(int width, int height, int step);

/// Averages patch predictions over all windows covering each pixel. Integer
/// predictions are accumulated exactly and divided once per pixel, so the
/// result does not depend on the thread count.
BlurMap estimate_map(const Image& img, const PatchPredictor& backend, int step = kDefaultStep,
                     std::string_view source_id = {});

enum class ClassicalMethod { entropy, stddev, var_laplacian };

ClassicalMethod parse_classical_method(std::string_view name);
std::string_view to_string(ClassicalMethod method);

/// Raw per-pixel statistic over the window [x - w/2, x + w/2 - 1] (same in y),
/// replicate borders. entropy: Shannon entropy in bits of the 256-bin
/// histogram of 8-bit quantized values. stddev / var_laplacian: population
/// statistics. Higher means sharper for all three.
Image classical_map(const Image& img, ClassicalMethod method, int window = 16);

/// Processing-time model: T * N / step^2.
double predict_runtime(double seconds_per_patch, double pixels, int step);

/// 16-bit PGM plus a `<stem>.json` sidecar with step, backend, min and max.
void save_blur_map(const std::filesystem::path& path, const BlurMap& map);
BlurMap load_blur_map(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& map_path);

}  // namespace defocus
