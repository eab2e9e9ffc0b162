#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "defocus/image.hpp"

namespace defocus {

inline constexpr int kPatchSize = 32;
inline constexpr int kNumClasses = 20;
inline constexpr int kMaxBlurLevel = kNumClasses - 1;
/// Default sharpness threshold on the 0-255 scale.
inline constexpr double kDefaultSharpnessThreshold = 1000.0;
/// Context margin needed to blur a patch at the largest level without
/// touching the border: ceil(3 * 19).
inline constexpr int kContextMargin = 57;

/// One 32x32 grayscale patch and its blur level (the Gaussian sigma).
struct PatchRecord {
  Image pixels;
  int label = 0;
  std::string source_id;
  int x = 0;
  int y = 0;
  /// Set when the source lacked the context margin and the blur fell back
  /// to replicated borders. Not persisted in the binary record format.
  bool replicated_border = false;
};

struct SplitRatios {
  double train = 0.72;
  double validation = 0.18;
  double test = 0.10;
};

struct DatasetSplit {
  std::vector<PatchRecord> train;
  std::vector<PatchRecord> validation;
  std::vector<PatchRecord> test;
  std::uint64_t seed = 0;
  SplitRatios ratios;
};

struct MinedPatch {
  Image patch;
  int x = 0;
  int y = 0;
};

/// Variance of the Laplacian of the 3x3-Gaussian-smoothed patch, on the
/// 0-255 intensity scale. Patch must be 32x32 single-channel.
double sharpness_score(const Image& patch);

/// Non-overlapping 32x32 tiles (from the top-left) whose sharpness score
/// exceeds `threshold`. Color input is converted to luma first.
std::vector<MinedPatch> mine_sharp_patches(const Image& img,
                                           double threshold = kDefaultSharpnessThreshold);

/// Blur levels 0..19 of a standalone patch (replicated borders).
/// Record k holds blur_image(sharp, k, noise_std, ...).
std::vector<PatchRecord> synthesize_classes(const Image& sharp, double noise_std = 0.0,
                                            std::uint64_t seed = 0);

/// Blur levels 0..19 of the tile at (x, y) of `source`, blurring the
/// surrounding context before cropping.
std::vector<PatchRecord> synthesize_classes(const Image& source, int x, int y,
                                            const std::string& source_id,
                                            double noise_std = 0.0, std::uint64_t seed = 0);

/// Partitions by source patch: all blur variants of one (source_id, x, y)
/// land in the same split. Deterministic for a given seed.
DatasetSplit split_dataset(std::vector<PatchRecord> records, const SplitRatios& ratios,
                           std::uint64_t seed);

struct GenerateOptions {
  double threshold = kDefaultSharpnessThreshold;
  double noise_std = 0.0;
  std::uint64_t seed = 0;
  SplitRatios ratios;
};

/// Mines, synthesizes and splits a named corpus. Output order follows the
/// source order regardless of the thread count.
DatasetSplit generate_dataset(std::span<const std::pair<std::string, Image>> sources,
                              const GenerateOptions& options);

/// Binary record stream, little-endian:
/// [u16 w][u16 h][u8 label][w*h f32][u32 n][n bytes id][u32 x][u32 y] ...
void write_records(std::ostream& out, std::span<const PatchRecord> records);
std::vector<PatchRecord> read_records(std::istream& in);

/// Directory with manifest.json plus train.bin / validation.bin / test.bin.
void save_dataset(const std::filesystem::path& dir, const DatasetSplit& split);
DatasetSplit load_dataset(const std::filesystem::path& dir);

/// Loads every .png / .pgm in `dir`, sorted by filename; ids are filenames.
std::vector<std::pair<std::string, Image>> load_image_directory(const std::filesystem::path& dir);

/// Procedurally generated texture corpus bundled with the library.
Image desk_texture(int index, int size = 512);
std::vector<std::pair<std::string, Image>> desk_corpus(int count = 20, int size = 512);

}  // namespace defocus
