#pragma once

#include <filesystem>
#include <string>

#include "defocus/image.hpp"

namespace defocus {

/// Reads 8/16-bit binary PGM (P5) or PNG (gray, gray+alpha, RGB, RGBA).
/// Samples are scaled to [0,1]; alpha is dropped.
Image read_image(const std::filesystem::path& path);

/// Format chosen by extension: .png, .pgm (8-bit), .pgm16 (16-bit PGM).
/// Values are clamped to [0,1] and rounded. Writes go through a temporary
/// file that is renamed into place.
void write_image(const std::filesystem::path& path, const Image& img);

void write_png(const std::filesystem::path& path, const Image& img);
void write_pgm(const std::filesystem::path& path, const Image& img, int bit_depth = 8);

/// Blur maps on disk: 16-bit PGM with sample = round(M / 19 * 65535).
void write_map_pgm16(const std::filesystem::path& path, const Image& map);
Image read_map_pgm16(const std::filesystem::path& path);

/// Writes `contents` to `path` via a temporary sibling and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace defocus
