#include "defocus/io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace defocus {

namespace fs = std::filesystem;

namespace {

std::string lower_extension(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

fs::path temp_sibling(const fs::path& path) {
  fs::path tmp = path;
  tmp += ".tmp";
  return tmp;
}

void commit(const fs::path& tmp, const fs::path& path) {
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw std::runtime_error("cannot move " + tmp.string() + " into place: " + ec.message());
  }
}

std::uint16_t quantize(double v, double scale) {
  return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * scale));
}

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string pgm_token(std::istream& in) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string ignored;
      std::getline(in, ignored);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(c);
  }
  return tok;
}

Image read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  if (pgm_token(in) != "P5") throw std::runtime_error(path.string() + ": not a binary PGM (P5)");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(pgm_token(in));
    h = std::stoi(pgm_token(in));
    maxval = std::stoi(pgm_token(in));
  } catch (const std::exception&) {
    throw std::runtime_error(path.string() + ": malformed PGM header");
  }
  if (w < 1 || h < 1 || maxval < 1 || maxval > 65535) {
    throw std::runtime_error(path.string() + ": unsupported PGM dimensions or maxval");
  }
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  const std::size_t bytes = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(n * bytes);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) throw std::runtime_error(path.string() + ": truncated PGM data");
  Image img(w, h, 1);
  auto d = img.data();
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned v = bytes == 2 ? (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1] : raw[i];
    d[i] = static_cast<double>(v) / static_cast<double>(maxval);
  }
  return img;
}

Image read_png(const fs::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw std::runtime_error(path.string() + ": " + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int channels = color ? 3 : 1;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw std::runtime_error(path.string() + ": " + msg);
  }
  Image img(static_cast<int>(image.width), static_cast<int>(image.height), channels);
  auto d = img.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<double>(buffer[i]) / 255.0;
  return img;
}

}  // namespace

Image read_image(const fs::path& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw std::runtime_error("cannot open " + path.string());
  char magic[2] = {0, 0};
  probe.read(magic, 2);
  probe.close();
  if (magic[0] == 'P' && magic[1] == '5') return read_pgm(path);
  return read_png(path);
}

void write_png(const fs::path& path, const Image& img) {
  if (img.empty()) throw std::domain_error("write_png: empty image");
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<png_byte> buffer(img.size());
  const auto d = img.data();
  for (std::size_t i = 0; i < d.size(); ++i) buffer[i] = static_cast<png_byte>(quantize(d[i], 255.0));
  const fs::path tmp = temp_sibling(path);
  if (!png_image_write_to_file(&image, tmp.string().c_str(), 0, buffer.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw std::runtime_error(path.string() + ": " + msg);
  }
  commit(tmp, path);
}

void write_pgm(const fs::path& path, const Image& img, int bit_depth) {
  if (img.channels() != 1) throw std::domain_error("write_pgm: single-channel image required");
  if (bit_depth != 8 && bit_depth != 16) throw std::domain_error("write_pgm: bit depth must be 8 or 16");
  const int maxval = bit_depth == 8 ? 255 : 65535;
  std::ostringstream out;
  out << "P5\n" << img.width() << ' ' << img.height() << '\n' << maxval << '\n';
  for (double v : img.data()) {
    const std::uint16_t q = quantize(v, maxval);
    if (bit_depth == 16) out.put(static_cast<char>(q >> 8));
    out.put(static_cast<char>(q & 0xFF));
  }
  write_file_atomic(path, out.str());
}

void write_image(const fs::path& path, const Image& img) {
  const std::string ext = lower_extension(path);
  if (ext == ".png") {
    write_png(path, img);
  } else if (ext == ".pgm") {
    write_pgm(path, img, 8);
  } else if (ext == ".pgm16") {
    write_pgm(path, img, 16);
  } else {
    throw std::domain_error("write_image: unsupported extension '" + ext + "' (use .png, .pgm, .pgm16)");
  }
}

void write_map_pgm16(const fs::path& path, const Image& map) {
  Image scaled = map;
  for (double& v : scaled.data()) v /= 19.0;
  write_pgm(path, scaled, 16);
}

Image read_map_pgm16(const fs::path& path) {
  Image img = read_image(path);
  if (img.channels() != 1) throw std::runtime_error(path.string() + ": blur map must be single-channel");
  for (double& v : img.data()) v *= 19.0;
  return img;
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
  const fs::path tmp = temp_sibling(path);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  commit(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace defocus
