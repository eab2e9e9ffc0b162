#include "defocus/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "defocus/filters.hpp"
#include "defocus/io.hpp"
#include "defocus/parallel.hpp"
#include "json.hpp"

namespace defocus {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kManifestSchemaVersion = 1;
constexpr std::array<const char*, 3> kSplitNames = {"train", "validation", "test"};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t string_hash(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Per-record noise seed: independent of processing order.
std::uint64_t record_seed(std::uint64_t seed, const std::string& id, int x, int y, int level) {
  std::uint64_t h = splitmix64(seed ^ string_hash(id));
  h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(x)));
  h = splitmix64(h ^ (static_cast<std::uint64_t>(static_cast<std::uint32_t>(y)) << 20));
  return splitmix64(h ^ static_cast<std::uint64_t>(level));
}

void add_noise_and_clamp(Image& img, double noise_std, std::uint64_t seed) {
  if (noise_std > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, noise_std);
    for (double& v : img.data()) v += noise(rng);
  }
  for (double& v : img.data()) v = std::clamp(v, 0.0, 1.0);
}

void require_patch(const Image& patch, const char* what) {
  if (patch.width() != kPatchSize || patch.height() != kPatchSize || patch.channels() != 1) {
    throw std::domain_error(std::string(what) + ": expected a 32x32 single-channel patch");
  }
}

template <typename T>
void put_le(std::ostream& out, T value) {
  std::array<char, sizeof(T)> bytes{};
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF);
  }
  out.write(bytes.data(), bytes.size());
}

template <typename T>
bool get_le(std::istream& in, T& value) {
  std::array<unsigned char, sizeof(T)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (static_cast<std::size_t>(in.gcount()) != bytes.size()) return false;
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  value = static_cast<T>(v);
  return true;
}

json label_counts(std::span<const PatchRecord> records) {
  std::vector<int> counts(kNumClasses, 0);
  for (const auto& r : records) ++counts[static_cast<std::size_t>(r.label)];
  return counts;
}

}  // namespace

double sharpness_score(const Image& patch) {
  require_patch(patch, "sharpness_score");
  Image scaled = patch;
  for (double& v : scaled.data()) v *= 255.0;
  const Image smoothed = convolve_separable(scaled, Kernel{{0.25, 0.5, 0.25}});
  return variance(laplacian(smoothed));
}

std::vector<MinedPatch> mine_sharp_patches(const Image& img, double threshold) {
  std::vector<MinedPatch> out;
  if (img.width() < kPatchSize || img.height() < kPatchSize) return out;
  const Image gray = to_grayscale(img);
  for (int y = 0; y + kPatchSize <= gray.height(); y += kPatchSize) {
    for (int x = 0; x + kPatchSize <= gray.width(); x += kPatchSize) {
      Image tile = crop(gray, Rect{x, y, kPatchSize, kPatchSize});
      if (sharpness_score(tile) > threshold) out.push_back(MinedPatch{std::move(tile), x, y});
    }
  }
  return out;
}

std::vector<PatchRecord> synthesize_classes(const Image& sharp, double noise_std, std::uint64_t seed) {
  require_patch(sharp, "synthesize_classes");
  std::vector<PatchRecord> out;
  out.reserve(kNumClasses);
  for (int level = 0; level < kNumClasses; ++level) {
    PatchRecord rec;
    rec.pixels = blur_image(sharp, level, noise_std, record_seed(seed, "", 0, 0, level));
    rec.label = level;
    rec.replicated_border = level > 0;
    out.push_back(std::move(rec));
  }
  return out;
}

namespace {

// Shared by the per-tile and whole-image paths; `blurred(level)` yields the
// tile at that blur level, cropped after blurring the full source.
template <typename BlurFn>
std::vector<PatchRecord> make_class_records(const Image& gray, int x, int y, const std::string& source_id,
                                            double noise_std, std::uint64_t seed, BlurFn&& blurred) {
  const bool short_margin = x < kContextMargin || y < kContextMargin ||
                            x + kPatchSize + kContextMargin > gray.width() ||
                            y + kPatchSize + kContextMargin > gray.height();
  std::vector<PatchRecord> out;
  out.reserve(kNumClasses);
  for (int level = 0; level < kNumClasses; ++level) {
    PatchRecord rec;
    rec.pixels = blurred(level);
    add_noise_and_clamp(rec.pixels, noise_std, record_seed(seed, source_id, x, y, level));
    rec.label = level;
    rec.source_id = source_id;
    rec.x = x;
    rec.y = y;
    rec.replicated_border = short_margin && level > 0;
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace

std::vector<PatchRecord> synthesize_classes(const Image& source, int x, int y, const std::string& source_id,
                                            double noise_std, std::uint64_t seed) {
  const Image gray = to_grayscale(source);
  const Rect tile{x, y, kPatchSize, kPatchSize};
  if (x < 0 || y < 0 || x + kPatchSize > gray.width() || y + kPatchSize > gray.height()) {
    throw std::domain_error("synthesize_classes: tile outside source image");
  }
  if (!(noise_std >= 0.0)) throw std::domain_error("synthesize_classes: noise_std must be >= 0");
  return make_class_records(gray, x, y, source_id, noise_std, seed,
                            [&](int level) { return blur_region(gray, level, tile); });
}

DatasetSplit split_dataset(std::vector<PatchRecord> records, const SplitRatios& ratios, std::uint64_t seed) {
  if (!(ratios.train > 0.0) || !(ratios.validation > 0.0) || !(ratios.test > 0.0)) {
    throw std::domain_error("split_dataset: ratios must be positive");
  }
  if (std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9) {
    throw std::domain_error("split_dataset: ratios must sum to 1");
  }

  using Key = std::tuple<std::string, int, int>;
  std::map<Key, std::size_t> group_of;
  std::vector<std::size_t> record_group(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const Key key{records[i].source_id, records[i].x, records[i].y};
    auto [it, inserted] = group_of.try_emplace(key, group_of.size());
    record_group[i] = it->second;
  }
  const std::size_t groups = group_of.size();

  std::vector<std::size_t> order(groups);
  for (std::size_t i = 0; i < groups; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = groups; i > 1; --i) {
    std::swap(order[i - 1], order[static_cast<std::size_t>(rng() % i)]);
  }

  const auto g = static_cast<double>(groups);
  std::array<std::size_t, 3> counts{};
  counts[0] = static_cast<std::size_t>(std::llround(g * ratios.train));
  counts[1] = static_cast<std::size_t>(std::llround(g * ratios.validation));
  counts[0] = std::min(counts[0], groups);
  counts[1] = std::min(counts[1], groups - counts[0]);
  counts[2] = groups - counts[0] - counts[1];
  if (groups >= 3) {
    // Every split gets at least one source patch.
    for (std::size_t s = 0; s < 3; ++s) {
      if (counts[s] == 0) {
        auto largest = std::max_element(counts.begin(), counts.end());
        --*largest;
        counts[s] = 1;
      }
    }
  }

  std::vector<int> assignment(groups);
  std::size_t pos = 0;
  for (int s = 0; s < 3; ++s) {
    for (std::size_t k = 0; k < counts[static_cast<std::size_t>(s)]; ++k) assignment[order[pos++]] = s;
  }

  DatasetSplit split;
  split.seed = seed;
  split.ratios = ratios;
  for (std::size_t i = 0; i < records.size(); ++i) {
    switch (assignment[record_group[i]]) {
      case 0: split.train.push_back(std::move(records[i])); break;
      case 1: split.validation.push_back(std::move(records[i])); break;
      default: split.test.push_back(std::move(records[i])); break;
    }
  }
  return split;
}

DatasetSplit generate_dataset(std::span<const std::pair<std::string, Image>> sources,
                              const GenerateOptions& options) {
  if (!(options.noise_std >= 0.0)) throw std::domain_error("generate_dataset: noise_std must be >= 0");
  std::vector<std::vector<PatchRecord>> per_source(sources.size());
  parallel_for(0, static_cast<int>(sources.size()), [&](int i) {
    const auto& [id, img] = sources[static_cast<std::size_t>(i)];
    const Image gray = to_grayscale(img);
    auto& out = per_source[static_cast<std::size_t>(i)];
    const auto mined = mine_sharp_patches(gray, options.threshold);
    if (mined.empty()) return;
    // One full-image blur per level instead of one region blur per tile.
    std::vector<Image> levels;
    levels.reserve(kNumClasses);
    for (int level = 0; level < kNumClasses; ++level) levels.push_back(blur_image(gray, level));
    for (const auto& m : mined) {
      const Rect tile{m.x, m.y, kPatchSize, kPatchSize};
      auto recs = make_class_records(gray, m.x, m.y, id, options.noise_std, options.seed,
                                     [&](int level) { return crop(levels[static_cast<std::size_t>(level)], tile); });
      std::move(recs.begin(), recs.end(), std::back_inserter(out));
    }
  });
  std::vector<PatchRecord> all;
  for (auto& v : per_source) std::move(v.begin(), v.end(), std::back_inserter(all));
  return split_dataset(std::move(all), options.ratios, options.seed);
}

void write_records(std::ostream& out, std::span<const PatchRecord> records) {
  for (const auto& r : records) {
    if (r.label < 0 || r.label >= kNumClasses) throw std::domain_error("write_records: label out of range");
    if (r.pixels.channels() != 1) throw std::domain_error("write_records: single-channel patches required");
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(r.pixels.width()));
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(r.pixels.height()));
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(r.label));
    for (double v : r.pixels.data()) {
      const float f = static_cast<float>(v);
      std::uint32_t bits = 0;
      std::memcpy(&bits, &f, sizeof(bits));
      put_le<std::uint32_t>(out, bits);
    }
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(r.source_id.size()));
    out.write(r.source_id.data(), static_cast<std::streamsize>(r.source_id.size()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(r.x));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(r.y));
  }
  if (!out) throw std::runtime_error("write_records: stream error");
}

std::vector<PatchRecord> read_records(std::istream& in) {
  std::vector<PatchRecord> out;
  while (true) {
    std::uint16_t w = 0;
    if (!get_le(in, w)) break;
    std::uint16_t h = 0;
    std::uint8_t label = 0;
    if (!get_le(in, h) || !get_le(in, label)) throw std::runtime_error("read_records: truncated header");
    if (w == 0 || h == 0) throw std::runtime_error("read_records: zero-sized patch");
    if (label >= kNumClasses) throw std::runtime_error("read_records: label out of range");
    PatchRecord rec;
    rec.label = label;
    rec.pixels = Image(w, h, 1);
    for (double& v : rec.pixels.data()) {
      std::uint32_t bits = 0;
      if (!get_le(in, bits)) throw std::runtime_error("read_records: truncated pixel data");
      float f = 0.0f;
      std::memcpy(&f, &bits, sizeof(f));
      v = static_cast<double>(f);
    }
    std::uint32_t len = 0;
    if (!get_le(in, len)) throw std::runtime_error("read_records: truncated source id");
    rec.source_id.resize(len);
    in.read(rec.source_id.data(), static_cast<std::streamsize>(len));
    std::uint32_t x = 0, y = 0;
    if (static_cast<std::uint32_t>(in.gcount()) != len || !get_le(in, x) || !get_le(in, y)) {
      throw std::runtime_error("read_records: truncated record");
    }
    rec.x = static_cast<int>(x);
    rec.y = static_cast<int>(y);
    out.push_back(std::move(rec));
  }
  return out;
}

void save_dataset(const fs::path& dir, const DatasetSplit& split) {
  fs::create_directories(dir);
  const std::array<const std::vector<PatchRecord>*, 3> parts = {&split.train, &split.validation, &split.test};
  json manifest;
  manifest["schema_version"] = kManifestSchemaVersion;
  manifest["seed"] = split.seed;
  manifest["ratios"] = {{"train", split.ratios.train},
                        {"validation", split.ratios.validation},
                        {"test", split.ratios.test}};
  manifest["patch_size"] = kPatchSize;
  manifest["num_classes"] = kNumClasses;
  for (std::size_t s = 0; s < 3; ++s) {
    std::ostringstream bin;
    write_records(bin, *parts[s]);
    write_file_atomic(dir / (std::string(kSplitNames[s]) + ".bin"), bin.str());
    manifest["records"][kSplitNames[s]] = parts[s]->size();
    manifest["counts"][kSplitNames[s]] = label_counts(*parts[s]);
  }
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

DatasetSplit load_dataset(const fs::path& dir) {
  json manifest;
  try {
    manifest = json::parse(read_file(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw std::runtime_error("load_dataset: bad manifest.json: " + std::string(e.what()));
  }
  if (manifest.value("schema_version", 0) != kManifestSchemaVersion) {
    throw std::runtime_error("load_dataset: unsupported manifest schema version");
  }
  DatasetSplit split;
  split.seed = manifest.at("seed").get<std::uint64_t>();
  split.ratios.train = manifest.at("ratios").at("train").get<double>();
  split.ratios.validation = manifest.at("ratios").at("validation").get<double>();
  split.ratios.test = manifest.at("ratios").at("test").get<double>();
  const std::array<std::vector<PatchRecord>*, 3> parts = {&split.train, &split.validation, &split.test};
  for (std::size_t s = 0; s < 3; ++s) {
    std::ifstream in(dir / (std::string(kSplitNames[s]) + ".bin"), std::ios::binary);
    if (!in) throw std::runtime_error("load_dataset: missing " + std::string(kSplitNames[s]) + ".bin");
    *parts[s] = read_records(in);
    if (parts[s]->size() != manifest.at("records").at(kSplitNames[s]).get<std::size_t>()) {
      throw std::runtime_error("load_dataset: record count mismatch in " + std::string(kSplitNames[s]));
    }
  }
  return split;
}

std::vector<std::pair<std::string, Image>> load_image_directory(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".png" || ext == ".pgm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<std::pair<std::string, Image>> out;
  out.reserve(files.size());
  for (const auto& f : files) out.emplace_back(f.filename().string(), read_image(f));
  return out;
}

}  // namespace defocus
