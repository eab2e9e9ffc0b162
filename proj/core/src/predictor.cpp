#include "defocus/predictor.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "defocus/io.hpp"

namespace defocus {

int ModelPredictor::predict(const Image& patch, const PatchContext&) const { return defocus::predict(model_, patch); }

OraclePredictor::OraclePredictor(Image truth) : truth_(std::move(truth)) {
  if (truth_.channels() != 1) throw std::domain_error("OraclePredictor: truth map must be single-channel");
}

int OraclePredictor::predict(const Image&, const PatchContext& ctx) const {
  if (ctx.x < 0 || ctx.y < 0 || ctx.x + kPatchSize > truth_.width() || ctx.y + kPatchSize > truth_.height()) {
    throw std::domain_error("OraclePredictor: window outside truth map");
  }
  double s = 0.0;
  for (int y = ctx.y; y < ctx.y + kPatchSize; ++y)
    for (int x = ctx.x; x < ctx.x + kPatchSize; ++x) s += truth_.at(x, y);
  const long level = std::lround(s / (kPatchSize * kPatchSize));
  return static_cast<int>(std::clamp<long>(level, 0, kMaxBlurLevel));
}

int FunctionPredictor::predict(const Image&, const PatchContext& ctx) const {
  const int level = fn_(ctx);
  if (level < 0 || level > kMaxBlurLevel) throw std::domain_error("FunctionPredictor: level out of range");
  return level;
}

FilePredictor FilePredictor::from_csv(const std::filesystem::path& path) { return from_csv_text(read_file(path)); }

FilePredictor FilePredictor::from_csv_text(const std::string& text) {
  FilePredictor fp;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    if (fields.size() != 4) {
      throw std::runtime_error("prediction CSV line " + std::to_string(line_no) + ": expected source_id,x,y,label");
    }
    auto parse = [](const std::string& field, int& out) {
      const char* end = field.data() + field.size();
      const auto [ptr, ec] = std::from_chars(field.data(), end, out);
      return ec == std::errc{} && ptr == end;
    };
    int x = 0, y = 0, label = 0;
    if (!parse(fields[1], x) || !parse(fields[2], y) || !parse(fields[3], label)) {
      if (line_no == 1) continue;  // header
      throw std::runtime_error("prediction CSV line " + std::to_string(line_no) + ": non-integer field");
    }
    if (label < 0 || label > kMaxBlurLevel) {
      throw std::runtime_error("prediction CSV line " + std::to_string(line_no) + ": label out of range");
    }
    fp.table_[{fields[0], x, y}] = label;
  }
  return fp;
}

int FilePredictor::predict(const Image&, const PatchContext& ctx) const {
  const auto it = table_.find(std::make_tuple(std::string(ctx.source_id), ctx.x, ctx.y));
  if (it == table_.end()) {
    throw std::runtime_error("no imported prediction for " + std::string(ctx.source_id) + " at (" +
                             std::to_string(ctx.x) + "," + std::to_string(ctx.y) + ")");
  }
  return it->second;
}

}  // namespace defocus
