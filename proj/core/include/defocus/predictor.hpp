#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <tuple>

#include "defocus/classifier.hpp"
#include "defocus/image.hpp"

namespace defocus {

/// Where a patch came from. Backends that do not look at pixels use this.
struct PatchContext {
  std::string_view source_id;
  int x = 0;
  int y = 0;
};

/// Patch-level blur classifier backend. Implementations must be safe to call
/// concurrently and return a level in [0, 19].
class PatchPredictor {
 public:
  virtual ~PatchPredictor() = default;
  virtual int predict(const Image& patch, const PatchContext& ctx) const = 0;
  virtual std::string id() const = 0;
};

/// Reference softmax model.
class ModelPredictor final : public PatchPredictor {
 public:
  explicit ModelPredictor(ClassifierModel model) : model_(std::move(model)) {}
  int predict(const Image& patch, const PatchContext& ctx) const override;
  std::string id() const override { return "softmax"; }
  const ClassifierModel& model() const noexcept { return model_; }

 private:
  ClassifierModel model_;
};

/// Ground-truth backend for synthetic fixtures: returns the rounded mean of
/// a known per-pixel level map over the patch window.
class OraclePredictor final : public PatchPredictor {
 public:
  explicit OraclePredictor(Image truth);
  int predict(const Image& patch, const PatchContext& ctx) const override;
  std::string id() const override { return "oracle"; }

 private:
  Image truth_;
};

/// Scripted backend driven by the window origin only.
class FunctionPredictor final : public PatchPredictor {
 public:
  using Fn = std::function<int(const PatchContext&)>;
  explicit FunctionPredictor(Fn fn, std::string id = "scripted") : fn_(std::move(fn)), id_(std::move(id)) {}
  int predict(const Image& patch, const PatchContext& ctx) const override;
  std::string id() const override { return id_; }

 private:
  Fn fn_;
  std::string id_;
};

/// Predictions produced elsewhere (e.g. an external CNN), imported from a
/// CSV of `source_id,x,y,label` rows. An optional header row is skipped.
class FilePredictor final : public PatchPredictor {
 public:
  static FilePredictor from_csv(const std::filesystem::path& path);
  static FilePredictor from_csv_text(const std::string& text);

  int predict(const Image& patch, const PatchContext& ctx) const override;
  std::string id() const override { return "file"; }
  std::size_t size() const noexcept { return table_.size(); }

 private:
  std::map<std::tuple<std::string, int, int>, int, std::less<>> table_;
};

}  // namespace defocus
