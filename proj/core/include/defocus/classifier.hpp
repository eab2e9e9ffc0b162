#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "defocus/dataset.hpp"
#include "defocus/image.hpp"

namespace defocus {

inline constexpr int kSpectrumBins = 16;
inline constexpr int kFeatureCount = kSpectrumBins + 2;

/// 16 radially averaged log power-spectrum bins (DC excluded), then
/// log(1 + variance of Laplacian) and log(1 + intensity variance).
using FeatureVector = std::array<double, kFeatureCount>;
using Probabilities = std::array<double, kNumClasses>;

FeatureVector extract_features(const Image& patch);

struct TrainConfig {
  int batch_size = 128;
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int epochs = 50;
  std::uint64_t seed = 0;
};

/// Standardization statistics plus a multinomial softmax layer.
struct ClassifierModel {
  FeatureVector feature_mean{};
  FeatureVector feature_std{};
  std::array<std::array<double, kFeatureCount>, kNumClasses> weights{};
  std::array<double, kNumClasses> bias{};
  int epochs_trained = 0;
  TrainConfig config;

  /// Zero weights and bias, identity standardization.
  static ClassifierModel zero();
};

/// Parameters flattened as [W row-major (20 x 18) | b (20)].
inline constexpr std::size_t kParameterCount =
    static_cast<std::size_t>(kNumClasses) * kFeatureCount + kNumClasses;
using ParameterVector = std::array<double, kParameterCount>;

ParameterVector flatten_parameters(const ClassifierModel& model);
void assign_parameters(ClassifierModel& model, const ParameterVector& params);

FeatureVector standardize(const ClassifierModel& model, const FeatureVector& features);

/// Numerically stable softmax (max-subtracted).
Probabilities softmax(const Probabilities& logits);
Probabilities logits(const ClassifierModel& model, const FeatureVector& standardized);
Probabilities softmax_forward(const ClassifierModel& model, const FeatureVector& features);

/// Arg-max, ties toward the lower class.
int argmax(const Probabilities& p);
int predict(const ClassifierModel& model, const Image& patch);

/// Mean cross-entropy -log p[label] over a batch of standardized features.
/// When `gradient` is non-null it receives d(loss)/d(params).
double batch_loss(const ParameterVector& params, std::span<const FeatureVector> standardized,
                  std::span<const int> labels, ParameterVector* gradient = nullptr);

/// Adam with bias-corrected moments.
class AdamOptimizer {
 public:
  AdamOptimizer(std::size_t parameter_count, const TrainConfig& config);

  void step(std::span<double> params, std::span<const double> gradient);
  int steps_taken() const noexcept { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  int t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double validation_loss = 0.0;
  double validation_accuracy = 0.0;
};

struct TrainResult {
  ClassifierModel model;
  /// Entry 0 holds the statistics of the untrained (zero) model.
  std::vector<EpochStats> history;
};

/// Feature statistics (population mean / std, std floored to 1 when a
/// feature is constant) over a set of feature vectors.
void fit_standardization(ClassifierModel& model, std::span<const FeatureVector> features);

TrainResult train(const DatasetSplit& split, const TrainConfig& config);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int support = 0;
  /// True when precision or recall was undefined (0/0) and reported as 0.
  bool undefined = false;
};

struct EvalReport {
  double accuracy = 0.0;
  /// Fraction of predictions within +-2 classes of the truth.
  double within2_accuracy = 0.0;
  std::array<ClassMetrics, kNumClasses> per_class{};
  /// confusion[truth][predicted]
  std::array<std::array<int, kNumClasses>, kNumClasses> confusion{};
  int total = 0;
};

EvalReport evaluate_predictions(std::span<const int> truth, std::span<const int> predicted);
EvalReport evaluate(const ClassifierModel& model, std::span<const PatchRecord> records);

/// JSON persistence; doubles are written with round-trip precision.
std::string model_to_json(const ClassifierModel& model);
ClassifierModel model_from_json(const std::string& text);
void save_model(const std::filesystem::path& path, const ClassifierModel& model);
ClassifierModel load_model(const std::filesystem::path& path);

std::string report_to_json(const EvalReport& report);
std::string history_to_json(const std::vector<EpochStats>& history);

}  // namespace defocus
