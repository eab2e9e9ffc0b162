#include "defocus/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "defocus/io.hpp"
#include "defocus/parallel.hpp"
#include "json.hpp"

namespace defocus {

using nlohmann::json;

ClassifierModel ClassifierModel::zero() {
  ClassifierModel m;
  m.feature_mean.fill(0.0);
  m.feature_std.fill(1.0);
  return m;
}

ParameterVector flatten_parameters(const ClassifierModel& model) {
  ParameterVector p{};
  std::size_t i = 0;
  for (const auto& row : model.weights)
    for (double w : row) p[i++] = w;
  for (double b : model.bias) p[i++] = b;
  return p;
}

void assign_parameters(ClassifierModel& model, const ParameterVector& params) {
  std::size_t i = 0;
  for (auto& row : model.weights)
    for (double& w : row) w = params[i++];
  for (double& b : model.bias) b = params[i++];
}

FeatureVector standardize(const ClassifierModel& model, const FeatureVector& features) {
  FeatureVector z{};
  for (std::size_t j = 0; j < z.size(); ++j) z[j] = (features[j] - model.feature_mean[j]) / model.feature_std[j];
  return z;
}

Probabilities softmax(const Probabilities& logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  Probabilities p{};
  double sum = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    p[k] = std::exp(logits[k] - mx);
    sum += p[k];
  }
  for (double& v : p) v /= sum;
  return p;
}

Probabilities logits(const ClassifierModel& model, const FeatureVector& standardized) {
  Probabilities z{};
  for (std::size_t k = 0; k < z.size(); ++k) {
    double s = model.bias[k];
    for (std::size_t j = 0; j < standardized.size(); ++j) s += model.weights[k][j] * standardized[j];
    z[k] = s;
  }
  return z;
}

Probabilities softmax_forward(const ClassifierModel& model, const FeatureVector& features) {
  return softmax(logits(model, standardize(model, features)));
}

int argmax(const Probabilities& p) {
  // max_element returns the first maximum: ties go to the lower class.
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

int predict(const ClassifierModel& model, const Image& patch) {
  return argmax(softmax_forward(model, extract_features(patch)));
}

double batch_loss(const ParameterVector& params, std::span<const FeatureVector> standardized,
                  std::span<const int> labels, ParameterVector* gradient) {
  if (standardized.size() != labels.size() || standardized.empty()) {
    throw std::domain_error("batch_loss: features and labels must be non-empty and equal length");
  }
  if (gradient) gradient->fill(0.0);
  constexpr std::size_t kBiasOffset = static_cast<std::size_t>(kNumClasses) * kFeatureCount;
  double total = 0.0;
  for (std::size_t n = 0; n < standardized.size(); ++n) {
    const auto& x = standardized[n];
    Probabilities z{};
    for (std::size_t k = 0; k < z.size(); ++k) {
      double s = params[kBiasOffset + k];
      for (std::size_t j = 0; j < x.size(); ++j) s += params[k * kFeatureCount + j] * x[j];
      z[k] = s;
    }
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - mx);
    const double log_norm = mx + std::log(sum);
    const auto label = static_cast<std::size_t>(labels[n]);
    total += log_norm - z[label];
    if (gradient) {
      for (std::size_t k = 0; k < z.size(); ++k) {
        const double delta = std::exp(z[k] - log_norm) - (k == label ? 1.0 : 0.0);
        for (std::size_t j = 0; j < x.size(); ++j) (*gradient)[k * kFeatureCount + j] += delta * x[j];
        (*gradient)[kBiasOffset + k] += delta;
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(standardized.size());
  if (gradient) {
    for (double& g : *gradient) g *= inv;
  }
  return total * inv;
}

AdamOptimizer::AdamOptimizer(std::size_t parameter_count, const TrainConfig& config)
    : lr_(config.learning_rate),
      beta1_(config.beta1),
      beta2_(config.beta2),
      eps_(config.epsilon),
      m_(parameter_count, 0.0),
      v_(parameter_count, 0.0) {}

void AdamOptimizer::step(std::span<double> params, std::span<const double> gradient) {
  if (params.size() != m_.size() || gradient.size() != m_.size()) {
    throw std::domain_error("AdamOptimizer::step: size mismatch");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, t_);
  const double c2 = 1.0 - std::pow(beta2_, t_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * gradient[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * gradient[i] * gradient[i];
    const double m_hat = m_[i] / c1;
    const double v_hat = v_[i] / c2;
    params[i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
  }
}

void fit_standardization(ClassifierModel& model, std::span<const FeatureVector> features) {
  if (features.empty()) throw std::domain_error("fit_standardization: no features");
  const double n = static_cast<double>(features.size());
  for (std::size_t j = 0; j < kFeatureCount; ++j) {
    double s = 0.0;
    for (const auto& f : features) s += f[j];
    const double mu = s / n;
    double ss = 0.0;
    for (const auto& f : features) ss += (f[j] - mu) * (f[j] - mu);
    const double sd = std::sqrt(ss / n);
    model.feature_mean[j] = mu;
    model.feature_std[j] = sd > 0.0 ? sd : 1.0;
  }
}

namespace {

std::vector<FeatureVector> features_of(std::span<const PatchRecord> records) {
  std::vector<FeatureVector> out(records.size());
  parallel_for(0, static_cast<int>(records.size()), [&](int i) {
    out[static_cast<std::size_t>(i)] = extract_features(records[static_cast<std::size_t>(i)].pixels);
  });
  return out;
}

std::vector<int> labels_of(std::span<const PatchRecord> records) {
  std::vector<int> out(records.size());
  std::transform(records.begin(), records.end(), out.begin(), [](const PatchRecord& r) { return r.label; });
  return out;
}

struct LossAccuracy {
  double loss = 0.0;
  double accuracy = 0.0;
};

LossAccuracy measure(const ClassifierModel& model, std::span<const FeatureVector> standardized,
                     std::span<const int> labels) {
  if (standardized.empty()) return {};
  const ParameterVector params = flatten_parameters(model);
  LossAccuracy out;
  out.loss = batch_loss(params, standardized, labels);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < standardized.size(); ++i) {
    if (argmax(logits(model, standardized[i])) == labels[i]) ++correct;
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(standardized.size());
  return out;
}

}  // namespace

TrainResult train(const DatasetSplit& split, const TrainConfig& config) {
  if (split.train.empty()) throw std::domain_error("train: training split is empty");
  if (config.batch_size < 1) throw std::domain_error("train: batch_size must be >= 1");
  if (config.epochs < 0) throw std::domain_error("train: epochs must be >= 0");
  const std::vector<int> train_labels = labels_of(split.train);
  {
    std::array<bool, kNumClasses> seen{};
    for (int l : train_labels) seen[static_cast<std::size_t>(l)] = true;
    if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) {
      throw std::domain_error("train: not every blur level is present in the training split");
    }
  }
  const std::vector<int> val_labels = labels_of(split.validation);

  TrainResult result;
  ClassifierModel& model = result.model;
  model = ClassifierModel::zero();
  model.config = config;

  std::vector<FeatureVector> train_x = features_of(split.train);
  std::vector<FeatureVector> val_x = features_of(split.validation);
  fit_standardization(model, train_x);
  for (auto& f : train_x) f = standardize(model, f);
  for (auto& f : val_x) f = standardize(model, f);

  auto record_epoch = [&](int epoch) {
    const auto tr = measure(model, train_x, train_labels);
    const auto va = measure(model, val_x, val_labels);
    result.history.push_back(EpochStats{epoch, tr.loss, tr.accuracy, va.loss, va.accuracy});
  };
  record_epoch(0);

  ParameterVector params = flatten_parameters(model);
  ParameterVector grad{};
  AdamOptimizer adam(params.size(), config);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(train_x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<FeatureVector> batch_x;
  std::vector<int> batch_y;
  const auto batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[static_cast<std::size_t>(rng() % i)]);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      batch_x.clear();
      batch_y.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch_x.push_back(train_x[order[i]]);
        batch_y.push_back(train_labels[order[i]]);
      }
      const double loss = batch_loss(params, batch_x, batch_y, &grad);
      if (!std::isfinite(loss)) {
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch starting at " +
                                 std::to_string(start) + "; check learning rate and input features");
      }
      adam.step(params, grad);
    }
    assign_parameters(model, params);
    model.epochs_trained = epoch;
    record_epoch(epoch);
  }
  return result;
}

EvalReport evaluate_predictions(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size() || truth.empty()) {
    throw std::domain_error("evaluate: truth and predictions must be non-empty and equal length");
  }
  EvalReport r;
  r.total = static_cast<int>(truth.size());
  int correct = 0, near = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i], p = predicted[i];
    if (t < 0 || t >= kNumClasses || p < 0 || p >= kNumClasses) throw std::domain_error("evaluate: label out of range");
    ++r.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
    if (t == p) ++correct;
    if (std::abs(t - p) <= 2) ++near;
  }
  r.accuracy = static_cast<double>(correct) / r.total;
  r.within2_accuracy = static_cast<double>(near) / r.total;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    int predicted_k = 0, support = 0;
    for (std::size_t j = 0; j < kNumClasses; ++j) {
      predicted_k += r.confusion[j][k];
      support += r.confusion[k][j];
    }
    const int tp = r.confusion[k][k];
    auto& m = r.per_class[k];
    m.support = support;
    m.undefined = predicted_k == 0 || support == 0;
    m.precision = predicted_k > 0 ? static_cast<double>(tp) / predicted_k : 0.0;
    m.recall = support > 0 ? static_cast<double>(tp) / support : 0.0;
    m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  }
  return r;
}

EvalReport evaluate(const ClassifierModel& model, std::span<const PatchRecord> records) {
  if (records.empty()) throw std::domain_error("evaluate: no records");
  std::vector<int> predicted(records.size());
  parallel_for(0, static_cast<int>(records.size()), [&](int i) {
    predicted[static_cast<std::size_t>(i)] = predict(model, records[static_cast<std::size_t>(i)].pixels);
  });
  return evaluate_predictions(labels_of(records), predicted);
}

std::string model_to_json(const ClassifierModel& model) {
  json j;
  j["format"] = "defocus-softmax";
  j["version"] = 1;
  j["num_classes"] = kNumClasses;
  j["num_features"] = kFeatureCount;
  j["feature_mean"] = model.feature_mean;
  j["feature_std"] = model.feature_std;
  j["weights"] = model.weights;
  j["bias"] = model.bias;
  j["epochs_trained"] = model.epochs_trained;
  j["metadata"] = {{"batch_size", model.config.batch_size},
                   {"learning_rate", model.config.learning_rate},
                   {"beta1", model.config.beta1},
                   {"beta2", model.config.beta2},
                   {"epsilon", model.config.epsilon},
                   {"epochs", model.config.epochs},
                   {"seed", model.config.seed}};
  return j.dump(2) + "\n";
}

ClassifierModel model_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("num_classes").get<int>() != kNumClasses || j.at("num_features").get<int>() != kFeatureCount) {
      throw std::runtime_error("model file has unexpected dimensions");
    }
    ClassifierModel m;
    m.feature_mean = j.at("feature_mean").get<FeatureVector>();
    m.feature_std = j.at("feature_std").get<FeatureVector>();
    m.weights = j.at("weights").get<decltype(m.weights)>();
    m.bias = j.at("bias").get<decltype(m.bias)>();
    m.epochs_trained = j.at("epochs_trained").get<int>();
    const auto& meta = j.at("metadata");
    m.config.batch_size = meta.at("batch_size").get<int>();
    m.config.learning_rate = meta.at("learning_rate").get<double>();
    m.config.beta1 = meta.at("beta1").get<double>();
    m.config.beta2 = meta.at("beta2").get<double>();
    m.config.epsilon = meta.at("epsilon").get<double>();
    m.config.epochs = meta.at("epochs").get<int>();
    m.config.seed = meta.at("seed").get<std::uint64_t>();
    for (double s : m.feature_std) {
      if (!(s > 0.0)) throw std::runtime_error("feature_std must be positive");
    }
    return m;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("invalid model JSON: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const ClassifierModel& model) {
  write_file_atomic(path, model_to_json(model));
}

ClassifierModel load_model(const std::filesystem::path& path) { return model_from_json(read_file(path)); }

std::string report_to_json(const EvalReport& report) {
  json j;
  j["accuracy"] = report.accuracy;
  j["within2_accuracy"] = report.within2_accuracy;
  j["total"] = report.total;
  j["per_class"] = json::array();
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    const auto& m = report.per_class[k];
    j["per_class"].push_back({{"label", k},
                              {"precision", m.precision},
                              {"recall", m.recall},
                              {"f1", m.f1},
                              {"support", m.support},
                              {"undefined", m.undefined}});
  }
  j["confusion"] = report.confusion;
  return j.dump(2) + "\n";
}

std::string history_to_json(const std::vector<EpochStats>& history) {
  json j = json::array();
  for (const auto& e : history) {
    j.push_back({{"epoch", e.epoch},
                 {"train_loss", e.train_loss},
                 {"train_accuracy", e.train_accuracy},
                 {"validation_loss", e.validation_loss},
                 {"validation_accuracy", e.validation_accuracy}});
  }
  return j.dump(2) + "\n";
}

}  // namespace defocus
