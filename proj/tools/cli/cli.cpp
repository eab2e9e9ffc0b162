#include "cli.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "defocus/apps.hpp"
#include "defocus/blurmap.hpp"
#include "defocus/classifier.hpp"
#include "defocus/dataset.hpp"
#include "defocus/filters.hpp"
#include "defocus/io.hpp"
#include "defocus/parallel.hpp"
#include "defocus/predictor.hpp"
#include "defocus/refine.hpp"
#include "json.hpp"

namespace defocus::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// Bad flag values discovered after parsing; reported with exit code 2.
struct ArgumentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

std::string file_digest(const fs::path& path) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : read_file(path)) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return hex64(h);
}

struct Globals {
  int threads = 0;
  std::uint64_t seed = 0;
  std::string debug_dir;
  bool verbose = false;
};

class Summary {
 public:
  explicit Summary(std::string command) { j_["command"] = std::move(command); }
  json& operator[](const char* key) { return j_[key]; }
  void output(const fs::path& p) { j_["outputs"][p.string()] = file_digest(p); }
  json& root() { return j_; }

 private:
  json j_;
};

// Wraps a library precondition failure so the message names the flags.
template <typename Fn>
void check_params(const std::string& flags, Fn&& fn) {
  try {
    fn();
  } catch (const std::domain_error& e) {
    throw ArgumentError(flags + ": " + e.what());
  }
}

class DebugSink {
 public:
  DebugSink(const std::string& dir, Summary& summary) : dir_(dir), summary_(summary) {
    if (!dir_.empty()) fs::create_directories(dir_);
  }
  bool enabled() const { return !dir_.empty(); }
  void map(const std::string& name, const Image& m) {
    if (!enabled()) return;
    const fs::path p = dir_ / (name + ".pgm16");
    write_map_pgm16(p, m);
    summary_["debug"][p.string()] = file_digest(p);
  }
  void image(const std::string& name, const Image& img) {
    if (!enabled()) return;
    const fs::path p = dir_ / (name + ".png");
    write_png(p, clamp(img, 0.0, 1.0));
    summary_["debug"][p.string()] = file_digest(p);
  }

 private:
  fs::path dir_;
  Summary& summary_;
};

struct BackendOptions {
  std::string model;
  std::string predictions;
};

void add_backend_options(CLI::App* sub, BackendOptions& b) {
  auto* m = sub->add_option("--model", b.model, "Trained classifier (model.json)")->check(CLI::ExistingFile);
  auto* p = sub->add_option("--predictions", b.predictions,
                            "CSV source_id,x,y,label with external patch predictions; source_id is the input file name")
                ->check(CLI::ExistingFile);
  m->excludes(p);
  p->excludes(m);
}

std::unique_ptr<PatchPredictor> make_backend(const BackendOptions& b) {
  if (!b.model.empty()) return std::make_unique<ModelPredictor>(load_model(b.model));
  if (!b.predictions.empty()) return std::make_unique<FilePredictor>(FilePredictor::from_csv(b.predictions));
  throw ArgumentError("--model or --predictions is required");
}

struct RefineFlags {
  GuidedFilterParams guidance;
  int map_passes = 1;
  double lambda_w = kDefaultEdgeRegularizer;
};

void add_refine_options(CLI::App* sub, RefineFlags& f, const std::string& prefix) {
  sub->add_option("--" + prefix + "r", f.guidance.radius, "Guided-filter radius (published setting)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub->add_option("--" + prefix + "eps", f.guidance.epsilon, "Guided-filter regularization on unit range (published setting)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub->add_option("--" + prefix + "iters", f.guidance.iterations,
                  "Self-guided passes building the guidance image (published setting)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub->add_option("--" + prefix + "passes", f.map_passes, "Filtering passes applied to the map itself (desk choice)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub->add_option("--" + prefix + "lambda-w", f.lambda_w, "Variance regularizer inside the edge-aware weight (desk choice)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
}

RefineOptions to_refine_options(const RefineFlags& f, const std::string& prefix) {
  check_params("--" + prefix + "r/--" + prefix + "eps/--" + prefix + "iters", [&] { f.guidance.validate(); });
  RefineOptions o;
  o.guidance = f.guidance;
  o.map_passes = f.map_passes;
  o.lambda_w = f.lambda_w;
  return o;
}

json params_json(const GuidedFilterParams& p) {
  return json{{"r", p.radius}, {"eps", p.epsilon}, {"iters", p.iterations}};
}

// Map for an application: a supplied map file, or estimate + refine.
Image application_map(const std::string& map_path, const Image& img, const std::string& source_id,
                      const BackendOptions& backend, int step, const RefineFlags& refine, Summary& summary,
                      DebugSink& debug) {
  if (!map_path.empty()) {
    summary["inputs"]["map"] = map_path;
    const BlurMap m = load_blur_map(map_path);
    if (!m.values.same_size(img)) throw ArgumentError("--map: size does not match the input image");
    return m.values;
  }
  const auto predictor = make_backend(backend);
  const RefineOptions options = to_refine_options(refine, "refine-");
  const BlurMap raw = estimate_map(img, *predictor, step, source_id);
  debug.map("map_raw", raw.values);
  const RefinedMap refined = refine_map(raw, img, options);
  debug.map("map_refined", refined.values);
  summary["params"]["step"] = step;
  summary["params"]["backend"] = raw.backend_id;
  summary["params"]["refine"] = params_json(options.guidance);
  return refined.values;
}

// Subcommand handlers are registered here and run after a successful parse.
struct Command {
  CLI::App* app;
  std::function<void(Summary&)> action;
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Defocus blur-map estimation, refinement and map-driven image applications", "defocus"};
  app.fallthrough();
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file with option values; explicit flags take precedence");

  Globals g;
  app.add_option("--threads", g.threads, "Worker threads (0 = all available cores); output does not depend on it")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  app.add_option("--seed", g.seed, "Global seed for dataset splits and training order")->capture_default_str();
  app.add_option("--debug-dir", g.debug_dir, "Directory for intermediate maps and images");
  app.add_flag("-v,--verbose", g.verbose, "Print progress to stderr");

  std::vector<Command> commands;

  // corpus
  struct {
    std::string output;
    int count = 20;
    int size = 512;
  } corpus_opt;
  {
    auto* sub = app.add_subcommand("corpus", "Write the bundled procedural texture corpus as PNG files");
    sub->add_option("--output", corpus_opt.output, "Output directory")->required();
    sub->add_option("--count", corpus_opt.count, "Number of textures")->capture_default_str()->check(CLI::Range(1, 1000));
    sub->add_option("--size", corpus_opt.size, "Texture side length in pixels")
        ->capture_default_str()
        ->check(CLI::Range(kPatchSize, 8192));
    commands.push_back({sub, [&](Summary& s) {
                          fs::create_directories(corpus_opt.output);
                          s["params"] = {{"count", corpus_opt.count}, {"size", corpus_opt.size}};
                          for (const auto& [id, img] : desk_corpus(corpus_opt.count, corpus_opt.size)) {
                            const fs::path p = fs::path(corpus_opt.output) / id;
                            write_png(p, img);
                            s.output(p);
                          }
                        }});
  }

  // dataset generate
  struct {
    std::string input;
    std::string output;
    double threshold = kDefaultSharpnessThreshold;
    double noise = 0.0;
    std::vector<double> ratios{0.72, 0.18, 0.10};
    int desk_count = 20;
    int desk_size = 512;
  } ds_opt;
  {
    auto* dataset = app.add_subcommand("dataset", "Dataset operations");
    dataset->require_subcommand(1);
    auto* sub = dataset->add_subcommand("generate", "Mine sharp patches and synthesize the 20 blur classes");
    sub->add_option("--input", ds_opt.input, "Directory of source images (default: bundled texture corpus)")
        ->check(CLI::ExistingDirectory);
    sub->add_option("--output", ds_opt.output, "Output dataset directory")->required();
    sub->add_option("--threshold", ds_opt.threshold, "Sharpness threshold on the 0-255 scale (published setting)")
        ->capture_default_str();
    sub->add_option("--noise", ds_opt.noise, "Gaussian noise std added after blurring (desk choice)")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--ratios", ds_opt.ratios, "Train/validation/test ratios (published proportions)")
        ->expected(3)
        ->capture_default_str();
    sub->add_option("--desk-count", ds_opt.desk_count, "Textures used when --input is omitted")
        ->capture_default_str()
        ->check(CLI::Range(1, 1000));
    sub->add_option("--desk-size", ds_opt.desk_size, "Texture size used when --input is omitted")
        ->capture_default_str()
        ->check(CLI::Range(kPatchSize, 8192));
    commands.push_back({sub, [&](Summary& s) {
                          std::vector<std::pair<std::string, Image>> sources;
                          if (ds_opt.input.empty()) {
                            sources = desk_corpus(ds_opt.desk_count, ds_opt.desk_size);
                            s["inputs"]["corpus"] = "bundled";
                          } else {
                            sources = load_image_directory(ds_opt.input);
                            s["inputs"]["corpus"] = ds_opt.input;
                            if (sources.empty()) throw std::runtime_error("--input: no .png/.pgm images found");
                          }
                          GenerateOptions o;
                          o.threshold = ds_opt.threshold;
                          o.noise_std = ds_opt.noise;
                          o.seed = g.seed;
                          o.ratios = SplitRatios{ds_opt.ratios[0], ds_opt.ratios[1], ds_opt.ratios[2]};
                          DatasetSplit split;
                          check_params("--ratios", [&] { split = generate_dataset(sources, o); });
                          save_dataset(ds_opt.output, split);
                          s["params"] = {{"threshold", o.threshold}, {"noise", o.noise_std}, {"seed", o.seed},
                                         {"ratios", ds_opt.ratios}};
                          s["result"] = {{"train", split.train.size()},
                                         {"validation", split.validation.size()},
                                         {"test", split.test.size()}};
                          for (const char* f : {"manifest.json", "train.bin", "validation.bin", "test.bin"}) {
                            s.output(fs::path(ds_opt.output) / f);
                          }
                        }});
  }

  // train
  struct {
    std::string dataset;
    std::string out;
    std::string history;
    TrainConfig cfg;
  } train_opt;
  {
    auto* sub = app.add_subcommand("train", "Train the softmax blur-level classifier with Adam");
    sub->add_option("--dataset", train_opt.dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    sub->add_option("--out", train_opt.out, "Output model.json")->required();
    sub->add_option("--history", train_opt.history, "Optional per-epoch loss/accuracy JSON");
    sub->add_option("--epochs", train_opt.cfg.epochs, "Training epochs (desk-scale default)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_option("--batch", train_opt.cfg.batch_size, "Mini-batch size (published setting)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_option("--lr", train_opt.cfg.learning_rate, "Adam learning rate (published setting)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    commands.push_back({sub, [&](Summary& s) {
                          const DatasetSplit split = load_dataset(train_opt.dataset);
                          train_opt.cfg.seed = g.seed;
                          TrainResult result;
                          check_params("--dataset", [&] { result = train(split, train_opt.cfg); });
                          save_model(train_opt.out, result.model);
                          s["inputs"]["dataset"] = train_opt.dataset;
                          s["params"] = {{"epochs", train_opt.cfg.epochs},
                                         {"batch", train_opt.cfg.batch_size},
                                         {"lr", train_opt.cfg.learning_rate},
                                         {"seed", train_opt.cfg.seed}};
                          const EpochStats& last = result.history.back();
                          s["result"] = {{"train_loss", last.train_loss},
                                         {"train_accuracy", last.train_accuracy},
                                         {"validation_loss", last.validation_loss},
                                         {"validation_accuracy", last.validation_accuracy}};
                          s.output(train_opt.out);
                          if (!train_opt.history.empty()) {
                            write_file_atomic(train_opt.history, history_to_json(result.history));
                            s.output(train_opt.history);
                          }
                        }});
  }

  // evaluate
  struct {
    std::string dataset;
    std::string model;
    std::string report;
    std::string split = "test";
  } eval_opt;
  {
    auto* sub = app.add_subcommand("evaluate", "Evaluate a model on a dataset split");
    sub->add_option("--dataset", eval_opt.dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    sub->add_option("--model", eval_opt.model, "model.json")->required()->check(CLI::ExistingFile);
    sub->add_option("--report", eval_opt.report, "Output report JSON")->required();
    sub->add_option("--split", eval_opt.split, "Split to evaluate")
        ->capture_default_str()
        ->check(CLI::IsMember({"train", "validation", "test"}));
    commands.push_back({sub, [&](Summary& s) {
                          const DatasetSplit split = load_dataset(eval_opt.dataset);
                          const auto& records = eval_opt.split == "train"        ? split.train
                                                : eval_opt.split == "validation" ? split.validation
                                                                                 : split.test;
                          if (records.empty()) throw ArgumentError("--split: split '" + eval_opt.split + "' is empty");
                          const EvalReport report = evaluate(load_model(eval_opt.model), records);
                          write_file_atomic(eval_opt.report, report_to_json(report));
                          s["inputs"] = {{"dataset", eval_opt.dataset}, {"model", eval_opt.model}};
                          s["params"] = {{"split", eval_opt.split}};
                          s["result"] = {{"accuracy", report.accuracy},
                                         {"within2_accuracy", report.within2_accuracy},
                                         {"total", report.total}};
                          s.output(eval_opt.report);
                        }});
  }

  // map
  struct {
    std::string input;
    std::string out;
    int step = kDefaultStep;
    BackendOptions backend;
  } map_opt;
  {
    auto* sub = app.add_subcommand("map", "Estimate a dense blur map with sliding 32x32 windows");
    sub->add_option("--input", map_opt.input, "Input image")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", map_opt.out, "Output map (.pgm16, sidecar .json written next to it)")->required();
    sub->add_option("--step", map_opt.step, "Window step in pixels (published setting)")
        ->capture_default_str()
        ->check(CLI::Range(1, kPatchSize));
    add_backend_options(sub, map_opt.backend);
    commands.push_back({sub, [&](Summary& s) {
                          const auto predictor = make_backend(map_opt.backend);
                          const Image img = read_image(map_opt.input);
                          const std::string id = fs::path(map_opt.input).filename().string();
                          BlurMap m;
                          check_params("--input", [&] { m = estimate_map(img, *predictor, map_opt.step, id); });
                          save_blur_map(map_opt.out, m);
                          s["inputs"]["image"] = map_opt.input;
                          s["params"] = {{"step", map_opt.step}, {"backend", m.backend_id}};
                          s["result"] = {{"min", min_value(m.values)}, {"max", max_value(m.values)}};
                          s.output(map_opt.out);
                          s.output(sidecar_path(map_opt.out));
                        }});
  }

  // classical-map
  struct {
    std::string input;
    std::string out;
    std::string method = "var_laplacian";
    int window = 16;
  } cm_opt;
  {
    auto* sub = app.add_subcommand("classical-map", "Baseline sharpness map from a local statistic");
    sub->add_option("--input", cm_opt.input, "Input image")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", cm_opt.out, "Output image, values scaled by the map maximum")->required();
    sub->add_option("--method", cm_opt.method, "Local statistic")
        ->capture_default_str()
        ->check(CLI::IsMember({"entropy", "stddev", "var_laplacian"}));
    sub->add_option("--window", cm_opt.window, "Window side in pixels")->capture_default_str()->check(CLI::PositiveNumber);
    commands.push_back({sub, [&](Summary& s) {
                          const Image img = read_image(cm_opt.input);
                          Image m = classical_map(img, parse_classical_method(cm_opt.method), cm_opt.window);
                          const double hi = max_value(m);
                          const double lo = min_value(m);
                          if (hi > 0.0)
                            for (double& v : m.data()) v /= hi;
                          write_image(cm_opt.out, m);
                          s["inputs"]["image"] = cm_opt.input;
                          s["params"] = {{"method", cm_opt.method}, {"window", cm_opt.window}};
                          s["result"] = {{"min", lo}, {"max", hi}};
                          s.output(cm_opt.out);
                        }});
  }

  // refine
  struct {
    std::string map;
    std::string image;
    std::string out;
    RefineFlags flags;
  } refine_opt;
  {
    auto* sub = app.add_subcommand("refine", "Edge-aware refinement of a blur map");
    sub->add_option("--map", refine_opt.map, "Input map (.pgm16)")->required()->check(CLI::ExistingFile);
    sub->add_option("--image", refine_opt.image, "Image the map was estimated from")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", refine_opt.out, "Output refined map (.pgm16)")->required();
    add_refine_options(sub, refine_opt.flags, "");
    commands.push_back({sub, [&](Summary& s) {
                          const RefineOptions options = to_refine_options(refine_opt.flags, "");
                          const BlurMap m = load_blur_map(refine_opt.map);
                          const Image img = read_image(refine_opt.image);
                          if (!m.values.same_size(img)) throw ArgumentError("--map/--image: sizes differ");
                          DebugSink debug(g.debug_dir, s);
                          if (debug.enabled()) debug.image("guidance", make_guidance(to_grayscale(img), options.guidance, options.lambda_w));
                          const RefinedMap refined = refine_map(m, img, options);
                          BlurMap out_map = m;
                          out_map.values = refined.values;
                          save_blur_map(refine_opt.out, out_map);
                          s["inputs"] = {{"map", refine_opt.map}, {"image", refine_opt.image}};
                          s["params"] = params_json(options.guidance);
                          s["params"]["passes"] = options.map_passes;
                          s["params"]["lambda_w"] = options.lambda_w;
                          s["result"] = {{"guidance_hash", hex64(refined.guidance_hash)}};
                          s.output(refine_opt.out);
                          s.output(sidecar_path(refine_opt.out));
                        }});
  }

  // binary
  struct {
    std::string map;
    std::string out;
    double lambda = 4.0;
  } bin_opt;
  {
    auto* sub = app.add_subcommand("binary", "Threshold a map into in-focus (0) / out-of-focus (1)");
    sub->add_option("--map", bin_opt.map, "Input map (.pgm16)")->required()->check(CLI::ExistingFile);
    sub->add_option("--lambda", bin_opt.lambda, "Blur-level threshold (published setting)")->capture_default_str();
    sub->add_option("--out", bin_opt.out, "Output mask (.pgm or .png)")->required();
    commands.push_back({sub, [&](Summary& s) {
                          const BlurMap m = load_blur_map(bin_opt.map);
                          Image mask;
                          check_params("--lambda", [&] { mask = binary_map(m.values, bin_opt.lambda); });
                          write_image(bin_opt.out, mask);
                          s["inputs"]["map"] = bin_opt.map;
                          s["params"] = {{"lambda", bin_opt.lambda}};
                          s["result"] = {{"out_of_focus_fraction", mean(mask)}};
                          s.output(bin_opt.out);
                        }});
  }

  // enhance
  struct {
    std::string input;
    std::string map;
    std::string out;
    int step = kDefaultStep;
    GainParams gain;
    double unsharp_sigma = kDefaultUnsharpSigma;
    BackendOptions backend;
    RefineFlags refine;
  } enh_opt;
  {
    auto* sub = app.add_subcommand("enhance", "Blur-adaptive unsharp masking");
    sub->add_option("--input", enh_opt.input, "Input image")->required()->check(CLI::ExistingFile);
    sub->add_option("--map", enh_opt.map, "Precomputed blur map (.pgm16); skips estimation")->check(CLI::ExistingFile);
    sub->add_option("--out", enh_opt.out, "Output image")->required();
    sub->add_option("--step", enh_opt.step, "Window step for map estimation (published setting)")
        ->capture_default_str()
        ->check(CLI::Range(1, kPatchSize));
    sub->add_option("--a1", enh_opt.gain.alpha1, "Rising sigmoid slope (published setting)")->capture_default_str();
    sub->add_option("--b1", enh_opt.gain.beta1, "Rising sigmoid midpoint, normalized level (published setting)")
        ->capture_default_str();
    sub->add_option("--a2", enh_opt.gain.alpha2, "Falling sigmoid slope (published setting)")->capture_default_str();
    sub->add_option("--b2", enh_opt.gain.beta2, "Falling sigmoid midpoint, normalized level (published setting)")
        ->capture_default_str();
    sub->add_option("--lmax", enh_opt.gain.lambda_max, "Maximum gain (published setting)")->capture_default_str();
    sub->add_option("--um-sigma", enh_opt.unsharp_sigma, "Unsharp-mask base blur sigma (desk choice)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    add_backend_options(sub, enh_opt.backend);
    add_refine_options(sub, enh_opt.refine, "refine-");
    commands.push_back({sub, [&](Summary& s) {
                          check_params("--a1/--b1/--a2/--b2/--lmax", [&] { enh_opt.gain.validate(); });
                          const Image img = read_image(enh_opt.input);
                          DebugSink debug(g.debug_dir, s);
                          const Image m = application_map(enh_opt.map, img, fs::path(enh_opt.input).filename().string(),
                                                          enh_opt.backend, enh_opt.step, enh_opt.refine, s, debug);
                          const Image gain = gain_map(m, enh_opt.gain);
                          if (debug.enabled()) {
                            Image scaled = gain;
                            for (double& v : scaled.data()) v /= enh_opt.gain.lambda_max;
                            debug.image("gain", scaled);
                          }
                          const Image out_img = unsharp_mask(img, gain, enh_opt.unsharp_sigma);
                          write_image(enh_opt.out, out_img);
                          s["inputs"]["image"] = enh_opt.input;
                          s["params"]["a1"] = enh_opt.gain.alpha1;
                          s["params"]["b1"] = enh_opt.gain.beta1;
                          s["params"]["a2"] = enh_opt.gain.alpha2;
                          s["params"]["b2"] = enh_opt.gain.beta2;
                          s["params"]["lmax"] = enh_opt.gain.lambda_max;
                          s["params"]["um_sigma"] = enh_opt.unsharp_sigma;
                          s.output(enh_opt.out);
                        }});
  }

  // sdof
  struct {
    std::string input;
    std::string map;
    std::string out;
    int step = kDefaultStep;
    SDoFParams params;
    BackendOptions backend;
    RefineFlags refine;
  } sdof_opt;
  {
    auto* sub = app.add_subcommand("sdof", "Shallow depth-of-field rendering from the blur map");
    sub->add_option("--input", sdof_opt.input, "Input image")->required()->check(CLI::ExistingFile);
    sub->add_option("--map", sdof_opt.map, "Precomputed blur map (.pgm16); skips estimation")->check(CLI::ExistingFile);
    sub->add_option("--out", sdof_opt.out, "Output image")->required();
    sub->add_option("--step", sdof_opt.step, "Window step for map estimation (published setting)")
        ->capture_default_str()
        ->check(CLI::Range(1, kPatchSize));
    sub->add_option("--c0", sdof_opt.params.c0, "In-focus anchor level (published setting)")->capture_default_str();
    sub->add_option("--c1", sdof_opt.params.c1, "Out-of-focus anchor level (published setting)")->capture_default_str();
    sub->add_option("--w0", sdof_opt.params.w0, "Weight at --c0 (published setting)")->capture_default_str();
    sub->add_option("--w1", sdof_opt.params.w1, "Weight at --c1 (published setting)")->capture_default_str();
    sub->add_option("--smooth-r", sdof_opt.params.smooth.radius, "Background smoothing radius (published setting)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_option("--smooth-eps", sdof_opt.params.smooth.epsilon,
                    "Background smoothing regularization, unit range (published 128 on 8-bit scale)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_option("--smooth-iters", sdof_opt.params.smooth.iterations, "Self-guided smoothing passes (published setting)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_option("--sharpen", sdof_opt.params.sharpen_lambda, "Foreground unsharp-mask gain (desk choice)")
        ->capture_default_str();
    add_backend_options(sub, sdof_opt.backend);
    add_refine_options(sub, sdof_opt.refine, "refine-");
    commands.push_back({sub, [&](Summary& s) {
                          SDoFWeights solved;
                          check_params("--c0/--c1/--w0/--w1", [&] {
                            sdof_opt.params.validate();
                            solved = solve_sdof_weights(sdof_opt.params);
                          });
                          const Image img = read_image(sdof_opt.input);
                          DebugSink debug(g.debug_dir, s);
                          const Image m = application_map(sdof_opt.map, img, fs::path(sdof_opt.input).filename().string(),
                                                          sdof_opt.backend, sdof_opt.step, sdof_opt.refine, s, debug);
                          const SDoFResult r = sdof(img, m, sdof_opt.params);
                          debug.image("weight", r.weight);
                          debug.image("smoothed", r.smoothed);
                          debug.image("sharpened", r.sharpened);
                          write_image(sdof_opt.out, r.output);
                          s["inputs"]["image"] = sdof_opt.input;
                          s["params"]["c0"] = sdof_opt.params.c0;
                          s["params"]["c1"] = sdof_opt.params.c1;
                          s["params"]["w0"] = sdof_opt.params.w0;
                          s["params"]["w1"] = sdof_opt.params.w1;
                          s["params"]["smooth"] = params_json(sdof_opt.params.smooth);
                          s["params"]["sharpen"] = sdof_opt.params.sharpen_lambda;
                          s["result"] = {{"sigma", solved.sigma}, {"gamma", solved.gamma}};
                          s.output(sdof_opt.out);
                        }});
  }

  // fuse
  struct {
    std::vector<std::string> inputs;
    std::vector<std::string> maps;
    std::string out;
    FusionParams params;
    BackendOptions backend;
    RefineFlags refine;
  } fuse_opt;
  {
    auto* sub = app.add_subcommand("fuse", "Multi-focus fusion driven by per-input blur maps");
    sub->add_option("--inputs", fuse_opt.inputs, "Registered input images (two or more)")
        ->required()
        ->expected(2, 64)
        ->check(CLI::ExistingFile);
    sub->add_option("--maps", fuse_opt.maps, "Precomputed maps, one per input; skips estimation")
        ->expected(2, 64)
        ->check(CLI::ExistingFile);
    sub->add_option("--out", fuse_opt.out, "Output image")->required();
    sub->add_option("--step", fuse_opt.params.step, "Window step for map estimation (published setting)")
        ->capture_default_str()
        ->check(CLI::Range(1, kPatchSize));
    sub->add_option("--r", fuse_opt.params.gf_radius, "Decision-map guided-filter radius (published setting)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_option("--eps", fuse_opt.params.gf_epsilon, "Decision-map guided-filter regularization (published setting)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_option("--delta", fuse_opt.params.delta, "Weight regularizer (desk choice)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    add_backend_options(sub, fuse_opt.backend);
    add_refine_options(sub, fuse_opt.refine, "refine-");
    commands.push_back({sub, [&](Summary& s) {
                          check_params("--r/--eps/--delta/--step", [&] { fuse_opt.params.validate(); });
                          if (!fuse_opt.maps.empty() && fuse_opt.maps.size() != fuse_opt.inputs.size()) {
                            throw ArgumentError("--maps: expected one map per input");
                          }
                          DebugSink debug(g.debug_dir, s);
                          std::vector<Image> images, maps;
                          for (std::size_t i = 0; i < fuse_opt.inputs.size(); ++i) {
                            images.push_back(read_image(fuse_opt.inputs[i]));
                            if (i > 0 && !images[i].same_size(images[0])) {
                              throw ArgumentError("--inputs: images must share one size");
                            }
                            DebugSink none("", s);
                            maps.push_back(application_map(fuse_opt.maps.empty() ? std::string{} : fuse_opt.maps[i],
                                                           images[i],
                                                           fs::path(fuse_opt.inputs[i]).filename().string(),
                                                           fuse_opt.backend, fuse_opt.params.step, fuse_opt.refine, s,
                                                           none));
                            debug.map("map_" + std::to_string(i), maps.back());
                          }
                          s["inputs"]["images"] = fuse_opt.inputs;
                          const FusionResult r = fuse(images, maps, fuse_opt.params);
                          for (std::size_t i = 0; i < r.weights.size(); ++i) {
                            debug.image("decision_" + std::to_string(i), r.decisions[i]);
                            debug.image("weight_" + std::to_string(i), r.weights[i]);
                          }
                          write_image(fuse_opt.out, r.fused);
                          s["params"]["r"] = fuse_opt.params.gf_radius;
                          s["params"]["eps"] = fuse_opt.params.gf_epsilon;
                          s["params"]["delta"] = fuse_opt.params.delta;
                          s["params"]["step"] = fuse_opt.params.step;
                          s.output(fuse_opt.out);
                        }});
  }

  // coc
  LensConfig lens;
  {
    auto* sub = app.add_subcommand("coc", "Circle-of-confusion diameter for a thin lens");
    sub->add_option("--focal-length", lens.focal_length, "Focal length f")->required();
    sub->add_option("--aperture", lens.aperture_diameter, "Aperture diameter A")->required();
    sub->add_option("--focus-distance", lens.focus_distance, "Focused distance S1")->required();
    sub->add_option("--object-distance", lens.object_distance, "Object distance S2")->required();
    commands.push_back({sub, [&](Summary& s) {
                          double d = 0.0;
                          check_params("--focal-length/--aperture/--focus-distance/--object-distance",
                                       [&] { d = coc_diameter(lens); });
                          s["params"] = {{"focal_length", lens.focal_length},
                                         {"aperture", lens.aperture_diameter},
                                         {"focus_distance", lens.focus_distance},
                                         {"object_distance", lens.object_distance}};
                          s["result"] = {{"diameter", d}};
                        }});
  }

  // predict-runtime
  struct {
    double seconds_per_patch = 0.0;
    double pixels = 0.0;
    int step = kDefaultStep;
  } rt_opt;
  {
    auto* sub = app.add_subcommand("predict-runtime", "Estimated map time: T * N / step^2");
    sub->add_option("--seconds-per-patch", rt_opt.seconds_per_patch, "Classifier time per patch T")->required();
    sub->add_option("--pixels", rt_opt.pixels, "Image pixel count N")->required();
    sub->add_option("--step", rt_opt.step, "Window step")->capture_default_str()->check(CLI::PositiveNumber);
    commands.push_back({sub, [&](Summary& s) {
                          double t = 0.0;
                          check_params("--seconds-per-patch/--pixels/--step",
                                       [&] { t = predict_runtime(rt_opt.seconds_per_patch, rt_opt.pixels, rt_opt.step); });
                          s["params"] = {{"seconds_per_patch", rt_opt.seconds_per_patch},
                                         {"pixels", rt_opt.pixels},
                                         {"step", rt_opt.step}};
                          s["result"] = {{"seconds", t}};
                        }});
  }

  // CLI11 wants argv order with the program name first.
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  const Command* chosen = nullptr;
  for (const auto& c : commands) {
    if (c.app->parsed()) chosen = &c;
  }
  if (chosen == nullptr) {
    err << "no subcommand given\n";
    return 2;
  }

  std::string name = chosen->app->get_name();
  if (chosen->app->get_parent() != &app) name = chosen->app->get_parent()->get_name() + " " + name;
  Summary summary(name);
  const int previous_threads = thread_count();
  set_thread_count(g.threads);
  const auto start = std::chrono::steady_clock::now();
  int code = 0;
  try {
    chosen->action(summary);
  } catch (const ArgumentError& e) {
    err << "defocus " << name << ": " << e.what() << "\n";
    code = 2;
  } catch (const std::domain_error& e) {
    err << "defocus " << name << ": invalid argument: " << e.what() << "\n";
    code = 2;
  } catch (const std::exception& e) {
    err << "defocus " << name << ": " << e.what() << "\n";
    code = 1;
  }
  set_thread_count(previous_threads);
  if (code != 0) return code;
  summary["threads"] = g.threads;
  summary["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out << summary.root().dump() << "\n";
  return 0;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace defocus::cli
