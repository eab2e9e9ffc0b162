#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "defocus/apps.hpp"
#include "defocus/blurmap.hpp"
#include "defocus/classifier.hpp"
#include "defocus/dataset.hpp"
#include "defocus/filters.hpp"
#include "defocus/io.hpp"
#include "defocus/parallel.hpp"
#include "defocus/refine.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "scratch.hpp"

using namespace defocus;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, bool ok, const std::string& what, const std::string& measured) {
  std::printf("%s criterion %2d: %s [%s]\n", ok ? "PASS" : "FAIL", id, what.c_str(), measured.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

std::string fmt(const char* f, double a, double b, double c) {
  char buf[200];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double max_abs_diff(const Image& a, const Image& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

double lap_variance(const Image& img, int x0, int x1) {
  const Image l = oracle::laplacian(img);
  double m = 0.0, s = 0.0;
  const int n = (x1 - x0) * img.height();
  for (int y = 0; y < img.height(); ++y)
    for (int x = x0; x < x1; ++x) m += l.at(x, y);
  m /= n;
  for (int y = 0; y < img.height(); ++y)
    for (int x = x0; x < x1; ++x) s += (l.at(x, y) - m) * (l.at(x, y) - m);
  return s / n;
}

// 1. Desk-scale classifier accuracy and runtime.
void criterion1() {
  const int before = thread_count();
  set_thread_count(1);
  const auto t0 = Clock::now();
  const auto corpus = desk_corpus(20, 512);
  GenerateOptions opt;
  opt.seed = 7;
  const DatasetSplit split = generate_dataset(corpus, opt);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.seed = 7;
  const TrainResult trained = train(split, cfg);
  const EvalReport rep = evaluate(trained.model, split.test);
  const double elapsed = seconds_since(t0);
  set_thread_count(before);
  const std::size_t records = split.train.size() + split.validation.size() + split.test.size();
  const bool ok = records >= 2000 && rep.accuracy >= 0.60 && rep.within2_accuracy >= 0.90 && elapsed < 60.0;
  report(1, ok, "desk classifier: >=2000 records, top-1 >= 0.60, within-2 >= 0.90, < 60 s single-threaded",
         std::to_string(records) + " records, " + fmt("top-1 %.4f, within-2 %.4f, %.1f s", rep.accuracy,
                                                       rep.within2_accuracy, elapsed));
}

// 2. Sliding-window aggregation against brute-force enumeration.
void criterion2() {
  const auto t0 = Clock::now();
  auto level = [](int x, int y) { return (x * 7 + y * 13 + (x ^ y)) % 20; };
  const FunctionPredictor backend([&](const PatchContext& c) { return level(c.x, c.y); });
  int mismatches = 0, cases = 0;
  for (auto [w, h] : {std::pair{32, 32}, {48, 48}, {64, 64}, {100, 70}})
    for (int step : {4, 16, 32}) {
      ++cases;
      const BlurMap m = estimate_map(Image(w, h, 1, 0.5), backend, step);
      const auto brute = oracle::enumerate_cover(w, h, step, level);
      for (std::size_t i = 0; i < m.values.size(); ++i)
        if (m.values.data()[i] != static_cast<double>(brute.sum[i]) / brute.count[i]) ++mismatches;
    }
  const double elapsed = seconds_since(t0);
  report(2, mismatches == 0 && elapsed < 1.0, "map aggregation equals brute-force window enumeration, < 1 s",
         std::to_string(cases) + " cases, " + std::to_string(mismatches) + " mismatching pixels, " + fmt("%.3f s", elapsed));
}

// 3. Circle of confusion.
void criterion3() {
  const double same = coc_diameter(LensConfig{50.0, 25.0, 1000.0, 1000.0});
  const double worked = coc_diameter(LensConfig{50.0, 25.0, 1000.0, 2000.0});
  const double oracle = 25.0 * 50.0 * 1000.0 / (2000.0 * 950.0);
  const bool ok = same == 0.0 && std::abs(worked - oracle) <= 1e-9;
  report(3, ok, "CoC zero at focus and worked example within 1e-9", fmt("S2=S1: %.17g, example %.12f (oracle %.12f)", same, worked, oracle));
}

std::vector<std::pair<Image, Image>> random_pairs() {
  std::vector<std::pair<Image, Image>> pairs;
  for (std::uint64_t s = 0; s < 20; ++s)
    pairs.emplace_back(fixture::random_image(32, 32, 1000 + s), fixture::random_image(32, 32, 2000 + s));
  return pairs;
}

// 4. Guided filter against the naive oracle.
void criterion4() {
  double worst = 0.0;
  for (const auto& [p, guide] : random_pairs())
    for (auto [r, eps] : {std::pair{2, 1e-4}, {8, 0.005}, {16, 0.1}})
      worst = std::max(worst, max_abs_diff(guided_filter(p, guide, r, eps), oracle::guided_filter(p, guide, r, eps)));
  report(4, worst < 1e-6, "guided filter matches naive oracle within 1e-6 (20 pairs x 3 settings)", fmt("max error %.3g", worst));
}

// 5. WGIF limit and edge slope.
void criterion5() {
  double worst = 0.0;
  for (const auto& [p, guide] : random_pairs())
    for (auto [r, eps] : {std::pair{2, 1e-4}, {8, 0.005}, {16, 0.1}})
      worst = std::max(worst, max_abs_diff(weighted_guided_filter(p, guide, r, eps, 1e9), guided_filter(p, guide, r, eps)));
  const Image edge = fixture::step_edge(128, 64);
  auto slope = [](const Image& img) {
    double s = 0.0;
    for (int x = 0; x + 1 < img.width(); ++x) s = std::max(s, std::abs(img.at(x + 1, 32) - img.at(x, 32)));
    return s;
  };
  const double gf = slope(guided_filter(edge, edge, 16, 0.005));
  const double wgif = slope(weighted_guided_filter(edge, edge, 16, 0.005));
  const bool ok = worst < 1e-6 && wgif >= gf;
  report(5, ok, "WGIF(lambda_w=1e9) within 1e-6 of GF; WGIF edge slope >= GF (r=16, eps=0.005)",
         fmt("max diff %.3g, slopes WGIF %.6f vs GF %.6f", worst, wgif, gf));
}

// 6. Level preservation and binary mask IoU on the two-zone fixture.
void criterion6() {
  const auto tz = fixture::two_zone(128, 10.0);
  const OraclePredictor backend(tz.truth);
  const BlurMap raw = estimate_map(tz.image, backend, 16);
  const RefinedMap refined = refine_map(raw, tz.image);
  // Zone interiors: pixels farther than 2r from the seam, outside the support of the refinement filter.
  const int band = 2 * RefineOptions{}.guidance.radius;
  const double dl = std::abs(fixture::region_mean(refined.values, 0, 0, 64 - band, 128) -
                             fixture::region_mean(raw.values, 0, 0, 64 - band, 128));
  const double dr = std::abs(fixture::region_mean(refined.values, 64 + band, 0, 128, 128) -
                             fixture::region_mean(raw.values, 64 + band, 0, 128, 128));
  const Image mask = binary_map(refined.values, 4.0);
  int inter = 0, uni = 0;
  for (int y = 0; y < 128; ++y)
    for (int x = 0; x < 128; ++x) {
      const bool pred = mask.at(x, y) == 0.0;
      const bool truth = tz.truth.at(x, y) == 0.0;
      inter += pred && truth;
      uni += pred || truth;
    }
  const double iou = static_cast<double>(inter) / uni;
  report(6, dl < 0.5 && dr < 0.5 && iou >= 0.9, "refined zone means within 0.5 of oracle; binary (lambda=4) in-focus IoU >= 0.9",
         fmt("deviation left %.4f right %.4f, IoU %.4f", dl, dr, iou));
}

// 7. SDoF calibration.
void criterion7() {
  const SDoFWeights w = solve_sdof_weights(1.0, 0.999, 7.0, 0.001);
  const double e0 = std::abs(oracle::sdof_weight(1.0, w.sigma, w.gamma) - 0.999);
  const double e1 = std::abs(oracle::sdof_weight(7.0, w.sigma, w.gamma) - 0.001);
  bool decreasing = true;
  double prev = sdof_weight(0.0, w);
  for (int i = 1; i <= 10000; ++i) {
    const double cur = sdof_weight(10.0 * i / 10000.0, w);
    decreasing = decreasing && cur < prev;
    prev = cur;
  }
  report(7, e0 <= 1e-9 && e1 <= 1e-9 && decreasing, "SDoF anchors reproduced within 1e-9; W strictly decreasing on [0,10]",
         fmt("gamma %.4f sigma %.4f, anchor errors %.2g", w.gamma, w.sigma, std::max(e0, e1)) +
             (decreasing ? ", monotone" : ", NOT monotone"));
}

// 8. Gain map.
void criterion8() {
  const GainParams p;
  const bool mid = rising_sigmoid(p.beta1, p.alpha1, p.beta1) == 0.5;
  double top = 0.0;
  for (int i = 0; i <= 19000; ++i) top = std::max(top, gain_at(i / 19000.0, p));
  const double h = 1e-5;
  const double slope = (rising_sigmoid(p.beta1 + h, p.alpha1, p.beta1) - rising_sigmoid(p.beta1 - h, p.alpha1, p.beta1)) / (2 * h);
  const double rel = std::abs(slope - p.alpha1 / 4.0) / (p.alpha1 / 4.0);
  report(8, mid && top < p.lambda_max && rel <= 1e-4, "lambda1(beta1)=0.5 exactly; gain < lambda_max; slope at beta1 = alpha1/4 within 1e-4",
         fmt("max gain %.6f, slope %.8f (rel err %.2g)", top, slope, rel) + (mid ? ", midpoint exact" : ", midpoint off"));
}

// 9. Fusion convexity, self-fusion, half-blur pair.
void criterion9() {
  const FusionParams params;
  const Image img = fixture::texture(128, 5);
  const std::vector<Image> same{img, img};
  const std::vector<Image> same_maps{Image(128, 128, 1, 3.0), Image(128, 128, 1, 3.0)};
  const double self_err = max_abs_diff(fuse(same, same_maps, params).fused, img);

  const auto pair = fixture::half_blur_pair(128, 4.0);
  const std::vector<Image> inputs{pair.left_sharp, pair.right_sharp};
  const OraclePredictor lb(pair.truth_left_sharp), rb(pair.truth_right_sharp);
  const std::vector<Image> maps{estimate_map(inputs[0], lb, params.step).values, estimate_map(inputs[1], rb, params.step).values};
  const FusionResult r = fuse(inputs, maps, params);
  double sum_err = 0.0;
  for (std::size_t i = 0; i < r.weights[0].size(); ++i)
    sum_err = std::max(sum_err, std::abs(r.weights[0].data()[i] + r.weights[1].data()[i] - 1.0));
  // Halves exclude the 2r band the decision filter spreads over the seam.
  const int band = 2 * params.gf_radius;
  const double fl = lap_variance(r.fused, 0, 64 - band), fr = lap_variance(r.fused, 64 + band, 128);
  const double bl = std::max(lap_variance(inputs[0], 0, 64 - band), lap_variance(inputs[1], 0, 64 - band));
  const double br = std::max(lap_variance(inputs[0], 64 + band, 128), lap_variance(inputs[1], 64 + band, 128));
  const bool ok = sum_err <= 1e-9 && self_err <= 1e-9 && fl >= 0.99 * bl && fr >= 0.99 * br;
  report(9, ok, "weights sum to 1 within 1e-9; self-fusion within 1e-9; per-half sharpness >= better input - 1%",
         fmt("sum err %.2g, self err %.2g, ", sum_err, self_err) + fmt("left %.5f right %.5f of better input", fl / bl, fr / br));
}

// 10. Gradient check and Adam zero step.
void criterion10() {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> nd(0.0, 1.0);
  int bad = 0, checked = 0;
  for (int b = 0; b < 10; ++b) {
    const std::size_t n = 3 + static_cast<std::size_t>(b);
    std::vector<FeatureVector> x(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (double& v : x[i]) v = nd(rng);
      y[i] = static_cast<int>(rng() % 20);
    }
    ParameterVector p{};
    for (double& v : p) v = 0.3 * nd(rng);
    ParameterVector g{};
    batch_loss(p, x, y, &g);
    const double h = 1e-5;
    for (std::size_t i = 0; i < kParameterCount; ++i) {
      ParameterVector a = p, c = p;
      a[i] += h;
      c[i] -= h;
      const double fd = (batch_loss(a, x, y) - batch_loss(c, x, y)) / (2 * h);
      ++checked;
      if (std::abs(fd - g[i]) > 1e-4 * std::max(std::abs(fd), 1e-3)) ++bad;
    }
  }
  AdamOptimizer adam(kParameterCount, TrainConfig{});
  std::vector<double> params(kParameterCount);
  for (double& v : params) v = nd(rng);
  const std::vector<double> before = params;
  adam.step(params, std::vector<double>(kParameterCount, 0.0));
  const bool unchanged = params == before;
  report(10, bad == 0 && unchanged, "analytic gradients match central differences (h=1e-5) within 1e-4 relative; zero-gradient Adam step is a no-op",
         std::to_string(checked) + " partials, " + std::to_string(bad) + " outside tolerance" + (unchanged ? ", Adam no-op" : ", Adam moved"));
}

// 11. End-to-end CLI determinism across thread counts.
std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = read_file(e.path());
  return files;
}

bool run_pipeline(const fs::path& dir, int threads) {
  const std::string cli = std::string("\"") + DEFOCUS_CLI_PATH + "\" --threads " + std::to_string(threads) + " --seed 5 ";
  const auto p = [&](const std::string& name) { return "\"" + (dir / name).string() + "\""; };
  const std::vector<std::string> steps{
      "corpus --output " + p("corpus") + " --count 4 --size 128",
      "dataset generate --input " + p("corpus") + " --output " + p("ds"),
      "train --dataset " + p("ds") + " --epochs 3 --out " + p("model.json") + " --history " + p("history.json"),
      "evaluate --dataset " + p("ds") + " --model " + p("model.json") + " --report " + p("report.json"),
      "map --input " + p("corpus/texture_01.png") + " --model " + p("model.json") + " --step 8 --out " + p("map.pgm16"),
      "refine --map " + p("map.pgm16") + " --image " + p("corpus/texture_01.png") + " --out " + p("refined.pgm16"),
      "binary --map " + p("refined.pgm16") + " --out " + p("mask.png"),
      "--debug-dir " + p("debug") + " enhance --input " + p("corpus/texture_01.png") + " --model " + p("model.json") +
          " --out " + p("enhanced.png"),
      "sdof --input " + p("corpus/texture_01.png") + " --map " + p("refined.pgm16") + " --out " + p("sdof.png"),
      "fuse --inputs " + p("corpus/texture_01.png") + " " + p("corpus/texture_02.png") + " --model " + p("model.json") +
          " --out " + p("fused.png"),
  };
  for (const auto& s : steps) {
    const std::string cmd = cli + s + " > /dev/null";
    if (std::system(cmd.c_str()) != 0) {
      std::printf("  command failed: %s\n", cmd.c_str());
      return false;
    }
  }
  return true;
}

void criterion11() {
  ScratchDir dir("acceptance_det");
  const bool ran = run_pipeline(dir / "a", 1) && run_pipeline(dir / "b", 1) && run_pipeline(dir / "c", 3);
  std::size_t files = 0;
  int differing = 0;
  if (ran) {
    const auto a = snapshot(dir / "a"), b = snapshot(dir / "b"), c = snapshot(dir / "c");
    files = a.size();
    differing = (a.size() != b.size() || a.size() != c.size()) ? 1 : 0;
    for (const auto& [name, bytes] : a) {
      const auto ib = b.find(name), ic = c.find(name);
      if (ib == b.end() || ic == c.end() || ib->second != bytes || ic->second != bytes) ++differing;
    }
  }
  report(11, ran && differing == 0 && files > 0, "CLI pipeline artifacts byte-identical across reruns and --threads 1 vs 3",
         std::to_string(files) + " artifacts compared, " + std::to_string(differing) + " differing" + (ran ? "" : ", pipeline failed"));
}

// 12. Runtime model.
void criterion12() {
  const double t = predict_runtime(0.001, 1048576.0, 16);
  report(12, t == 4.096, "predict_runtime(0.001, 1048576, 16) == 4.096 exactly", fmt("%.17g", t));
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> criteria{criterion1, criterion2, criterion3, criterion4,
                                                    criterion5, criterion6, criterion7, criterion8,
                                                    criterion9, criterion10, criterion11, criterion12};
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    try {
      criteria[i]();
    } catch (const std::exception& e) {
      report(static_cast<int>(i + 1), false, "threw", e.what());
    }
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
