#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "defocus/blurmap.hpp"
#include "defocus/filters.hpp"
#include "defocus/io.hpp"
#include "defocus/parallel.hpp"
#include "fixtures.hpp"
#include "json.hpp"
#include "oracles.hpp"
#include "scratch.hpp"

using namespace defocus;

namespace {

int hash_level(int x, int y) { return static_cast<int>((static_cast<unsigned>(x) * 73856093u ^ static_cast<unsigned>(y) * 19349663u) % 20u); }

FunctionPredictor hashed() {
  return FunctionPredictor([](const PatchContext& c) { return hash_level(c.x, c.y); }, "hash");
}

double max_abs_diff(const Image& a, const Image& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

}  // namespace

TEST_SUITE("blurmap") {

TEST_CASE("window origins and coverage") {
  CHECK(window_origins(32, 7) == std::vector<int>{0});
  CHECK(window_origins(64, 16) == std::vector<int>{0, 16, 32});
  CHECK(window_origins(70, 16) == std::vector<int>{0, 16, 32, 38});
  CHECK(window_origins(33, 32) == std::vector<int>{0, 1});
  for (int len : {32, 33, 45, 64, 100})
    for (int step : {1, 3, 16, 31, 32}) CHECK(window_origins(len, step) == oracle::origins(len, step));

  for (int step : {1, 5, 16, 32}) {
    const auto c = coverage_count(32, 32, step);
    CHECK(std::all_of(c.begin(), c.end(), [](int v) { return v == 1; }));
  }
  const auto c64 = coverage_count(64, 64, 16);
  CHECK(c64[16 * 64 + 16] == 4);
  CHECK(c64[0] == 1);
  CHECK(c64[20 * 64 + 40] == 4);
  CHECK(c64[63 * 64 + 63] == 1);

  for (auto [w, h, step] : {std::tuple{64, 64, 16}, std::tuple{77, 45, 9}, std::tuple{33, 90, 32}}) {
    const auto brute = oracle::enumerate_cover(w, h, step, [](int, int) { return 0; });
    const auto got = coverage_count(w, h, step);
    CHECK(got == brute.count);
    CHECK(*std::min_element(got.begin(), got.end()) >= 1);
  }
  CHECK_THROWS_AS(coverage_count(31, 64, 4), std::domain_error);
  CHECK_THROWS_AS(coverage_count(64, 64, 0), std::domain_error);
  CHECK_THROWS_AS(coverage_count(64, 64, 33), std::domain_error);
  CHECK_THROWS_AS(window_origins(64, -1), std::domain_error);
}

TEST_CASE("estimate_map averages covering predictions") {
  const Image img = fixture::random_image(64, 64, 1);
  FunctionPredictor constant([](const PatchContext&) { return 13; });
  for (int step : {1, 7, 16, 32}) {
    const BlurMap m = estimate_map(img, constant, step);
    CHECK(min_value(m.values) == 13.0);
    CHECK(max_value(m.values) == 13.0);
    CHECK(m.step == step);
  }

  FunctionPredictor scripted([](const PatchContext& c) {
    if (c.x == 0 && c.y == 0) return 2;
    if (c.x == 0 && c.y == 16) return 4;
    if (c.x == 16 && c.y == 0) return 6;
    if (c.x == 16 && c.y == 16) return 8;
    return 0;
  });
  const BlurMap s = estimate_map(img, scripted, 16);
  CHECK(s.values.at(16, 16) == 5.0);
  CHECK(s.values.width() == 64);
  CHECK(s.backend_id == "scripted");

  // Brute-force window averaging on odd geometry, plus the min/max bound.
  const Image odd = fixture::random_image(77, 45, 2);
  const BlurMap h = estimate_map(odd, hashed(), 9, "odd");
  const auto brute = oracle::enumerate_cover(77, 45, 9, hash_level);
  for (int y = 0; y < 45; ++y)
    for (int x = 0; x < 77; ++x) {
      const auto i = static_cast<std::size_t>(y * 77 + x);
      CHECK(h.values.at(x, y) == static_cast<double>(brute.sum[i]) / brute.count[i]);
    }
  CHECK(min_value(h.values) >= 0.0);
  CHECK(max_value(h.values) <= 19.0);
  const auto xs = window_origins(77, 9), ys = window_origins(45, 9);
  int violations = 0;
  for (int y = 0; y < 45; ++y)
    for (int x = 0; x < 77; ++x) {
      int lo = 19, hi = 0;
      for (int oy : ys)
        for (int ox : xs)
          if (x >= ox && x < ox + 32 && y >= oy && y < oy + 32) {
            lo = std::min(lo, hash_level(ox, oy));
            hi = std::max(hi, hash_level(ox, oy));
          }
      violations += h.values.at(x, y) < lo || h.values.at(x, y) > hi;
    }
  CHECK(violations == 0);

  // The patch handed to the backend is the grayscale crop at the origin.
  const Image color = fixture::random_image(40, 40, 3, 3);
  class Check final : public PatchPredictor {
   public:
    explicit Check(const Image& gray) : gray_(gray) {}
    int predict(const Image& patch, const PatchContext& ctx) const override {
      return patch == crop(gray_, Rect{ctx.x, ctx.y, 32, 32}) ? 1 : 0;
    }
    std::string id() const override { return "check"; }
   private:
    const Image& gray_;
  };
  const Image gray = to_grayscale(color);
  CHECK(min_value(estimate_map(color, Check(gray), 4).values) == 1.0);
}

TEST_CASE("estimate_map errors") {
  FunctionPredictor constant([](const PatchContext&) { return 1; });
  CHECK_THROWS_AS(estimate_map(Image(31, 40), constant), std::domain_error);
  CHECK_THROWS_AS(estimate_map(Image(40, 40), constant, 0), std::domain_error);
  CHECK_THROWS_AS(estimate_map(Image(40, 40), constant, 33), std::domain_error);
  FunctionPredictor bad([](const PatchContext&) { return 20; });
  CHECK_THROWS_AS(estimate_map(Image(40, 40), bad), std::domain_error);
}

TEST_CASE("two-zone fixture with the oracle backend") {
  const auto tz = fixture::two_zone();
  const OraclePredictor oracle_backend(tz.truth);
  const BlurMap m = estimate_map(tz.image, oracle_backend, 16);
  CHECK(fixture::region_mean(m.values, 8, 8, 48, 120) < 2.0);
  CHECK(fixture::region_mean(m.values, 80, 8, 120, 120) > 8.0);
  CHECK(m.backend_id == "oracle");
  CHECK_THROWS_AS(OraclePredictor(Image(64, 64, 3)), std::domain_error);
  CHECK_THROWS_AS(oracle_backend.predict(Image(32, 32), PatchContext{{}, 100, 0}), std::domain_error);
}

TEST_CASE("estimate_map is bit-identical across thread counts") {
  const Image img = fixture::random_image(150, 97, 4);
  set_thread_count(1);
  const BlurMap a = estimate_map(img, hashed(), 5);
  set_thread_count(4);
  const BlurMap b = estimate_map(img, hashed(), 5);
  set_thread_count(0);
  CHECK(image_digest(a.values) == image_digest(b.values));
  CHECK(a.values == b.values);
}

TEST_CASE("classical maps match naive oracles") {
  const Image img = fixture::random_image(41, 29, 5);
  const Image ent = classical_map(img, ClassicalMethod::entropy, 16);
  const Image sd = classical_map(img, ClassicalMethod::stddev, 16);
  const Image vl = classical_map(img, ClassicalMethod::var_laplacian, 16);
  const Image ent_o = oracle::window_entropy(img, -8, 7);
  Image sd_o = oracle::window_variance(img, -8, 7);
  for (double& v : sd_o.data()) v = std::sqrt(v);
  const Image vl_o = oracle::window_variance(oracle::laplacian(img), -8, 7);
  CHECK(max_abs_diff(ent, ent_o) <= 1e-6);
  CHECK(max_abs_diff(sd, sd_o) <= 1e-6);
  CHECK(max_abs_diff(vl, vl_o) <= 1e-6);
  // Odd windows are centered.
  CHECK(max_abs_diff(classical_map(img, ClassicalMethod::stddev, 5), [&] {
          Image o = oracle::window_variance(img, -2, 2);
          for (double& v : o.data()) v = std::sqrt(v);
          return o;
        }()) <= 1e-6);

  const Image flat(50, 40, 1, 0.3);
  for (auto m : {ClassicalMethod::entropy, ClassicalMethod::stddev, ClassicalMethod::var_laplacian})
    CHECK(max_value(classical_map(flat, m)) == 0.0);

  // Sharper regions score higher.
  const auto tz = fixture::two_zone();
  for (auto m : {ClassicalMethod::entropy, ClassicalMethod::stddev, ClassicalMethod::var_laplacian}) {
    const Image c = classical_map(tz.image, m);
    CHECK(fixture::region_mean(c, 8, 8, 48, 120) > fixture::region_mean(c, 80, 8, 120, 120));
  }

  CHECK(parse_classical_method("var_laplacian") == ClassicalMethod::var_laplacian);
  CHECK(to_string(ClassicalMethod::entropy) == "entropy");
  CHECK_THROWS_AS(parse_classical_method("sobel"), std::domain_error);
  CHECK_THROWS_AS(classical_map(img, ClassicalMethod::stddev, 0), std::domain_error);
}

TEST_CASE("runtime model") {
  CHECK(predict_runtime(0.001, 1024.0 * 1024.0, 16) == doctest::Approx(4.096).epsilon(1e-12));
  CHECK(predict_runtime(0.25, 1000.0, 1) == 250.0);
  CHECK(predict_runtime(0.01, 5e5, 4) / predict_runtime(0.01, 5e5, 16) == doctest::Approx(16.0));
  CHECK_THROWS_AS(predict_runtime(0.0, 10.0, 4), std::domain_error);
  CHECK_THROWS_AS(predict_runtime(1.0, -10.0, 4), std::domain_error);
  CHECK_THROWS_AS(predict_runtime(1.0, 10.0, 0), std::domain_error);
}

TEST_CASE("blur map persistence") {
  ScratchDir dir("blurmap");
  BlurMap m = estimate_map(fixture::random_image(70, 40, 6), hashed(), 8);
  save_blur_map(dir / "map.pgm16", m);
  CHECK(sidecar_path(dir / "map.pgm16") == dir / "map.json");
  const auto meta = nlohmann::json::parse(read_file(dir / "map.json"));
  CHECK(meta["step"] == 8);
  CHECK(meta["backend"] == "hash");
  CHECK(meta["min"] == min_value(m.values));
  CHECK(meta["max"] == max_value(m.values));
  const BlurMap back = load_blur_map(dir / "map.pgm16");
  CHECK(back.step == 8);
  CHECK(back.backend_id == "hash");
  CHECK(max_abs_diff(back.values, m.values) <= 19.0 / 65535.0 / 2.0 + 1e-12);

  write_map_pgm16(dir / "bare.pgm16", m.values);
  CHECK(load_blur_map(dir / "bare.pgm16").step == kDefaultStep);
  write_file_atomic(dir / "bare.json", "{nope");
  CHECK_THROWS_AS(load_blur_map(dir / "bare.pgm16"), std::runtime_error);
}

TEST_CASE("imported predictions") {
  const FilePredictor fp = FilePredictor::from_csv_text("source_id,x,y,label\nimg.png,0,0,3\nimg.png,16,0,7\n\n");
  CHECK(fp.size() == 2);
  CHECK(fp.id() == "file");
  CHECK(fp.predict(Image(32, 32), PatchContext{"img.png", 16, 0}) == 7);
  CHECK_THROWS_AS(fp.predict(Image(32, 32), PatchContext{"img.png", 8, 0}), std::runtime_error);
  CHECK_THROWS_AS(FilePredictor::from_csv_text("a,1,2\n"), std::runtime_error);
  CHECK_THROWS_AS(FilePredictor::from_csv_text("a,0,0,1\na,1,x,2\n"), std::runtime_error);
  CHECK_THROWS_AS(FilePredictor::from_csv_text("a,1,2,20\n"), std::runtime_error);
  CHECK_THROWS_AS(FilePredictor::from_csv_text("a,0,0,1\na,1,2x,2\n"), std::runtime_error);
  CHECK(FilePredictor::from_csv_text("x,y,z,w\n").size() == 0);

  ScratchDir dir("csv");
  std::string csv;
  for (int y : window_origins(48, 16))
    for (int x : window_origins(40, 16)) csv += "p.png," + std::to_string(x) + "," + std::to_string(y) + "," + std::to_string((x + y) % 20) + "\n";
  write_file_atomic(dir / "p.csv", csv);
  const BlurMap m = estimate_map(Image(40, 48), FilePredictor::from_csv(dir / "p.csv"), 16, "p.png");
  CHECK(m.values.at(0, 0) == 0.0);
  CHECK(m.values.at(39, 47) == (8 + 16) % 20);
  CHECK_THROWS_AS(FilePredictor::from_csv(dir / "missing.csv"), std::runtime_error);
}

}
