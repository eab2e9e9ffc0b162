#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "doctest.h"
#include "defocus/blurmap.hpp"
#include "defocus/io.hpp"
#include "defocus/parallel.hpp"
#include "fixtures.hpp"
#include "json.hpp"
#include "scratch.hpp"

using namespace defocus;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
  nlohmann::json summary() const { return nlohmann::json::parse(out); }
};

Result call(std::vector<std::string> args) {
  args.insert(args.begin(), "defocus");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string str(const fs::path& p) { return p.string(); }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("arithmetic commands and summary line") {
  const Result coc = call({"coc", "--focal-length", "50", "--aperture", "25", "--focus-distance", "1000",
                           "--object-distance", "2000"});
  REQUIRE(coc.code == 0);
  const auto j = coc.summary();
  CHECK(j["command"] == "coc");
  CHECK(j["result"]["diameter"].get<double>() == doctest::Approx(25.0 * 50.0 / (1000.0 - 50.0) * 1000.0 / 2000.0));
  CHECK(j.contains("wall_time_s"));
  CHECK(j.contains("threads"));

  const Result rt = call({"predict-runtime", "--seconds-per-patch", "0.001", "--pixels", "1048576", "--step", "16"});
  REQUIRE(rt.code == 0);
  CHECK(rt.summary()["result"]["seconds"].get<double>() == doctest::Approx(4.096));
}

TEST_CASE("help and usage errors") {
  const Result help = call({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("enhance") != std::string::npos);
  const Result sub_help = call({"enhance", "--help"});
  CHECK(sub_help.code == 0);
  CHECK(sub_help.out.find("--a1") != std::string::npos);
  CHECK(sub_help.out.find("46") != std::string::npos);

  CHECK(call({}).code == 2);
  CHECK(call({"nonsense"}).code == 2);
  const Result no_out = call({"coc", "--focal-length", "50"});
  CHECK(no_out.code == 2);

  ScratchDir dir("cli_err");
  write_png(dir / "img.png", fixture::random_image(48, 48, 1));
  const Result step0 = call({"map", "--input", str(dir / "img.png"), "--out", str(dir / "m.pgm16"), "--step", "0"});
  CHECK(step0.code == 2);
  CHECK(step0.err.find("--step") != std::string::npos);

  const Result no_backend = call({"map", "--input", str(dir / "img.png"), "--out", str(dir / "m.pgm16")});
  CHECK(no_backend.code == 2);

  const Result degenerate = call({"sdof", "--input", str(dir / "img.png"), "--out", str(dir / "o.png"), "--predictions",
                                  str(dir / "img.png"), "--c0", "5", "--c1", "5"});
  CHECK(degenerate.code == 2);
  CHECK(degenerate.err.find("--c0") != std::string::npos);

  write_file_atomic(dir / "bad.png", "not a png");
  write_file_atomic(dir / "preds.csv", "bad.png,0,0,1\n");
  const Result bad_png = call({"map", "--input", str(dir / "bad.png"), "--predictions", str(dir / "preds.csv"), "--out",
                               str(dir / "m.pgm16")});
  CHECK(bad_png.code == 1);
  CHECK(bad_png.out.empty());
  CHECK_FALSE(fs::exists(dir / "m.pgm16"));

  CHECK(call({"--threads", "-1", "coc", "--focal-length", "1", "--aperture", "1", "--focus-distance", "2",
              "--object-distance", "3"})
            .code == 2);
}

TEST_CASE("end-to-end pipeline") {
  ScratchDir dir("cli_pipe");
  const auto p = [&](const char* name) { return str(dir / name); };

  REQUIRE(call({"corpus", "--output", p("corpus"), "--count", "4", "--size", "96"}).code == 0);
  CHECK(fs::exists(dir / "corpus" / "texture_03.png"));

  const Result gen = call({"--seed", "3", "dataset", "generate", "--input", p("corpus"), "--output", p("ds")});
  REQUIRE(gen.code == 0);
  CHECK(gen.summary()["command"] == "dataset generate");
  CHECK(fs::exists(dir / "ds" / "manifest.json"));

  const Result train = call({"--seed", "3", "train", "--dataset", p("ds"), "--out", p("model.json"), "--epochs", "2",
                             "--history", p("history.json")});
  REQUIRE(train.code == 0);
  CHECK(nlohmann::json::parse(read_file(dir / "history.json")).size() == 3);

  const Result ev = call({"evaluate", "--dataset", p("ds"), "--model", p("model.json"), "--report", p("report.json"),
                          "--split", "test"});
  REQUIRE(ev.code == 0);
  CHECK(nlohmann::json::parse(read_file(dir / "report.json"))["per_class"].size() == 20);

  write_png(dir / "scene.png", fixture::two_zone(96, 8.0).image);
  const Result map = call({"map", "--input", p("scene.png"), "--model", p("model.json"),
                           "--step", "8", "--out", p("map.pgm16")});
  REQUIRE(map.code == 0);
  const BlurMap bm = load_blur_map(dir / "map.pgm16");
  CHECK(bm.step == 8);
  CHECK(bm.backend_id == "softmax");
  CHECK(bm.values.width() == 96);
  CHECK(map.summary()["outputs"].size() >= 1);

  REQUIRE(call({"refine", "--map", p("map.pgm16"), "--image", p("scene.png"), "--r", "8", "--iters", "2", "--out",
                p("refined.pgm16")})
              .code == 0);
  REQUIRE(call({"binary", "--map", p("refined.pgm16"), "--out", p("mask.png")}).code == 0);
  const Image mask = read_image(dir / "mask.png");
  CHECK(min_value(mask) >= 0.0);
  CHECK(max_value(mask) <= 1.0);

  REQUIRE(call({"--debug-dir", p("debug"), "enhance", "--input", p("scene.png"), "--map", p("refined.pgm16"), "--out",
                p("enh.png")})
              .code == 0);
  REQUIRE(call({"sdof", "--input", p("scene.png"), "--map", p("refined.pgm16"), "--smooth-r", "8", "--out", p("sdof.png")})
              .code == 0);
  REQUIRE(call({"classical-map", "--input", p("scene.png"), "--method", "var_laplacian", "--out", p("vl.png")}).code == 0);

  // Fusion with on-the-fly estimation needs a backend; use the trained model.
  const auto pair = fixture::half_blur_pair(96, 4.0);
  write_png(dir / "a.png", pair.left_sharp);
  write_png(dir / "b.png", pair.right_sharp);
  const Result fused = call({"fuse", "--inputs", p("a.png"), p("b.png"), "--model", p("model.json"), "--refine-r", "8",
                             "--refine-iters", "1", "--out", p("fused.png")});
  REQUIRE(fused.code == 0);
  CHECK(read_image(dir / "fused.png").width() == 96);
  CHECK(call({"fuse", "--inputs", p("a.png"), "--model", p("model.json"), "--out", p("f2.png")}).code == 2);

  CHECK(fs::exists(dir / "debug"));
  CHECK_FALSE(fs::is_empty(dir / "debug"));
}

TEST_CASE("config file and precedence") {
  ScratchDir dir("cli_cfg");
  write_png(dir / "img.png", fixture::random_image(64, 64, 2));
  std::string csv;
  for (int y = 0; y <= 32; ++y)
    for (int x = 0; x <= 32; ++x) csv += "img.png," + std::to_string(x) + "," + std::to_string(y) + ",4\n";
  write_file_atomic(dir / "preds.csv", csv);
  write_file_atomic(dir / "cfg.toml", "[map]\nstep = 8\n");
  const std::vector<std::string> base{"--config", str(dir / "cfg.toml"), "map", "--input", str(dir / "img.png"),
                                      "--predictions", str(dir / "preds.csv"), "--out", str(dir / "m.pgm16")};
  REQUIRE(call(base).code == 0);
  CHECK(load_blur_map(dir / "m.pgm16").step == 8);
  std::vector<std::string> explicit_step = base;
  explicit_step.insert(explicit_step.end(), {"--step", "16"});
  REQUIRE(call(explicit_step).code == 0);
  const BlurMap m = load_blur_map(dir / "m.pgm16");
  CHECK(m.step == 16);
  CHECK(m.backend_id == "file");
  CHECK(std::abs(min_value(m.values) - 4.0) <= 19.0 / 65535.0 / 2.0 + 1e-12);
}

TEST_CASE("artifacts do not depend on the thread count") {
  ScratchDir dir("cli_det");
  const auto p = [&](const char* name) { return str(dir / name); };
  const int before = thread_count();
  REQUIRE(call({"corpus", "--output", p("c"), "--count", "3", "--size", "64"}).code == 0);
  REQUIRE(call({"--threads", "1", "--seed", "9", "dataset", "generate", "--input", p("c"), "--output", p("d1")}).code == 0);
  REQUIRE(call({"--threads", "3", "--seed", "9", "dataset", "generate", "--input", p("c"), "--output", p("d3")}).code == 0);
  for (const char* f : {"manifest.json", "train.bin", "validation.bin", "test.bin"})
    CHECK(read_file(dir / "d1" / f) == read_file(dir / "d3" / f));

  REQUIRE(call({"--threads", "1", "--seed", "9", "train", "--dataset", p("d1"), "--epochs", "2", "--out", p("m1.json")}).code == 0);
  REQUIRE(call({"--threads", "3", "--seed", "9", "train", "--dataset", p("d1"), "--epochs", "2", "--out", p("m3.json")}).code == 0);
  CHECK(read_file(dir / "m1.json") == read_file(dir / "m3.json"));

  REQUIRE(call({"--threads", "1", "map", "--input", p("c/texture_01.png"), "--model", p("m1.json"), "--step", "4",
                "--out", p("map1.pgm16")})
              .code == 0);
  REQUIRE(call({"--threads", "4", "map", "--input", p("c/texture_01.png"), "--model", p("m1.json"), "--step", "4",
                "--out", p("map4.pgm16")})
              .code == 0);
  CHECK(read_file(dir / "map1.pgm16") == read_file(dir / "map4.pgm16"));
  CHECK(thread_count() == before);
}

}
