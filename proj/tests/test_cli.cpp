#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "doctest.h"
#include "helpers.hpp"
#include "n2c/cli.hpp"
#include "n2c/image_io.hpp"
#include "n2c/model_io.hpp"

using namespace n2c;
using namespace n2c::test;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::string> small_data(const fs::path& dir) {
  return {"generate", "--out", dir.string(), "--size", "32", "--n-slices", "6"};
}

}  // namespace

TEST_CASE("generate writes the documented layout and is reproducible") {
  const auto dir = temp_dir("cli_gen");
  const Run r = cli({"generate", "--out", (dir / "a").string()});
  REQUIRE(r.code == 0);
  // 8 slices x 2 contrasts x (1 clean + 2 noisy)
  std::size_t n = 0;
  for (auto& e : fs::recursive_directory_iterator(dir / "a"))
    if (e.path().extension() == ".n2c") ++n;
  CHECK(n == 48);
  CHECK(fs::exists(dir / "a" / "clean" / clean_file_name(0, Contrast::A)));
  CHECK(fs::exists(dir / "a" / "noisy" / noisy_file_name(7, Contrast::B, 1)));
  CHECK(cli({"generate", "--out", (dir / "b").string()}).code == 0);
  for (auto& e : fs::recursive_directory_iterator(dir / "a"))
    if (e.path().extension() == ".n2c")
      CHECK(slurp(e.path()) == slurp(dir / "b" / fs::relative(e.path(), dir / "a")));
  // A manifest rerun reproduces the bytes as well.
  CHECK(cli({"generate", "--manifest", (dir / "a" / "manifest.json").string(), "--out", (dir / "c").string()}).code == 0);
  CHECK(slurp(dir / "a" / "noisy" / noisy_file_name(3, Contrast::A, 0)) ==
        slurp(dir / "c" / "noisy" / noisy_file_name(3, Contrast::A, 0)));
}

TEST_CASE("a config file missing a required key names the key") {
  const auto dir = temp_dir("cli_cfg");
  std::ofstream(dir / "gen.cfg") << "size = 32\nn_slices = 4\nn_regions = 5\nnoise_rel_std = 0.05\nseed = 1\n";
  const Run r = cli({"generate", "--config", (dir / "gen.cfg").string(), "--out", (dir / "o").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("noise_kind") != std::string::npos);
}

TEST_CASE("unknown scheme and bad arguments are config errors") {
  const auto dir = temp_dir("cli_scheme");
  REQUIRE(cli(small_data(dir / "d")).code == 0);
  const Run r = cli({"train", "--scheme", "n2magic", "--data", (dir / "d").string(), "--out", (dir / "t").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("n2v_bfs") != std::string::npos);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({"train", "--scheme", "n2c_bfs", "--data", (dir / "d").string(), "--out", (dir / "t").string(), "--lr", "-1"})
            .code == 2);
  CHECK(cli({"train", "--scheme", "n2c_bfs", "--data", (dir / "missing").string(), "--out", (dir / "t").string()})
            .code == 3);
}

TEST_CASE("evaluate: clean against itself gives inf and one") {
  const auto dir = temp_dir("cli_eval");
  REQUIRE(cli(small_data(dir / "d")).code == 0);
  const Run r = cli({"evaluate", "--pred", (dir / "d" / "clean").string(), "--clean", (dir / "d" / "clean").string(),
                     "--method", "ref"});
  REQUIRE(r.code == 0);
  std::istringstream lines(r.out);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "slice_index,method,psnr_db,ssim");
  int rows = 0;
  while (std::getline(lines, line)) {
    if (line.rfind("std,", 0) == 0) continue;
    CHECK(line.find(",inf,1") != std::string::npos);
    ++rows;
  }
  CHECK(rows == 6 * 2 + 2);
}

TEST_CASE("evaluate lists orphaned files") {
  const auto dir = temp_dir("cli_orphan");
  REQUIRE(cli(small_data(dir / "d")).code == 0);
  fs::create_directories(dir / "p");
  fs::copy_file(dir / "d" / "noisy" / noisy_file_name(0, Contrast::A, 0), dir / "p" / noisy_file_name(0, Contrast::A, 0));
  const Run r = cli({"evaluate", "--pred", (dir / "p").string(), "--clean", (dir / "d" / "clean").string()});
  CHECK(r.code == 3);
  CHECK(r.err.find(clean_file_name(1, Contrast::A)) != std::string::npos);
}

TEST_CASE("train, denoise and a manifest rerun") {
  const auto dir = temp_dir("cli_train");
  REQUIRE(cli(small_data(dir / "d")).code == 0);
  const Run t = cli({"train", "--scheme", "n2c_bfs", "--data", (dir / "d").string(), "--out", (dir / "t").string(),
                     "--max-epochs", "2", "--seed", "3"});
  REQUIRE(t.code == 0);
  CHECK(t.out.find("joint epoch 2") != std::string::npos);
  const auto manifest = nlohmann::json::parse(slurp(dir / "t" / "manifest.json"));
  CHECK(manifest["command"] == "train");
  CHECK(manifest["config"]["max_epochs"] == "2");
  CHECK(manifest.contains("finished"));

  const Run again = cli({"train", "--manifest", (dir / "t" / "manifest.json").string(), "--out", (dir / "u").string()});
  REQUIRE(again.code == 0);
  CHECK(slurp(dir / "t" / "model.n2cm") == slurp(dir / "u" / "model.n2cm"));
  CHECK(slurp(dir / "t" / "report.json") == slurp(dir / "u" / "report.json"));

  // A constant image is a fixed point of the filter stack; values stay in range.
  Image flat = Image::from_grid(Grid(32, 32, 0.4), Contrast::A, -1);
  fs::create_directories(dir / "flat");
  write_image(flat, dir / "flat" / clean_file_name(0, Contrast::A));
  REQUIRE(cli({"denoise", "--model", (dir / "t" / "model.n2cm").string(), "--out", (dir / "o").string(),
               (dir / "flat").string(), (dir / "d" / "noisy" / noisy_file_name(1, Contrast::A, 0)).string()})
              .code == 0);
  const Image back = read_image(dir / "o" / clean_file_name(0, Contrast::A));
  CHECK(back.data == flat.data);
  const Image in = read_image(dir / "d" / "noisy" / noisy_file_name(1, Contrast::A, 0));
  const Image den = read_image(dir / "o" / noisy_file_name(1, Contrast::A, 0));
  CHECK(*std::min_element(den.data.begin(), den.data.end()) >= *std::min_element(in.data.begin(), in.data.end()));
  CHECK(den.max_value() <= in.max_value());

  // The model denoises contrast A only.
  CHECK(cli({"denoise", "--model", (dir / "t" / "model.n2cm").string(), "--out", (dir / "o2").string(),
             (dir / "d" / "noisy" / noisy_file_name(1, Contrast::B, 0)).string()})
            .code == 3);
}

TEST_CASE("gradcheck exit codes") {
  CHECK(cli({"gradcheck", "--target", "bilateral"}).code == 0);
  const Run bad = cli({"gradcheck", "--target", "bilateral", "--inject-fault", "sigma_r"});
  CHECK(bad.code == 4);
  CHECK(bad.out.find("FAIL") != std::string::npos);
  CHECK(cli({"gradcheck", "--target", "everything"}).code == 2);
}
