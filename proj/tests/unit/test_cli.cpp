#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "lumiswap/checkpoint.hpp"
#include "lumiswap/evalharness.hpp"
#include "lumiswap/image_io.hpp"
#include "lumiswap/synthetic.hpp"
#include "support/temp_dir.hpp"

using namespace lumiswap;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run(const fs::path& dir, const std::string& args) {
  const auto err_path = dir / "stderr.txt";
  const std::string cmd = "cd " + dir.string() + " && " + std::string(LUMISWAP_CLI) + " " + args + " 2>" + err_path.string();
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(err_path);
  std::stringstream ss;
  ss << in.rdbuf();
  r.err = ss.str();
  return r;
}

struct Fixture {
  testing::TempDir dir;
  fs::path data, ckpt;
  Fixture() {
    synthetic::SceneOptions opts;
    opts.height = 32;
    opts.width = 48;
    data = dir.path() / "data";
    synthetic::write_dataset(data, 5, 3, opts);
    ckpt = dir.path() / "ckpt";
    save_model(init_params(ArchSpec{2, 4, 16, 4}, 1), ckpt);
  }
};

}  // namespace

TEST_CASE("enhance writes a PNG and reports metrics against the ground truth") {
  Fixture f;
  const auto out = f.dir.path() / "out.png";
  const auto r = run(f.dir.path(), "enhance --low " + (f.data / "low/4.png").string() + " --ref " +
                                       (f.data / "high/4.png").string() + " --ckpt " + f.ckpt.string() +
                                       " --out " + out.string() + " --gt " + (f.data / "high/4.png").string());
  REQUIRE(r.code == 0);
  REQUIRE(fs::exists(out));
  const auto expected = compare(load_image(out), load_image(f.data / "high/4.png"));
  double p = 0, s = 0;
  REQUIRE(std::sscanf(r.out.c_str(), "psnr_db=%lf ssim=%lf", &p, &s) == 2);
  CHECK(p == doctest::Approx(expected.psnr_db).epsilon(1e-4));
  CHECK(s == doctest::Approx(expected.ssim).epsilon(1e-4));
}

TEST_CASE("errors are one JSON line with input errors exiting 2") {
  Fixture f;
  auto r = run(f.dir.path(), "enhance --low a.png --ref b.png --ckpt " + (f.dir.path() / "missing").string() +
                                 " --out o.png");
  CHECK(r.code == 2);
  auto err = nlohmann::json::parse(r.err);
  CHECK(err["error"] == "not_found");
  CHECK(err["message"].get<std::string>().find("missing") != std::string::npos);

  r = run(f.dir.path(), "enhance --low a.png");
  CHECK(r.code == 2);
  CHECK(nlohmann::json::parse(r.err)["error"] == "usage");

  fs::create_directories(f.dir.path() / "empty");
  r = run(f.dir.path(), "multilevel --ckpt " + f.ckpt.string() + " --low " + (f.data / "low/1.png").string() +
                            " --refs " + (f.dir.path() / "empty").string());
  CHECK(r.code == 2);

  r = run(f.dir.path(), "enhance --low " + (f.data / "low/1.png").string() + " --ref " +
                            (f.data / "high/1.png").string() + " --ckpt " + f.ckpt.string() + " --out " +
                            (f.dir.path() / "no/such/dir/o.png").string());
  CHECK(r.code == 1);
  CHECK(nlohmann::json::parse(r.err)["error"] == "io");
}

TEST_CASE("multilevel names outputs and matches the harness report") {
  Fixture f;
  const auto refs = f.dir.path() / "refs";
  fs::create_directories(refs);
  fs::copy_file(f.data / "high/1.png", refs / "a.png");
  fs::copy_file(f.data / "low/2.png", refs / "b.png");
  const auto out = f.dir.path() / "ml";
  const auto r = run(f.dir.path(), "multilevel --ckpt " + f.ckpt.string() + " --low " +
                                       (f.data / "low/3.png").string() + " --refs " + refs.string() + " --out " +
                                       out.string());
  REQUIRE(r.code == 0);
  CHECK(fs::exists(out / "3__a.png"));
  CHECK(fs::exists(out / "3__b.png"));

  const ModelParams params = load_model(f.ckpt);
  const std::vector<NamedImage> named{{"a", load_image(refs / "a.png")}, {"b", load_image(refs / "b.png")}};
  const auto rows = multilevel_report(params, load_image(f.data / "low/3.png"), named);
  std::ifstream csv(out / "summary.csv");
  std::string line;
  std::getline(csv, line);
  CHECK(line == "ref,ref_mean_v,output_mean_v,output");
  for (const auto& row : rows) {
    REQUIRE(std::getline(csv, line));
    char id[64];
    double rv = 0, ov = 0;
    REQUIRE(std::sscanf(line.c_str(), "%63[^,],%lf,%lf", id, &rv, &ov) == 3);
    CHECK(std::string(id) == row.ref_id);
    CHECK(rv == doctest::Approx(row.ref_mean_v).epsilon(1e-5));
    CHECK(ov == doctest::Approx(row.output_mean_v).epsilon(1e-5));
  }
}

TEST_CASE("train, resume and eval through the command line") {
  Fixture f;
  const auto run_dir = f.dir.path() / "run";
  const std::string common = "train --data " + f.data.string() + " --train-count 4 --batch 2 --crop 16 "
                             "--depth 2 --base-channels 4 --latent-dim 16 --luminance-dim 4 ";
  auto r = run(f.dir.path(), common + "--lr 1e-3 --out " + run_dir.string() + " --epochs 2 --print-every 1");
  REQUIRE(r.code == 0);
  CHECK(r.out.find("\"step\":4") != std::string::npos);
  const auto ckpt = run_dir / "ckpt-00000004";
  REQUIRE(fs::exists(ckpt / "manifest.json"));

  r = run(f.dir.path(), common + "--lr 1e-3 --out " + run_dir.string() + " --epochs 3 --resume " + ckpt.string());
  REQUIRE(r.code == 0);
  CHECK(load_checkpoint(run_dir / "ckpt-00000006").step == 6);

  r = run(f.dir.path(), common + "--out " + run_dir.string() + " --lr 0");
  CHECK(r.code == 2);
  CHECK(nlohmann::json::parse(r.err)["error"] == "configuration");

  const auto report = f.dir.path() / "report.csv";
  r = run(f.dir.path(), "eval --ckpt " + ckpt.string() + " --data " + f.data.string() +
                            " --train-count 4 --out " + report.string());
  REQUIRE(r.code == 0);
  const auto expected = evaluate(ckpt, load_pairs(index_lol(f.data, 4).test));
  const auto bytes = read_file_bytes(report);
  CHECK(std::string(bytes.begin(), bytes.end()) == to_csv(expected));
}

TEST_CASE("config file supplies flags the command line leaves out") {
  Fixture f;
  const auto cfg = f.dir.path() / "eval.cfg";
  std::ofstream(cfg) << "# defaults\ntrain_count = 4\nsplit=train\n";
  auto r = run(f.dir.path(), "eval --ckpt " + f.ckpt.string() + " --data " + f.data.string() + " --config " +
                                 cfg.string());
  REQUIRE(r.code == 0);
  CHECK(r.out.find("4.png") != std::string::npos);
  CHECK(r.out.find("5.png") == std::string::npos);
  CHECK(!fs::exists(f.dir.path() / "multilevel"));

  r = run(f.dir.path(), "eval --ckpt " + f.ckpt.string() + " --data " + f.data.string() + " --split test --config " +
                            cfg.string());
  REQUIRE(r.code == 0);
  CHECK(r.out.find("5.png") != std::string::npos);

  std::ofstream(cfg) << "bogus=1\n";
  r = run(f.dir.path(), "eval --ckpt " + f.ckpt.string() + " --data " + f.data.string() + " --config " +
                            cfg.string());
  CHECK(r.code == 2);
}

TEST_CASE("diag hsv-recombine and synth") {
  Fixture f;
  auto r = run(f.dir.path(), "diag hsv-recombine --data " + f.data.string() + " --split all");
  REQUIRE(r.code == 0);
  CHECK(r.out.find("median") != std::string::npos);
  r = run(f.dir.path(), "synth --out " + (f.dir.path() / "s").string() + " --count 2 --height 16 --width 16");
  REQUIRE(r.code == 0);
  CHECK(fs::exists(f.dir.path() / "s/high/2.png"));
}
