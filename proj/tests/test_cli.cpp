// Copyright (c) 2026 the ravg authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end checks of the ravg binary: exit codes, --help golden files, and
// idempotence of outputs under identical flags and seeds.
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ravg/rtf.hpp"

using namespace ravg;
namespace fs = std::filesystem;

namespace {

const char* kBin = RAVG_BIN;
const char* kGolden = RAVG_GOLDEN_DIR;

fs::path work_dir() {
  auto p = fs::temp_directory_path() / "ravg_cli_tests";
  fs::create_directories(p);
  return p;
}

int run_cmd(const std::string& args, std::string* output = nullptr) {
  const fs::path out_file = work_dir() / "cmd_output.txt";
  const std::string cmd =
      std::string(kBin) + " " + args + " > " + out_file.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  if (output) {
    std::ifstream is(out_file);
    std::stringstream ss;
    ss << is.rdbuf();
    *output = ss.str();
  }
  return WEXITSTATUS(rc);
}

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE(static_cast<bool>(is));
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

bool same_bytes(const fs::path& a, const fs::path& b) {
  return read_file(a) == read_file(b);
}

// shared tiny fixtures, built once
struct Fixtures {
  fs::path root = work_dir() / "fix";
  fs::path data = root / "data";
  fs::path val = root / "val";
  fs::path seq = root / "seq";
  fs::path run = root / "run";
  Fixtures() {
    if (fs::exists(root / ".ready")) return;
    fs::create_directories(root);
    REQUIRE(run_cmd("gen-data --scene pan-checker --frames 9 --spp 16 --width 32 "
                    "--height 32 --tile 0 --seed 3 --out " + data.string()) == 0);
    REQUIRE(run_cmd("gen-data --scene rot-disks --frames 7 --spp 16 --width 32 "
                    "--height 32 --tile 0 --seed 4 --out " + val.string()) == 0);
    REQUIRE(run_cmd("gen-data --scene static-checker --frames 6 --spp 16 --width 32 "
                    "--height 32 --seed 5 --sequence --out " + seq.string()) == 0);
    REQUIRE(run_cmd("train --data " + data.string() + " --val " + val.string() +
                    " --out " + run.string() +
                    " --steps 8 --val-every 8 --channels 8 --blocks 2 "
                    "--ra-positions 2 --skip-after-ra 1 --seed 7") == 0);
    std::ofstream(root / ".ready") << "ok\n";
  }
};

Fixtures& fixtures() {
  static Fixtures f;
  return f;
}

}  // namespace

TEST_CASE("usage errors exit 1") {
  CHECK(run_cmd("") == 1);
  CHECK(run_cmd("no-such-command") == 1);
  CHECK(run_cmd("gen-data --unknown-flag 3 --out /tmp/x") == 1);
  CHECK(run_cmd("gen-data --out /tmp/x --spp 0") == 1);
  CHECK(run_cmd("gen-data --out /tmp/x --scene no-such-preset") == 1);
  std::string out;
  CHECK(run_cmd("train --data a --val b --out c --steps 0", &out) == 1);
}

TEST_CASE("data errors exit 2") {
  CHECK(run_cmd("train --data /nonexistent/ds --val /nonexistent/ds2 --out /tmp/o") == 2);
  CHECK(run_cmd("denoise --checkpoint /nonexistent/ck --input /nonexistent/seq "
                "--out /tmp/o") == 2);
  CHECK(run_cmd("metrics --a /nonexistent/a.rtf --b /nonexistent/b.rtf") == 2);
}

TEST_CASE("--help output matches the golden files") {
  for (const char* sub : {"gen-data", "train", "denoise", "stats", "metrics"}) {
    std::string out;
    CHECK(run_cmd(std::string(sub) + " --help", &out) == 0);
    const fs::path golden = fs::path(kGolden) / ("help_" + std::string(sub) + ".txt");
    INFO("golden file: " << golden.string());
    CHECK(out == read_file(golden));
  }
}

TEST_CASE("gen-data is idempotent given identical flags and seeds") {
  const fs::path a = work_dir() / "det_a";
  const fs::path b = work_dir() / "det_b";
  fs::remove_all(a);
  fs::remove_all(b);
  const std::string flags =
      "gen-data --scene tex-quads --frames 7 --spp 16 --width 32 --height 32 "
      "--tile 0 --seed 11 --out ";
  std::string out_a, out_b;
  CHECK(run_cmd(flags + a.string(), &out_a) == 0);
  CHECK(run_cmd(flags + b.string(), &out_b) == 0);
  // stdout differs only in the target path; the sample count must agree
  CHECK(out_a.substr(0, out_a.find(" to ")) == out_b.substr(0, out_b.find(" to ")));
  CHECK(same_bytes(a / "manifest.json", b / "manifest.json"));
  CHECK(same_bytes(a / "s0000" / "sample.rtf", b / "s0000" / "sample.rtf"));
  CHECK(same_bytes(a / "s0002" / "sample.rtf", b / "s0002" / "sample.rtf"));
}

TEST_CASE("train produces a log with one entry per step and resumes the counter") {
  auto& f = fixtures();
  const std::string log = read_file(f.run / "train_log.jsonl");
  int step_lines = 0;
  std::stringstream ss(log);
  std::string line;
  while (std::getline(ss, line))
    if (line.find("\"type\":\"step\"") != std::string::npos) ++step_lines;
  CHECK(step_lines == 8);

  std::string out;
  CHECK(run_cmd("train --data " + f.data.string() + " --val " + f.val.string() +
                " --out " + (f.root / "run_resumed").string() + " --resume " +
                (f.run / "last").string() +
                " --steps 12 --val-every 12 --channels 8 --blocks 2 "
                "--ra-positions 2 --skip-after-ra 1 --seed 7", &out) == 0);
  CHECK(out.find("trained 12 steps") != std::string::npos);
}

TEST_CASE("train is idempotent given identical flags and seeds") {
  auto& f = fixtures();
  const fs::path run_b = f.root / "run_b";
  fs::remove_all(run_b);
  CHECK(run_cmd("train --data " + f.data.string() + " --val " + f.val.string() +
                " --out " + run_b.string() +
                " --steps 8 --val-every 8 --channels 8 --blocks 2 "
                "--ra-positions 2 --skip-after-ra 1 --seed 7") == 0);
  CHECK(same_bytes(f.run / "train_log.jsonl", run_b / "train_log.jsonl"));
  CHECK(same_bytes(f.run / "best" / "params.rtf", run_b / "best" / "params.rtf"));
  CHECK(same_bytes(f.run / "last" / "params.rtf", run_b / "last" / "params.rtf"));
}

TEST_CASE("denoise writes outputs, previews and metrics; runs are idempotent") {
  auto& f = fixtures();
  const fs::path out_a = f.root / "den_a";
  const fs::path out_b = f.root / "den_b";
  fs::remove_all(out_a);
  fs::remove_all(out_b);
  const std::string flags = "denoise --checkpoint " + (f.run / "best").string() +
                            " --input " + f.seq.string() + " --passes 1 --png --out ";
  CHECK(run_cmd(flags + out_a.string()) == 0);
  CHECK(run_cmd(flags + out_b.string()) == 0);
  CHECK(fs::exists(out_a / "denoised_0000.rtf"));
  CHECK(fs::exists(out_a / "denoised_0005.rtf"));
  CHECK(fs::exists(out_a / "denoised_0000.png"));
  CHECK(fs::exists(out_a / "metrics.jsonl"));
  CHECK(same_bytes(out_a / "denoised_0003.rtf", out_b / "denoised_0003.rtf"));
  CHECK(same_bytes(out_a / "metrics.jsonl", out_b / "metrics.jsonl"));

  // six input frames -> six outputs with clamped edge windows
  int count = 0;
  for (auto& e : fs::directory_iterator(out_a))
    if (e.path().extension() == ".rtf") ++count;
  CHECK(count == 6);
}

TEST_CASE("denoise --aov equals the rgb output when the aov duplicates the input") {
  auto& f = fixtures();
  std::vector<RawTensor> aov_records;
  for (int i = 0; i < 6; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "f%04d.rtf", i);
    auto records = rtf_read((f.seq / name).string());
    RawTensor r = rtf_find(records, "rgb");
    r.name = "aov_" + std::to_string(i);
    aov_records.push_back(std::move(r));
  }
  const fs::path aov_file = f.root / "aov.rtf";
  rtf_write(aov_file.string(), aov_records);
  const fs::path out = f.root / "den_aov";
  fs::remove_all(out);
  CHECK(run_cmd("denoise --checkpoint " + (f.run / "best").string() + " --input " +
                f.seq.string() + " --aov " + aov_file.string() + " --out " +
                out.string()) == 0);
  for (int i = 0; i < 6; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "denoised_%04d.rtf", i);
    auto records = rtf_read((out / name).string());
    CHECK(rtf_find(records, "aov").f32 == rtf_find(records, "rgb").f32);
  }
}

TEST_CASE("stats reports per-frame weights that sum to one") {
  auto& f = fixtures();
  const fs::path out = f.root / "stats_out";
  fs::remove_all(out);
  std::string text;
  CHECK(run_cmd("stats --checkpoint " + (f.run / "best").string() + " --input " +
                f.seq.string() + " --contrib --out " + out.string(), &text) == 0);
  CHECK(fs::exists(out / "stats.jsonl"));
  CHECK(fs::exists(out / "contrib_0000.rtf"));
  // contribution images sum to 1 per pixel across frames
  auto contrib = raw_to_f32(rtf_find(rtf_read((out / "contrib_0002.rtf").string()),
                                     "contrib"));
  const std::size_t T = contrib.dim(0), HW = contrib.dim(1) * contrib.dim(2);
  for (std::size_t p = 0; p < HW; p += 7) {
    float s = 0.f;
    for (std::size_t t = 0; t < T; ++t) s += contrib.values()[t * HW + p];
    CHECK(s == doctest::Approx(1.f).epsilon(1e-4));
  }
}

TEST_CASE("metrics compares two rtf images") {
  auto& f = fixtures();
  const fs::path a = f.root / "ma.rtf";
  rtf_write(a.string(), {to_raw("rgb", Tensor::full({3, 16, 16}, 0.25f))});
  std::string out;
  CHECK(run_cmd("metrics --a " + a.string() + " --b " + a.string(), &out) == 0);
  CHECK(out.find("\"psnr\":\"inf\"") != std::string::npos);
  CHECK(out.find("\"ssim\":1.0") != std::string::npos);
}
