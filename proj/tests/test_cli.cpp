// Copyright (c) 2026 av2v contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string out;
};

CliResult run_cli(const std::string& args) {
  const std::string cmd = std::string(AV2V_CLI_PATH) + " " + args + " 2>/dev/null";
  CliResult result;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[512];
  while (std::fgets(buf, sizeof(buf), pipe) != nullptr) result.out += buf;
  const int status = ::pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

fs::path temp_dir(const char* name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_config(const fs::path& path, const std::string& extra = "") {
  std::ofstream out(path);
  out << "patch = 2\n"
         "base_channels = 8\n"
         "depth = 2\n"
         "decoder_layers = 4\n"
         "head_dim = 8\n"
         "text_embed_dim = 8\n"
         "frames_nominal = 2\n"
         "t_train = 30\n"
         "steps = 3\n"
         "l1 = 1\n"
         "l2 = 1,2\n"
         "l3 = 2,3\n"
      << extra;
}

void write_toy_frames(const fs::path& dir, int n, int size = 8) {
  fs::create_directories(dir);
  for (int i = 0; i < n; ++i) {
    std::vector<unsigned char> pix;
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double phase = (x + y + 2.0 * i) / size;
        pix.push_back(static_cast<unsigned char>(128 + 100 * std::sin(6.283 * phase)));
        pix.push_back(static_cast<unsigned char>(128 + 100 * std::cos(6.283 * phase)));
        pix.push_back(static_cast<unsigned char>(40 + 10 * i));
      }
    }
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%04d.ppm", i);
    std::ofstream out(dir / name, std::ios::binary);
    out << "P6\n" << size << ' ' << size << "\n255\n";
    out.write(reinterpret_cast<const char*>(pix.data()), static_cast<std::streamsize>(pix.size()));
  }
}

std::vector<std::uint8_t> file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
}

std::size_t count_matching(const fs::path& dir, const std::string& needle) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().filename().string().find(needle) != std::string::npos) {
      ++n;
    }
  }
  return n;
}

}  // namespace

TEST_CASE("usage errors exit 2") {
  CHECK(run_cli("").exit_code == 2);
  CHECK(run_cli("no-such-command").exit_code == 2);
  CHECK(run_cli("invert").exit_code == 2);  // --config is required
}

TEST_CASE("config errors exit 2, runtime errors exit 3") {
  const fs::path root = temp_dir("av2v_cli_errs");
  const fs::path cfg = root / "run.cfg";
  std::ofstream(cfg) << "bogus = 1\n";
  CHECK(run_cli("invert --config " + cfg.string() + " --frames x --out y").exit_code == 2);

  write_config(cfg);
  const fs::path empty = root / "empty";
  fs::create_directories(empty);
  CHECK(run_cli("metrics --config " + cfg.string() + " --frames " + empty.string()).exit_code ==
        3);
  fs::remove_all(root);
}

TEST_CASE("metrics prints 1.0 for a constant video") {
  const fs::path root = temp_dir("av2v_cli_metrics");
  const fs::path frames = root / "frames";
  fs::create_directories(frames);
  // four copies of one frame
  std::vector<unsigned char> pix(8 * 8 * 3, 77);
  for (int i = 0; i < 4; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%04d.ppm", i);
    std::ofstream out(frames / name, std::ios::binary);
    out << "P6\n8 8\n255\n";
    out.write(reinterpret_cast<const char*>(pix.data()), static_cast<std::streamsize>(pix.size()));
  }
  const CliResult result = run_cli("metrics --frames " + frames.string());
  CHECK(result.exit_code == 0);
  CHECK(std::strtod(result.out.c_str(), nullptr) == 1.0);
  fs::remove_all(root);
}

TEST_CASE("identity edit reproduces the reconstruction files bit-exactly") {
  const fs::path root = temp_dir("av2v_cli_identity");
  const fs::path cfg = root / "run.cfg";
  write_config(cfg, "guidance_scale = 1\nt_prime_fraction = 1\n");
  const fs::path frames = root / "frames";
  write_toy_frames(frames, 3);

  const std::string base = " --config " + cfg.string();
  const fs::path ladder = root / "ladder";
  REQUIRE(run_cli("invert" + base + " --frames " + frames.string() + " --out " +
                  ladder.string()).exit_code == 0);

  const fs::path recon = root / "recon";
  REQUIRE(run_cli("reconstruct" + base + " --ladder " + ladder.string() + " --out " +
                  recon.string()).exit_code == 0);

  const std::vector<std::uint8_t> input_before = file_bytes(frames / "frame_0001.ppm");
  const fs::path edited = root / "edited";
  REQUIRE(run_cli("edit" + base + " --frames " + frames.string() + " --edited-first-frame " +
                  (frames / "frame_0000.ppm").string() + " --prompt \"\" --out " +
                  edited.string()).exit_code == 0);

  for (int i = 0; i < 3; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%04d.ppm", i);
    CHECK(file_bytes(recon / name) == file_bytes(edited / name));
  }
  // Inputs are read-only for every command.
  CHECK(file_bytes(frames / "frame_0001.ppm") == input_before);
  CHECK(count_matching(frames, ".ppm") == 3);
  fs::remove_all(root);
}

TEST_CASE("features emits |l1|+|l2|+|l3| visualization tensors per step") {
  const fs::path root = temp_dir("av2v_cli_features");
  const fs::path cfg = root / "run.cfg";
  write_config(cfg);
  const fs::path frames = root / "frames";
  write_toy_frames(frames, 8);

  const std::string base = " --config " + cfg.string();
  const fs::path ladder = root / "ladder";
  REQUIRE(run_cli("invert" + base + " --frames " + frames.string() + " --out " +
                  ladder.string()).exit_code == 0);

  const fs::path viz = root / "viz";
  REQUIRE(run_cli("features" + base + " --ladder " + ladder.string() + " --out " +
                  viz.string()).exit_code == 0);
  // 3 steps x (1 + 2 + 2) tensors, no pixmaps without --pgm.
  CHECK(count_matching(viz, "viz_step") == 15);
  CHECK(count_matching(viz, ".pgm") == 0);
  fs::remove_all(root);
}

TEST_CASE("resolved.cfg alone reproduces a run") {
  const fs::path root = temp_dir("av2v_cli_resolved");
  const fs::path cfg = root / "run.cfg";
  write_config(cfg, "guidance_scale = 3\n");
  const fs::path frames = root / "frames";
  write_toy_frames(frames, 3);

  const fs::path out_a = root / "a";
  REQUIRE(run_cli("edit --config " + cfg.string() + " --frames " + frames.string() +
                  " --edited-first-frame " + (frames / "frame_0002.ppm").string() +
                  " --prompt \"make it rain\" --out " + out_a.string()).exit_code == 0);

  // The echoed configuration carries every key, including the input paths
  // and prompt, so it can drive the same run again by itself.
  const fs::path out_b = root / "b";
  REQUIRE(run_cli("edit --config " + (out_a / "resolved.cfg").string() + " --out " +
                  out_b.string()).exit_code == 0);
  for (int i = 0; i < 3; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%04d.ppm", i);
    CHECK(file_bytes(out_a / name) == file_bytes(out_b / name));
  }
  CHECK(file_bytes(out_a / "progress.log") == file_bytes(out_b / "progress.log"));
  fs::remove_all(root);
}

TEST_CASE("config path keys serve as flag defaults") {
  const fs::path root = temp_dir("av2v_cli_pathkeys");
  const fs::path frames = root / "frames";
  write_toy_frames(frames, 3);
  const fs::path cfg = root / "run.cfg";
  write_config(cfg, "frames = " + frames.string() + "\nout = " + (root / "ladder").string() +
                        "\n");
  REQUIRE(run_cli("invert --config " + cfg.string()).exit_code == 0);
  CHECK(fs::exists(root / "ladder" / "z_step_000"));
  fs::remove_all(root);
}
