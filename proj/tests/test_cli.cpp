#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sar/dataio.hpp"
#include "sar/depgraph.hpp"
#include "sar/model.hpp"

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SAR_CLI_PATH) + " " + args + " >cli_out.txt 2>cli_err.txt";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("cli exit codes: success, usage error, runtime error") {
  TempDir tmp("cli_codes");
  CHECK(run_cli("graph build --schedule ar --frames 3 --out cli_codes/g") == 0);
  CHECK(run_cli("graph build --schedule ar") == 2);         // missing --frames
  CHECK(run_cli("bogus-subcommand") == 2);                  // unknown command
  CHECK(run_cli("train --data missing.json --schedule cli_codes/g.json "
                "--model-config missing_cfg.json --out cli_codes/t") == 1);
  CHECK(run_cli("--help") == 0);
}

TEST_CASE("graph build writes the paper keyframe schedule and its DOT") {
  TempDir tmp("cli_graph");
  REQUIRE(run_cli("graph build --schedule three-stage --frames 29 --keyframes 1,9,19,29 "
                  "--out cli_graph/sched") == 0);
  const sar::Schedule s = sar::load_schedule("cli_graph/sched.json");
  const sar::Schedule expect =
      sar::topological_schedule(sar::build_three_stage(29, {1, 9, 19, 29}));
  CHECK(s.order == expect.order);
  CHECK(s.deps == expect.deps);
  CHECK(s.source == expect.source);
  CHECK(fs::exists("cli_graph/sched.dot"));
  const std::string out = slurp("cli_out.txt");
  CHECK(out.find("levels:") != std::string::npos);
  CHECK(out.find("order:") != std::string::npos);

  // ar graph matches the library builder too
  REQUIRE(run_cli("graph build --schedule ar --frames 3 --out cli_graph/ar") == 0);
  const sar::Schedule ar = sar::load_schedule("cli_graph/ar.json");
  CHECK(ar.order == std::vector<long>{1, 2, 3});

  REQUIRE(run_cli("graph export --schedule binary --frames 7 --out cli_graph/b.dot") == 0);
  CHECK(slurp("cli_graph/b.dot").find("digraph") != std::string::npos);
}

TEST_CASE("data synth writes a manifest that splits at the source level") {
  TempDir tmp("cli_synth");
  REQUIRE(run_cli("data synth --out cli_synth --count 10 --joints 3 --length 7 --fps 30 "
                  "--seed 4 --ratios 0.7,0.1,0.2") == 0);
  const auto manifest = sar::load_manifest("cli_synth/manifest.json");
  CHECK(manifest.size() == 10);
  long train = 0, val = 0, test = 0;
  for (const auto& e : manifest) {
    CHECK(fs::exists("cli_synth/" + e.path));
    train += e.split == "train";
    val += e.split == "val";
    test += e.split == "test";
  }
  CHECK(train == 7);
  CHECK(val == 1);
  CHECK(test == 2);
  const sar::Motion m = sar::load_motion("cli_synth/" + manifest.front().path);
  CHECK(m.frame_count() == 7);
  CHECK(m.joint_count() == 3);
}

TEST_CASE("train, infer, and eval run end to end at a tiny scale") {
  TempDir tmp("cli_e2e");
  REQUIRE(run_cli("graph build --schedule three-stage --frames 3 --keyframes 2 "
                  "--out cli_e2e/sched") == 0);
  REQUIRE(run_cli("data synth --out cli_e2e/data --count 6 --joints 2 --length 5 --fps 30 "
                  "--seed 9 --ratios 0.5,0.25,0.25") == 0);

  sar::ModelConfig cfg;
  cfg.joints = 2;
  cfg.joint_dim = 4;
  cfg.spatial_blocks = 1;
  cfg.spatial_heads = 2;
  cfg.temporal_blocks = 1;
  cfg.temporal_heads = 2;
  cfg.ff_multiplier = 2;
  cfg.positions = 5;
  cfg.save("cli_e2e/model_config.json");

  REQUIRE(run_cli("train --data cli_e2e/data/manifest.json --schedule cli_e2e/sched.json "
                  "--model-config cli_e2e/model_config.json --out cli_e2e/run "
                  "--steps1 5 --steps2 2 --lr 0.001 --seed 3 --batch 2") == 0);
  CHECK(fs::exists("cli_e2e/run/model.sarm"));
  CHECK(fs::exists("cli_e2e/run/model_step1.sarm"));
  CHECK(fs::exists("cli_e2e/run/losses.csv"));
  CHECK(fs::exists("cli_e2e/run/config.json"));
  CHECK(fs::exists("cli_e2e/run/schedule.json"));
  const std::string csv = slurp("cli_e2e/run/losses.csv");
  CHECK(csv.rfind("step,split,loss,seconds", 0) == 0);

  // ground-truth directory for eval: test-split sequences
  fs::create_directories("cli_e2e/gt");
  fs::create_directories("cli_e2e/pred_sar");
  fs::create_directories("cli_e2e/pred_slerp");
  long count = 0;
  for (const auto& e : sar::load_manifest("cli_e2e/data/manifest.json")) {
    if (e.split != "test") continue;
    fs::copy_file("cli_e2e/data/" + e.path, "cli_e2e/gt/" + e.path);
    REQUIRE(run_cli("infer --method sar --model cli_e2e/run --input cli_e2e/gt/" + e.path +
                    " --out cli_e2e/pred_sar/" + e.path) == 0);
    REQUIRE(run_cli("infer --method slerp --input cli_e2e/gt/" + e.path +
                    " --out cli_e2e/pred_slerp/" + e.path) == 0);
    const sar::Motion pred = sar::load_motion("cli_e2e/pred_sar/" + e.path);
    CHECK(pred.frame_count() == 3);  // T interior frames
    ++count;
  }
  REQUIRE(count > 0);

  REQUIRE(run_cli("eval --gt cli_e2e/gt --pred sar=cli_e2e/pred_sar "
                  "--pred slerp=cli_e2e/pred_slerp --out cli_e2e/report.csv") == 0);
  const std::string report = slurp("cli_e2e/report.csv");
  CHECK(report.rfind("model,mpjae,mpjpe,neighbor_l2_gen,neighbor_l2_gt,neighbor_gap,npss", 0) ==
        0);
  CHECK(report.find("sar,") != std::string::npos);
  CHECK(report.find("slerp,") != std::string::npos);

  // evaluating ground truth against itself gives an all-zero row
  fs::create_directories("cli_e2e/pred_gt");
  for (const auto& e : sar::load_manifest("cli_e2e/data/manifest.json")) {
    if (e.split != "test") continue;
    const sar::Motion full = sar::load_motion("cli_e2e/gt/" + e.path);
    sar::Motion interior;
    interior.fps = full.fps;
    interior.frames.assign(full.frames.begin() + 1, full.frames.end() - 1);
    sar::save_motion(interior, "cli_e2e/pred_gt/" + e.path);
  }
  REQUIRE(run_cli("eval --gt cli_e2e/gt --pred gt=cli_e2e/pred_gt --out cli_e2e/report_gt.csv") ==
          0);
  std::istringstream rows(slurp("cli_e2e/report_gt.csv"));
  std::string line;
  std::getline(rows, line);  // header
  std::getline(rows, line);
  CHECK(line.rfind("gt,0,", 0) == 0);
}

TEST_CASE("identical seeds give byte-identical checkpoints") {
  TempDir tmp("cli_seed");
  REQUIRE(run_cli("graph build --schedule three-stage --frames 3 --keyframes 2 "
                  "--out cli_seed/sched") == 0);
  REQUIRE(run_cli("data synth --out cli_seed/data --count 4 --joints 2 --length 5 --fps 30 "
                  "--seed 2 --ratios 1.0,0.0,0.0") == 0);
  sar::ModelConfig cfg;
  cfg.joints = 2;
  cfg.joint_dim = 4;
  cfg.spatial_blocks = 1;
  cfg.spatial_heads = 2;
  cfg.temporal_blocks = 1;
  cfg.temporal_heads = 2;
  cfg.ff_multiplier = 2;
  cfg.positions = 5;
  cfg.save("cli_seed/model_config.json");
  for (const char* dir : {"cli_seed/a", "cli_seed/b"}) {
    REQUIRE(run_cli(std::string("train --data cli_seed/data/manifest.json "
                                "--schedule cli_seed/sched.json "
                                "--model-config cli_seed/model_config.json --out ") +
                    dir + " --steps1 4 --steps2 2 --lr 0.001 --seed 11 --batch 2") == 0);
  }
  CHECK(slurp("cli_seed/a/model.sarm") == slurp("cli_seed/b/model.sarm"));
  CHECK(!slurp("cli_seed/a/model.sarm").empty());
}

TEST_CASE("eval rejects mismatched prediction sets") {
  TempDir tmp("cli_mismatch");
  fs::create_directories("cli_mismatch/gt");
  fs::create_directories("cli_mismatch/pred");
  const auto motions = sar::synth_generate(2, 2, 5, 30.0, 3);
  sar::save_motion(motions[0], "cli_mismatch/gt/a.json");
  sar::save_motion(motions[1], "cli_mismatch/gt/b.json");
  sar::Motion interior;
  interior.fps = 30.0;
  interior.frames.assign(motions[0].frames.begin() + 1, motions[0].frames.end() - 1);
  sar::save_motion(interior, "cli_mismatch/pred/a.json");
  CHECK(run_cli("eval --gt cli_mismatch/gt --pred m=cli_mismatch/pred "
                "--out cli_mismatch/r.csv") == 1);
  CHECK(slurp("cli_err.txt").find("b.json") != std::string::npos);
}

TEST_CASE("config file supplies defaults and flags still win") {
  TempDir tmp("cli_cfg");
  std::ofstream("cli_cfg/conf.json") << "{\"frames\": 5, \"keyframes\": [3]}";
  REQUIRE(run_cli("graph build --schedule three-stage --config cli_cfg/conf.json "
                  "--out cli_cfg/a") == 0);
  CHECK(sar::load_schedule("cli_cfg/a.json").n_positions == 7);
  REQUIRE(run_cli("graph build --schedule three-stage --config cli_cfg/conf.json --frames 7 "
                  "--keyframes 4 --out cli_cfg/b") == 0);
  CHECK(sar::load_schedule("cli_cfg/b.json").n_positions == 9);
}
