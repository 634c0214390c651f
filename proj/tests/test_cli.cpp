// End-to-end checks of the command-line tool, run as a child process.

#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include "inrlab/config.hpp"

namespace fs = std::filesystem;
using inrlab::Json;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result cli(const std::string& args) {
  const std::string cmd = std::string(INRLAB_CLI_PATH) + " " + args + " 2>&1";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, p)) r.out += buf;
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("inrlab_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }

  fs::path write_config(const std::string& name, const Json& j) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << j.dump(2);
    return p;
  }

  fs::path dir_;
};

Json stripe_config(const std::string& model, std::size_t iters) {
  return {{"task", {{"kind", "stripe"}, {"points", 64}, {"bands", 4}}},
          {"model", {{"kind", model}, {"hidden_width", 16}}},
          {"optim", {{"iters", iters}, {"eval_interval", 10}}},
          {"seed", 1}};
}

}  // namespace

TEST_F(CliTest, RunWritesArtifactsWithOneMetricsRowPerIteration) {
  const auto cfg = write_config("c.json", stripe_config("rhino_diner", 30));
  const Result r = cli("run --config " + cfg.string() + " --out " + (dir_ / "run").string());
  ASSERT_EQ(r.code, 0) << r.out;
  const std::string csv = slurp(dir_ / "run" / "metrics.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 31);
  for (const char* f : {"config.snapshot", "summary.json", "checkpoint.bin"}) {
    EXPECT_TRUE(fs::exists(dir_ / "run" / f)) << f;
  }
}

TEST_F(CliTest, RerunIsByteIdentical) {
  const auto cfg = write_config("c.json", stripe_config("rhino_ngp", 25));
  ASSERT_EQ(cli("run --config " + cfg.string() + " --out " + (dir_ / "a").string()).code, 0);
  ASSERT_EQ(cli("run --config " + cfg.string() + " --out " + (dir_ / "b").string()).code, 0);
  for (const char* f : {"metrics.csv", "checkpoint.bin"}) {
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
  }
  // summaries differ only through output_dir
  Json sa = Json::parse(slurp(dir_ / "a" / "summary.json"));
  Json sb = Json::parse(slurp(dir_ / "b" / "summary.json"));
  sa["config"].erase("output_dir");
  sb["config"].erase("output_dir");
  EXPECT_EQ(sa, sb);
}

TEST_F(CliTest, SnapshotReloadsToTheSameConfig) {
  const auto cfg = write_config("c.json", stripe_config("ngp", 2));
  ASSERT_EQ(cli("run --config " + cfg.string() + " --out " + (dir_ / "a").string()).code, 0);
  const fs::path snap = dir_ / "a" / "config.snapshot";
  ASSERT_EQ(cli("run --config " + snap.string()).code, 0);
  EXPECT_EQ(slurp(snap), slurp(dir_ / "a" / "config.snapshot"));
}

TEST_F(CliTest, ConstantImageReachesPsnrCap) {
  Json j = {{"task", {{"kind", "image"}, {"height", 8}, {"width", 8}, {"pattern", "constant"}, {"stride", 1}}},
            {"model", {{"kind", "diner"}}},
            {"optim", {{"iters", 500}}}};
  const auto cfg = write_config("c.json", j);
  ASSERT_EQ(cli("run --config " + cfg.string() + " --out " + (dir_ / "r").string()).code, 0);
  const Json s = Json::parse(slurp(dir_ / "r" / "summary.json"));
  EXPECT_EQ(s["final"]["train_psnr"].get<double>(), 100.0);
  EXPECT_TRUE(fs::exists(dir_ / "r" / "recon.png"));
}

TEST_F(CliTest, SeedAndOverrideFlags) {
  const auto cfg = write_config("c.json", stripe_config("diner", 3));
  const Result r = cli("run --config " + cfg.string() + " --seed 42 --override model.kind=ngp --override optim.iters=4" +
                       " --out " + (dir_ / "r").string());
  ASSERT_EQ(r.code, 0) << r.out;
  const Json s = Json::parse(slurp(dir_ / "r" / "summary.json"));
  EXPECT_EQ(s["seed"], 42);
  EXPECT_EQ(s["model"], "ngp");
  EXPECT_EQ(s["iters_completed"], 4);
}

TEST_F(CliTest, ValidationErrorListsEachProblem) {
  const auto cfg = write_config("c.json", Json{{"task", {{"kind", "stripe"}}}, {"extra", 1}});
  const Result r = cli("run --config " + cfg.string());
  EXPECT_EQ(r.code, 2);
  const Json err = Json::parse(r.out.substr(r.out.find('{')));
  EXPECT_EQ(err["error"], "config");
  const std::string msg = err["message"];
  for (const char* f : {"'extra'", "model.kind", "optim.iters"}) EXPECT_NE(msg.find(f), std::string::npos) << msg;
}

TEST_F(CliTest, UnwritableOutputIsIoError) {
  const auto cfg = write_config("c.json", stripe_config("diner", 2));
  const Result r = cli("run --config " + cfg.string() + " --out /proc/inrlab_no");
  EXPECT_EQ(r.code, 4) << r.out;
  EXPECT_NE(r.out.find("\"io\""), std::string::npos);
}

TEST_F(CliTest, DivergentRunIsNumericError) {
  const auto cfg = write_config("c.json", stripe_config("pe_mlp", 50));
  const Result r = cli("run --config " + cfg.string() + " --override optim.lr=1e300 --out " + (dir_ / "r").string());
  EXPECT_EQ(r.code, 3) << r.out;
  const Json s = Json::parse(slurp(dir_ / "r" / "summary.json"));
  EXPECT_EQ(s["status"], "nan");
}

TEST_F(CliTest, CompareIdenticalConfigsHasZeroDeltas) {
  const auto a = write_config("a.json", stripe_config("diner", 20));
  const Result r = cli("compare --config " + a.string() + " --config " + a.string() + " --out " + (dir_ / "cmp").string());
  ASSERT_EQ(r.code, 0) << r.out;
  const Json j = Json::parse(slurp(dir_ / "cmp" / "compare.json"));
  for (const auto& row : j["rows"]) EXPECT_EQ(row["delta"].get<double>(), 0.0) << row.dump();
  EXPECT_EQ(j["heldout_mse_ratio"].get<double>(), 1.0);
}

TEST_F(CliTest, CompareReportsHeldoutRatio) {
  const auto a = write_config("a.json", stripe_config("diner", 20));
  const auto b = write_config("b.json", stripe_config("rhino_diner", 20));
  const Result r = cli("compare --config " + a.string() + " --config " + b.string() + " --out " + (dir_ / "cmp").string());
  ASSERT_EQ(r.code, 0) << r.out;
  const Json j = Json::parse(slurp(dir_ / "cmp" / "compare.json"));
  EXPECT_EQ(j["a"], "diner");
  EXPECT_EQ(j["b"], "rhino_diner");
  EXPECT_TRUE(j["heldout_mse_ratio"].is_number());
  EXPECT_NE(r.out.find("heldout_mse"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir_ / "cmp" / "compare.csv"));
}

TEST_F(CliTest, CompareRejectsDifferentTasks) {
  const auto a = write_config("a.json", stripe_config("diner", 5));
  Json other = stripe_config("diner", 5);
  other["task"]["points"] = 32;
  const auto b = write_config("b.json", other);
  EXPECT_EQ(cli("compare --config " + a.string() + " --config " + b.string()).code, 2);
}

TEST_F(CliTest, ExportSlicesFromCheckpoint) {
  Json j = stripe_config("rhino_diner", 20);
  j["model"]["table_width"] = 1;
  j["export"] = {{"profile_samples", 32}};
  const auto cfg = write_config("c.json", j);
  ASSERT_EQ(cli("run --config " + cfg.string() + " --out " + (dir_ / "run").string()).code, 0);
  const Result r = cli("export-slices --config " + cfg.string() + " --checkpoint " +
                       (dir_ / "run" / "checkpoint.bin").string() + " --out " + (dir_ / "sl").string());
  ASSERT_EQ(r.code, 0) << r.out;
  for (const char* f : {"slice.csv", "overlay.csv", "slice.png", "profile.csv"}) {
    EXPECT_TRUE(fs::exists(dir_ / "sl" / "slices" / f)) << f;
  }
  EXPECT_NE(r.out.find("held-out points nearest to their own band"), std::string::npos);
}

TEST_F(CliTest, GradCheckPassesAndCatchesCorruption) {
  EXPECT_EQ(cli("grad-check --configs 100").code, 0);
  const Result bad = cli("grad-check --configs 10 --corrupt-gradients 1.001");
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.out.find("[FAIL] linear"), std::string::npos) << bad.out;
}

TEST_F(CliTest, AcceptSubsetPrintsOneLinePerCriterion) {
  const Result r = cli("accept --only 7,8 --out " + dir_.string());
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("[PASS] 7"), std::string::npos);
  EXPECT_NE(r.out.find("[PASS] 8"), std::string::npos);
  EXPECT_EQ(Json::parse(slurp(dir_ / "acceptance.json")).size(), 2u);
}

TEST_F(CliTest, AcceptWithCorruptGradientsFailsCriterionOne) {
  const Result r = cli("accept --only 1 --corrupt-gradients 1.01");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("[FAIL] 1"), std::string::npos) << r.out;
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(cli("").code, 2);
  EXPECT_EQ(cli("fly").code, 2);
  EXPECT_EQ(cli("run").code, 2);
  EXPECT_EQ(cli("run --config " + (dir_ / "none.json").string()).code, 2);
}
