#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "inrlab/checkpoint.hpp"
#include "inrlab/config.hpp"
#include "inrlab/experiment.hpp"
#include "inrlab/png.hpp"

using namespace inrlab;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("inrlab_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Json minimal(const std::string& task, const std::string& model, std::size_t iters) {
  return {{"task", {{"kind", task}}}, {"model", {{"kind", model}}}, {"optim", {{"iters", iters}}}};
}

}  // namespace

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

TEST(Config, DefaultsAreFilledAndSnapshotRoundTrips) {
  Json j = minimal("image", "rhino_ngp", 10);
  j["model"]["grid"] = {{"levels", 4}};
  j["seed"] = 9;
  const ExperimentConfig c = config_from_json(j);
  EXPECT_EQ(c.model.kind, ModelKind::rhino_ngp);
  EXPECT_EQ(c.model.grid.num_levels, 4u);
  EXPECT_EQ(c.model.grid.log2_table_size, 14u);
  EXPECT_EQ(c.model.table_resolution, (std::vector<std::size_t>{33, 33}));
  EXPECT_EQ(c.seed, 9u);

  const std::string snap = config_snapshot(c);
  const ExperimentConfig back = config_from_json(Json::parse(snap));
  EXPECT_EQ(config_snapshot(back), snap);
  EXPECT_EQ(to_json(back), to_json(c));
}

TEST(Config, MissingAndUnknownFieldsAreEachListed) {
  Json j = {{"task", {{"kind", "stripe"}, {"colour", "red"}}}, {"optim", Json::object()}};
  try {
    config_from_json(j);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("task.colour"), std::string::npos) << msg;
    EXPECT_NE(msg.find("model.kind"), std::string::npos) << msg;
    EXPECT_NE(msg.find("optim.iters"), std::string::npos) << msg;
    EXPECT_EQ(msg.find("task.kind"), std::string::npos) << msg;
  }
}

TEST(Config, ValidationRejectsBadValues) {
  Json j = minimal("cube", "ngp", 10);
  EXPECT_THROW(config_from_json(j), ConfigError);
  j = minimal("stripe", "ngp", 0);
  EXPECT_THROW(config_from_json(j), ConfigError);
  j = minimal("stripe", "transformer", 10);
  EXPECT_THROW(config_from_json(j), ConfigError);
  j = minimal("stripe", "ngp", 10);
  j["optim"]["lr"] = -1.0;
  EXPECT_THROW(config_from_json(j), ConfigError);
  EXPECT_THROW(config_from_json(Json::array()), ConfigError);
}

TEST(Config, OverridesParseJsonOrFallBackToString) {
  Json j = minimal("stripe", "diner", 10);
  apply_override(j, "model.kind=ngp");
  apply_override(j, "optim.lr=5e-4");
  apply_override(j, "model.grid.levels=3");
  apply_override(j, "model.table_resolution=[65]");
  apply_override(j, "export.slices=true");
  const ExperimentConfig c = config_from_json(j);
  EXPECT_EQ(c.model.kind, ModelKind::ngp);
  EXPECT_DOUBLE_EQ(c.optim.lr, 5e-4);
  EXPECT_EQ(c.model.grid.num_levels, 3u);
  EXPECT_EQ(c.model.table_resolution, (std::vector<std::size_t>{65}));
  EXPECT_TRUE(c.exports.slices);
  EXPECT_THROW(apply_override(j, "no_equals_sign"), ConfigError);
  apply_override(j, "seed=4");
  EXPECT_THROW(apply_override(j, "seed.inner=1"), ConfigError);
}

TEST(Config, LoadFromFileWithOverrides) {
  const fs::path dir = scratch_dir("config_load");
  const fs::path p = dir / "c.json";
  std::ofstream(p) << minimal("stripe", "pe_mlp", 5).dump();
  const ExperimentConfig c = load_config(p.string(), {"seed=3"});
  EXPECT_EQ(c.seed, 3u);
  std::ofstream(dir / "bad.json") << "{ not json";
  EXPECT_THROW(load_config((dir / "bad.json").string()), ConfigError);
  EXPECT_THROW(load_config((dir / "absent.json").string()), ConfigError);
}

// ---------------------------------------------------------------------------
// Checkpoint
// ---------------------------------------------------------------------------

TEST(Checkpoint, SaveLoadSaveIsBitExact) {
  const ExperimentConfig c = config_from_json(minimal("image", "rhino_ngp", 1));
  const Model m = build_model(model_config_for(c, build_task(c.task)), 4);
  const fs::path dir = scratch_dir("checkpoint");
  save_checkpoint(m, (dir / "a.bin").string());

  Model other = build_model(model_config_for(c, build_task(c.task)), 99);
  load_checkpoint(other, (dir / "a.bin").string());
  save_checkpoint(other, (dir / "b.bin").string());

  const auto read = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  EXPECT_EQ(read(dir / "a.bin"), read(dir / "b.bin"));
  const auto pa = m.parameters();
  const auto pb = other.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i]->values, pb[i]->values);
}

TEST(Checkpoint, PreservesSpecialValuesAndSignedZero) {
  std::vector<CheckpointEntry> e = {{"p", 1, 4, {-0.0, 1e-310, std::numeric_limits<double>::max(), 0.1}}};
  const auto back = decode_checkpoint(encode_checkpoint(e));
  ASSERT_EQ(back.size(), 1u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(std::bit_cast<std::uint64_t>(back[0].values[i]), std::bit_cast<std::uint64_t>(e[0].values[i]));
  }
}

TEST(Checkpoint, CorruptOrMismatchedInputIsRejected) {
  const std::string good = encode_checkpoint({{"p", 2, 1, {1.0, 2.0}}});
  EXPECT_THROW(decode_checkpoint("NOTACKPT"), ConfigError);
  EXPECT_THROW(decode_checkpoint(good.substr(0, good.size() - 3)), ConfigError);
  EXPECT_THROW(decode_checkpoint(good + "x"), ConfigError);

  const ExperimentConfig a = config_from_json(minimal("stripe", "diner", 1));
  const ExperimentConfig b = config_from_json(minimal("stripe", "ngp", 1));
  const Model ma = build_model(model_config_for(a, build_task(a.task)), 0);
  Model mb = build_model(model_config_for(b, build_task(b.task)), 0);
  EXPECT_THROW(restore_parameters(mb, snapshot_parameters(ma)), ConfigError);
  EXPECT_THROW(load_checkpoint(mb, "/nonexistent/ck.bin"), IoError);
}

// ---------------------------------------------------------------------------
// PNG
// ---------------------------------------------------------------------------

TEST(Png, QuantizationRoundsHalfUpAndClamps) {
  EXPECT_EQ(quantize_unit(0.0), 0);
  EXPECT_EQ(quantize_unit(1.0), 255);
  EXPECT_EQ(quantize_unit(-0.3), 0);
  EXPECT_EQ(quantize_unit(1.7), 255);
  EXPECT_EQ(quantize_unit(0.5 / 255.0), 1);
  EXPECT_EQ(quantize_unit(127.5 / 255.0), 128);
}

TEST(Png, WriteThenReadRecoversQuantizedPixels) {
  const fs::path dir = scratch_dir("png");
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix px(6 * 5, 3);
  for (Eigen::Index i = 0; i < px.size(); ++i) px.data()[i] = u(rng);
  write_png((dir / "x.png").string(), px, 6, 5);
  const PngImage img = read_png((dir / "x.png").string());
  ASSERT_EQ(img.height, 6u);
  ASSERT_EQ(img.width, 5u);
  for (Eigen::Index i = 0; i < px.size(); ++i) {
    EXPECT_DOUBLE_EQ(img.pixels.data()[i], quantize_unit(px.data()[i]) / 255.0);
  }
  EXPECT_THROW(read_png((dir / "missing.png").string()), IoError);
  EXPECT_THROW(write_png((dir / "nodir" / "x.png").string(), px, 6, 5), IoError);
}

TEST(Png, GrayscaleInputExpandsToRgb) {
  const fs::path dir = scratch_dir("png_gray");
  const Matrix gray = Matrix::Constant(4, 1, 0.5);
  write_png((dir / "g.png").string(), gray, 2, 2);
  const PngImage img = read_png((dir / "g.png").string());
  EXPECT_EQ(img.pixels.cols(), 3);
  EXPECT_DOUBLE_EQ(img.pixels(3, 2), 128.0 / 255.0);
}

// ---------------------------------------------------------------------------
// Run artifacts
// ---------------------------------------------------------------------------

TEST(Artifacts, MetricsHaveOneRowPerIteration) {
  Json j = minimal("stripe", "diner", 25);
  j["optim"]["eval_interval"] = 10;
  const TrainedRun r = train_experiment(config_from_json(j));
  const std::string csv = metrics_csv(r.record);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 26);
  EXPECT_EQ(csv.rfind("iter,loss,", 0), 0u);
  EXPECT_NE(csv.find("\n10,"), std::string::npos);
}

TEST(Artifacts, NumbersRoundTripThroughText) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456.789}) EXPECT_EQ(std::stod(format_number(v)), v);
  EXPECT_EQ(format_number(std::nan("")), "");
}

TEST(Artifacts, RunDirectoryContents) {
  Json j = minimal("image", "diner", 3);
  j["task"]["height"] = 8;
  j["task"]["width"] = 8;
  j["export"] = {{"slices", true}, {"slice_fixed", {0.0, 0.0}}, {"profile_samples", 16}};
  const TrainedRun r = train_experiment(config_from_json(j));
  const fs::path dir = scratch_dir("artifacts");
  write_run_artifacts(r, dir);
  for (const char* f : {"config.snapshot", "metrics.csv", "summary.json", "timing.json", "checkpoint.bin", "recon.png",
                        "target.png", "slices/slice.csv", "slices/overlay.csv", "slices/slice.png",
                        "slices/profile.csv"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  std::ifstream in(dir / "summary.json");
  const Json s = Json::parse(in);
  EXPECT_EQ(s["config"], to_json(r.config));
  EXPECT_EQ(s["iters_completed"], 3);
}

TEST(Artifacts, UnwritableOutputDirectoryIsAnIoError) {
  EXPECT_THROW(prepare_output_dir("/proc/inrlab_cannot_write_here"), IoError);
}
