#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sys/wait.h>

#include "aecr/cli/commands.hpp"
#include "fixtures.hpp"

using namespace aecr;
using ::testing::HasSubstr;
using nlohmann::json;

namespace {

const std::filesystem::path kConfigs = AECR_CONFIG_DIR;
const std::filesystem::path kMetrics = std::filesystem::path(AECR_TEST_DATA) / "metrics";

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "aecr");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

json error_line(const std::string& err) {
  const auto start = err.rfind('{');
  return json::parse(err.substr(start));
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new test::TempDir;
    test::write_scenes(*dir_ / "src", 4, 20, 20, 3);
    const auto r = run({"synth", "--clear", (*dir_ / "src").string(), "--out", (*dir_ / "data").string(),
                        "--seed", "4"});
    ASSERT_EQ(r.code, 0) << r.err;
    write_config(base_config(), "tiny.json");
    const auto t = run({"train", "--config", (*dir_ / "tiny.json").string(), "--out", (*dir_ / "run").string()});
    ASSERT_EQ(t.code, 0) << t.err;
  }
  static void TearDownTestSuite() { delete dir_; }

  static json base_config() {
    return {{"network", {{"base_width", 4}, {"num_fa_blocks", 1}}},
            {"train", {{"lr0", 1e-3}, {"batch_size", 2}, {"epochs", 2}, {"crop_size", 16}, {"seed", 1},
                       {"log_every", 1}}},
            {"data", {{"train_hazy", (*dir_ / "data" / "hazy").string()},
                      {"train_clear", (*dir_ / "data" / "clear").string()}}},
            {"extractor", {{"random", 2}}}};
  }

  static std::string write_config(const json& j, const std::string& name) {
    const auto p = *dir_ / name;
    std::ofstream(p) << j.dump(2);
    return p.string();
  }

  static std::filesystem::path final_ckpt() { return *dir_ / "run" / "final.aecr"; }

  static test::TempDir* dir_;
};

test::TempDir* CliTest::dir_ = nullptr;

}  // namespace

TEST(Cli, ParamsForShippedConfigs) {
  const auto d = run({"params", "--config", (kConfigs / "default.json").string()});
  ASSERT_EQ(d.code, 0) << d.err;
  EXPECT_THAT(d.out, HasSubstr("total    2370639"));
  EXPECT_THAT(d.out, HasSubstr("dfe      336676"));
  const auto t = run({"params", "--config", (kConfigs / "toy.json").string()});
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_THAT(t.out, HasSubstr("total    157239"));
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  const auto r = run({"params"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(error_line(r.err)["error"], "usage");
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, MissingConfigFile) {
  const auto r = run({"params", "--config", "/nonexistent.json"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(error_line(r.err)["field"], "config");
}

TEST_F(CliTest, TrainWritesCheckpointAndMetrics) {
  EXPECT_TRUE(std::filesystem::exists(final_ckpt()));
  std::ifstream csv(*dir_ / "run" / "metrics.csv");
  std::string line;
  int rows = -1;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 4);
  const auto ckpt = train::load_checkpoint(final_ckpt());
  EXPECT_EQ(ckpt.metadata["config"]["network"]["base_width"], 4);
}

TEST_F(CliTest, ResumingFinishedRunIsNoOp) {
  const auto before = test::read_bytes(final_ckpt());
  const auto r = run({"train", "--resume", final_ckpt().string(), "--out", (*dir_ / "run").string()});
  EXPECT_EQ(r.code, 0);
  EXPECT_THAT(r.err, HasSubstr("already complete"));
  EXPECT_EQ(test::read_bytes(final_ckpt()), before);
}

TEST_F(CliTest, ResumeFromPartialRunFinishes) {
  auto cfg = base_config();
  cfg["train"]["epochs"] = 1;
  const auto short_cfg = write_config(cfg, "short.json");
  ASSERT_EQ(run({"train", "--config", short_cfg, "--out", (*dir_ / "part").string()}).code, 0);
  const auto ckpt = train::load_checkpoint(*dir_ / "part" / "final.aecr");
  EXPECT_EQ(ckpt.metadata["global_step"], 2);
}

TEST_F(CliTest, SampleCountAboveBatchIsConfigError) {
  auto cfg = base_config();
  cfg["loss"] = {{"n_neg", 3}};
  const auto r = run({"train", "--config", write_config(cfg, "neg.json"), "--out", (*dir_ / "x").string()});
  EXPECT_EQ(r.code, 2);
  const auto e = error_line(r.err);
  EXPECT_EQ(e["error"], "config");
  EXPECT_EQ(e["field"], "loss.n_neg");
}

TEST_F(CliTest, UnknownAndMistypedKeysAreNamed) {
  auto cfg = base_config();
  cfg["train"]["bogus"] = 1;
  auto r = run({"params", "--config", write_config(cfg, "bogus.json")});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(error_line(r.err)["field"], "train.bogus");

  cfg = base_config();
  cfg["train"]["lr0"] = "fast";
  r = run({"params", "--config", write_config(cfg, "typed.json")});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(error_line(r.err)["field"], "train.lr0");

  cfg = base_config();
  cfg["network"]["use_plain_skip"] = true;
  r = run({"params", "--config", write_config(cfg, "excl.json")});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(error_line(r.err)["field"], "network.use_plain_skip");
}

TEST_F(CliTest, InferHandlesAnySizeAndIsDeterministic) {
  data::write_image(*dir_ / "in" / "a.png", test::make_scene(64, 64, 1));
  data::write_image(*dir_ / "in" / "b.png", test::make_scene(63, 65, 2));
  auto r = run({"infer", "--checkpoint", final_ckpt().string(), "--input", (*dir_ / "in").string(), "--output",
                (*dir_ / "o1").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  r = run({"infer", "--checkpoint", final_ckpt().string(), "--input", (*dir_ / "in").string(), "--output",
           (*dir_ / "o2").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(data::read_image(*dir_ / "o1" / "a.png").shape(), (Shape{1, 3, 64, 64}));
  EXPECT_EQ(data::read_image(*dir_ / "o1" / "b.png").shape(), (Shape{1, 3, 63, 65}));
  for (const char* f : {"a.png", "b.png"}) {
    EXPECT_EQ(test::read_bytes(*dir_ / "o1" / f), test::read_bytes(*dir_ / "o2" / f));
  }
  r = run({"infer", "--checkpoint", final_ckpt().string(), "--input", (*dir_ / "in" / "b.png").string(),
           "--output", (*dir_ / "o3").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(test::read_bytes(*dir_ / "o1" / "b.png"), test::read_bytes(*dir_ / "o3" / "b.png"));
}

TEST_F(CliTest, InferRejectsBadCheckpoint) {
  std::ofstream(*dir_ / "junk.aecr") << "garbage";
  const auto r = run({"infer", "--checkpoint", (*dir_ / "junk.aecr").string(), "--input",
                      (*dir_ / "src").string(), "--output", (*dir_ / "o4").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(error_line(r.err)["error"], "format");
}

TEST_F(CliTest, EvalPrintsMeansAndWritesReport) {
  const auto report = *dir_ / "report.json";
  const auto r = run({"eval", "--pred", (kMetrics / "pred").string(), "--gt", (kMetrics / "gt").string(),
                      "--report", report.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_THAT(r.out, HasSubstr("mean_psnr"));
  EXPECT_THAT(r.out, HasSubstr("mean_ssim"));
  json j;
  std::ifstream(report) >> j;
  EXPECT_EQ(j["per_image"].size(), 3u);
  const auto bad = run({"eval", "--pred", (*dir_ / "src").string(), "--gt", (kMetrics / "gt").string(),
                        "--report", report.string()});
  EXPECT_EQ(bad.code, 2);
  EXPECT_EQ(error_line(bad.err)["error"], "input");
}

TEST_F(CliTest, SynthFieldMode) {
  const auto r = run({"synth", "--clear", (*dir_ / "src").string(), "--out", (*dir_ / "field").string(), "--seed",
                      "1", "--field-nodes", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  json j;
  std::ifstream(*dir_ / "field" / "params.json") >> j;
  EXPECT_EQ(j["mode"], "field");
  EXPECT_EQ(j["images"][0]["t_grid"].size(), 4u);
}

TEST_F(CliTest, SeedEnvironmentOverride) {
  auto cfg = base_config();
  cfg["train"]["epochs"] = 1;
  cfg["train"]["seed"] = 77;
  const auto explicit_seed = write_config(cfg, "seed77.json");
  cfg["train"]["seed"] = 0;
  const auto zero_seed = write_config(cfg, "seed0.json");
  ASSERT_EQ(run({"train", "--config", explicit_seed, "--out", (*dir_ / "s1").string()}).code, 0);
  ::setenv("AECR_SEED", "77", 1);
  const auto r = run({"train", "--config", zero_seed, "--out", (*dir_ / "s2").string()});
  ::setenv("AECR_SEED", "seventy", 1);
  const auto bad = run({"train", "--config", zero_seed, "--out", (*dir_ / "s3").string()});
  ::unsetenv("AECR_SEED");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(test::read_bytes(*dir_ / "s1" / "final.aecr"), test::read_bytes(*dir_ / "s2" / "final.aecr"));
  EXPECT_EQ(bad.code, 2);
  EXPECT_EQ(error_line(bad.err)["field"], "AECR_SEED");
}

TEST_F(CliTest, DivergentTrainingExitsWithTrainingError) {
  auto cfg = base_config();
  cfg["train"]["lr0"] = 1e30;
  const auto r = run({"train", "--config", write_config(cfg, "huge.json"), "--out", (*dir_ / "div").string()});
  EXPECT_EQ(r.code, 3);
  EXPECT_EQ(error_line(r.err)["error"], "training");
}

TEST(CliBinary, ExitStatusesPropagate) {
  const std::string cli = AECR_CLI_PATH;
  const int ok = std::system((cli + " params --config " + (kConfigs / "toy.json").string() + " > /dev/null").c_str());
  ASSERT_TRUE(WIFEXITED(ok));
  EXPECT_EQ(WEXITSTATUS(ok), 0);
  const int bad = std::system((cli + " params --config /nonexistent.json 2> /dev/null").c_str());
  ASSERT_TRUE(WIFEXITED(bad));
  EXPECT_EQ(WEXITSTATUS(bad), 2);
}
