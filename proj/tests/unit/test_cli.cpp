// Copyright 2026 The fusion-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "fusionlab/config.hpp"

namespace
{

namespace fs = std::filesystem;

int run_cli(const std::string & args)
{
  const std::string cmd = std::string(FUSIONLAB_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// One shared workspace: a tiny configuration and a three-frame dataset.
class CliTest : public ::testing::Test
{
protected:
  static void SetUpTestSuite()
  {
    dir_ = new fusionlab::testing::TempDir("cli");
    std::ofstream(*dir_ / "tiny.toml") << fusionlab::config::to_toml(fusionlab::testing::small_config());
    ASSERT_EQ(run_cli("gen --config " + path("tiny.toml") + " --frames 3 --seed 4 --out " + path("data")), 0);
  }

  static void TearDownTestSuite()
  {
    delete dir_;
    dir_ = nullptr;
  }

  static std::string path(const std::string & name) { return (*dir_ / name).string(); }

  static fusionlab::testing::TempDir * dir_;
};

fusionlab::testing::TempDir * CliTest::dir_ = nullptr;

TEST_F(CliTest, HelpSucceedsAndUsageErrorsExitTwo)
{
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli(""), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("gen --frames 2"), 2);  // --out is required
}

TEST_F(CliTest, GenWritesTheDatasetLayout)
{
  EXPECT_TRUE(fs::exists(path("data") + "/gt.jsonl"));
  EXPECT_TRUE(fs::exists(path("data") + "/lidar/000002.pcl"));
  EXPECT_TRUE(fs::exists(path("data") + "/radar/000000.pcr"));
  // A non-empty output directory is refused unless --force is given.
  EXPECT_EQ(run_cli("gen --frames 1 --out " + path("data")), 1);
  EXPECT_EQ(run_cli("gen --frames 1 --out " + path("data2")), 0);
  EXPECT_EQ(run_cli("gen --frames 1 --out " + path("data2") + " --force"), 0);
}

TEST_F(CliTest, ConfigurationErrorsExitTwo)
{
  const std::string base = "train --config " + path("tiny.toml") + " --data " + path("data");
  EXPECT_EQ(run_cli(base + " --fusion-mode gated --out " + path("r1")), 2);
  EXPECT_EQ(run_cli(base + " --set train.nope=1 --out " + path("r2")), 2);
  EXPECT_EQ(run_cli(base + " --set train.lr=-1 --out " + path("r3")), 2);
  EXPECT_EQ(run_cli("fog --data " + path("data") + " --level 9 --out " + path("f9")), 2);
}

TEST_F(CliTest, MissingInputsAreUsageErrors)
{
  EXPECT_EQ(run_cli("eval --dets " + path("missing.jsonl") + " --gt " + path("data/gt.jsonl")), 2);
  EXPECT_EQ(run_cli("stats --data " + path("no_such_dataset")), 2);
}

TEST_F(CliTest, RuntimeErrorsExitOne)
{
  std::ofstream(*dir_ / "garbage.jsonl") << "{not json\n";
  EXPECT_EQ(run_cli("eval --dets " + path("garbage.jsonl") + " --gt " + path("data/gt.jsonl")), 1);
  fs::create_directories(*dir_ / "empty_dataset");
  EXPECT_EQ(run_cli("stats --data " + path("empty_dataset")), 1);
}

TEST_F(CliTest, TrainInferEvalPipeline)
{
  ASSERT_EQ(
    run_cli(
      "train --config " + path("tiny.toml") + " --data " + path("data") + " --epochs 1 --out " +
      path("run")),
    0);
  EXPECT_TRUE(fs::exists(path("run") + "/loss.csv"));
  EXPECT_TRUE(fs::exists(path("run") + "/config.toml"));
  const std::string ckpt = path("run") + "/checkpoints/epoch_001.ckpt";
  ASSERT_TRUE(fs::exists(ckpt));
  ASSERT_EQ(
    run_cli(
      "infer --model " + ckpt + " --data " + path("data") + " --level 2 --out " +
      path("dets.jsonl")),
    0);
  ASSERT_EQ(
    run_cli(
      "eval --dets " + path("dets.jsonl") + " --gt " + path("data/gt.jsonl") + " --report " +
      path("report.json")),
    0);
  const auto report =
    nlohmann::json::parse(fusionlab::testing::read_file(path("report.json")));
  EXPECT_EQ(report.at("weathers").back(), "Total");
  // Existing outputs are protected.
  EXPECT_EQ(
    run_cli(
      "infer --model " + ckpt + " --data " + path("data") + " --out " + path("dets.jsonl")),
    1);
  ASSERT_EQ(
    run_cli(
      "sweep --model " + ckpt + " --data " + path("data") + " --tau 0.2,0.5 --no-detector --out " +
      path("sweep.csv")),
    0);
  const std::string sweep = fusionlab::testing::read_file(path("sweep.csv"));
  EXPECT_EQ(sweep.substr(0, sweep.find('\n')), "tau,denoise_rate,recall,miou,pa,map_3d");
}

TEST_F(CliTest, FogAndStats)
{
  ASSERT_EQ(run_cli("fog --data " + path("data") + " --level 4 --out " + path("fog4")), 0);
  ASSERT_EQ(run_cli("stats --data " + path("fog4") + " --out " + path("stats.csv")), 0);
  const std::string csv = fusionlab::testing::read_file(path("stats.csv"));
  EXPECT_EQ(
    csv.substr(0, csv.find('\n')), "weather,modality,range_min,range_max,points,points_per_frame");
  EXPECT_NE(csv.find("fog_level_4,lidar"), std::string::npos);
}

}  // namespace
