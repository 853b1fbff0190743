// Copyright 2026 The cimfault Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cimfault/cli.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cimfault/container.hpp"

namespace cimfault {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli_main(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("cimfault_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& text) {
    std::ofstream(dir_ / name) << text;
    return (dir_ / name).string();
  }

  fs::path dir_;
};

TEST_F(CliTest, GenToyThenRun) {
  const std::string weights = (dir_ / "toy.cimw").string();
  auto r = cli({"gen-toy", weights, "--n-layers", "2", "--d-model", "32", "--n-heads", "2", "--d-ffn", "64",
                "--vocab", "64"});
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_TRUE(fs::exists(weights));
  const std::string cfg = write("exp.ini",
                                "[model]\nweights = toy.cimw\nn_heads = 2\n[noise]\nsigma_grid = 0.01\ntile = 16x16\n"
                                "[experiment]\nn_runs = 2\nmax_new_tokens = 2\n[output]\ncsv = out.csv\njson = out.json\n");
  r = cli({"run", cfg, "--output-dir", dir_.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir_ / "out.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "out.json"));
  std::ifstream csv(dir_ / "out.csv");
  std::size_t n = 0;
  for (std::string l; std::getline(csv, l);) ++n;
  EXPECT_EQ(n, 3u);
}

TEST_F(CliTest, CalibrateArea) {
  const auto r = cli({"calibrate-area", std::string(CIMFAULT_CONFIG_DIR) + "/area_fit_rows.csv"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("area_base = 75"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("area_attn_copy = 28"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("area_ffn_copy = 39"), std::string::npos) << r.out;
}

TEST_F(CliTest, MalformedConfigNamesField) {
  const std::string cfg = write("bad.ini", "[noise]\nsaf_p = lots\n");
  const auto r = cli({"run", cfg});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("noise.saf_p"), std::string::npos) << r.err;
}

TEST_F(CliTest, UnknownFlagAndSubcommand) {
  auto r = cli({"run", "x.ini", "--bogus"});
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(r.err.empty());
  r = cli({"frobnicate"});
  EXPECT_EQ(r.code, 2);
  r = cli({});
  EXPECT_EQ(r.code, 2);
}

TEST_F(CliTest, MissingWeightFileIsNonzero) {
  const std::string cfg = write("exp.ini", "[model]\nweights = missing.cimw\n");
  const auto r = cli({"run", cfg, "--output-dir", dir_.string()});
  EXPECT_NE(r.code, 0);
  EXPECT_FALSE(r.err.empty());
}

TEST_F(CliTest, InjectIsDeterministic) {
  const std::string weights = (dir_ / "toy.cimw").string();
  ASSERT_EQ(cli({"gen-toy", weights, "--n-layers", "1", "--d-model", "32", "--n-heads", "2", "--d-ffn", "64",
                 "--vocab", "64"})
                .code,
            0);
  for (const char* out : {"a.cimw", "b.cimw"}) {
    const auto r = cli({"inject", weights, (dir_ / out).string(), "--n-heads", "2", "--seed", "3"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  const auto a = read_container(dir_ / "a.cimw");
  const auto b = read_container(dir_ / "b.cimw");
  const auto clean = read_container(weights);
  ASSERT_EQ(a.size(), clean.size());
  EXPECT_EQ(serialize_container(a), serialize_container(b));
  EXPECT_NE(serialize_container(a), serialize_container(clean));
}

}  // namespace
}  // namespace cimfault
