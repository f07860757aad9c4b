/* Copyright 2026 The taperfx Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "cli_runner.hpp"

#include <taperfx/formats.hpp>

#include <gtest/gtest.h>

#include <map>
#include <sstream>

namespace taperfx {
namespace {

using cli::run;

const std::string kModel = std::string(TAPERFX_DATA_DIR) + "/tiny-convnet/model.json";

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::stringstream ss(text);
  for (std::string line; std::getline(ss, line);) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

TEST(Inspect, TaperedFiveBit) {
  const auto r = run({"inspect", "tfx:5/5/-1"});
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto rows = csv_rows(r.out);
  EXPECT_EQ(rows.size(), 33U);
  EXPECT_NE(r.out.find("# max_pos 2\n"), std::string::npos);
  EXPECT_NE(r.out.find("# min_neg -2.5\n"), std::string::npos);
}

TEST(Inspect, UniformSpacing) {
  const auto rows = csv_rows(run({"inspect", "tfx:5/1/0"}).out);
  std::vector<double> values;
  for (std::size_t i = 1; i < rows.size(); ++i) values.push_back(std::stod(rows[i][2]));
  std::sort(values.begin(), values.end());
  for (std::size_t i = 1; i < values.size(); ++i) EXPECT_EQ(values[i] - values[i - 1], 1.0 / 16);
}

TEST(Inspect, FixedPointSpan) {
  const auto rows = csv_rows(run({"inspect", "fxp:8/7"}).out);
  ASSERT_EQ(rows.size(), 257U);
  double lo = 0;
  double hi = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    lo = std::min(lo, std::stod(rows[i][2]));
    hi = std::max(hi, std::stod(rows[i][2]));
  }
  EXPECT_EQ(lo, -1.0);
  EXPECT_EQ(hi, 1.0 - 1.0 / 128);
}

TEST(Inspect, BadDescriptor) {
  const auto r = run({"inspect", "tfx:5/9/0"});
  EXPECT_NE(r.exit_code, 0);
  EXPECT_EQ(r.err.rfind("error: {\"code\":", 0), 0U) << r.err;
  EXPECT_EQ(run({"nonsense"}).exit_code, 2);
}

TEST(Quantize, TfxSelectionReport) {
  const std::string out = cli::scratch("quantize_tfx");
  const auto r = run({"quantize", "--model", kModel, "--bits", "8", "--format", "tfx:auto", "--out", out});
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto rows = csv_rows(r.out);
  ASSERT_EQ(rows[0][4], "is_w");
  // input row + 9 layers of the folded fixture
  ASSERT_EQ(rows.size(), 11U);
  int weighted = 0;
  for (std::size_t i = 2; i < rows.size(); ++i) {
    EXPECT_FALSE(rows[i][5].empty()) << rows[i][0];
    if (!rows[i][2].empty()) {
      ++weighted;
      EXPECT_GE(std::stoi(rows[i][4]), 1);
      EXPECT_LE(std::stoi(rows[i][4]), 8);
      EXPECT_GE(std::stoi(rows[i][6]), -4);
      EXPECT_LE(std::stoi(rows[i][6]), 0);
    }
  }
  EXPECT_EQ(weighted, 4);
  EXPECT_TRUE(std::filesystem::exists(out + "/quantized.json"));
  EXPECT_TRUE(std::filesystem::exists(out + "/selection.csv"));
}

TEST(Quantize, FxpFracBitsInRange) {
  const auto r = run({"quantize", "--model", kModel, "--bits", "6", "--format", "fxp:auto", "--out",
                      cli::scratch("quantize_fxp")});
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto rows = csv_rows(r.out);
  for (std::size_t i = 2; i < rows.size(); ++i) {
    const int frac_a = std::stoi(rows[i][8]);
    EXPECT_GE(frac_a, 1);
    EXPECT_LE(frac_a, 5);
    if (!rows[i][7].empty()) {
      EXPECT_GE(std::stoi(rows[i][7]), 1);
      EXPECT_LE(std::stoi(rows[i][7]), 5);
    }
  }
}

TEST(Quantize, BitsOneIsUnsupported) {
  const auto r = run({"quantize", "--model", kModel, "--bits", "1", "--out", cli::scratch("bits1")});
  EXPECT_NE(r.exit_code, 0);
  EXPECT_NE(r.err.find("\"code\":\"UnsupportedWidth\""), std::string::npos) << r.err;
}

TEST(Evaluate, FloatIsOneRow) {
  const auto r = run({"evaluate", "--model", kModel, "--samples", "100"});
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto rows = csv_rows(r.out);
  ASSERT_EQ(rows.size(), 2U);
  EXPECT_EQ(rows[1][0], "float32");
  EXPECT_EQ(rows[1][5], "100");
}

TEST(Sweep, EightRowsTfxMseNotAboveFxp) {
  const auto r = run({"sweep", "--model", kModel, "--bits", "5..8", "--samples", "200", "--dataset", "synth:42"});
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto rows = csv_rows(r.out);
  ASSERT_EQ(rows.size(), 9U);
  std::map<std::string, double> tfx;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i][0] == "tfx") tfx[rows[i][1]] = std::stod(rows[i][4]);
  }
  ASSERT_EQ(tfx.size(), 4U);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i][0] == "fxp") {
      EXPECT_LE(tfx.at(rows[i][1]), std::stod(rows[i][4])) << "n=" << rows[i][1];
    }
  }
}

TEST(Sweep, ByteIdenticalReruns) {
  const std::vector<std::string> args{"sweep", "--model", kModel, "--bits", "5..6", "--samples", "60", "--seed", "9"};
  const auto a = run(args);
  const auto b = run(args);
  ASSERT_EQ(a.exit_code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(a.out.find('\r'), std::string::npos);
}

TEST(Sweep, QuantizeThenEvaluateMatchesSweepRow) {
  const std::string out = cli::scratch("compose");
  ASSERT_EQ(run({"quantize", "--model", kModel, "--bits", "7", "--format", "fxp:auto", "--dataset", "synth:3",
                 "--calib-size", "64", "--out", out})
                .exit_code,
            0);
  const auto evaluated = csv_rows(
      run({"evaluate", "--model", out + "/quantized.json", "--dataset", "synth:3", "--samples", "150"}).out);
  const auto swept = csv_rows(run({"sweep", "--model", kModel, "--bits", "7", "--formats", "fxp:auto", "--dataset",
                                   "synth:3", "--calib-size", "64", "--samples", "150"})
                                  .out);
  ASSERT_EQ(evaluated.size(), 2U);
  ASSERT_EQ(swept.size(), 2U);
  EXPECT_EQ(evaluated[1], swept[1]);
}

TEST(Simulate, DefaultsWarnAndEmitEightRows) {
  const std::string out = cli::scratch("simulate");
  const auto r = run({"simulate", "--model", kModel, "--samples", "50", "--out", out});
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_NE(r.err.find("WARN"), std::string::npos);
  const auto rows = csv_rows(r.out);
  ASSERT_EQ(rows.size(), 9U);
  EXPECT_EQ(rows[0][2], "is_policy");
  EXPECT_TRUE(std::filesystem::exists(out + "/sim.csv"));
  EXPECT_EQ(csv_rows(cli::read_text(out + "/edp_vs_error.dat")).size(), 8U);
}

TEST(Simulate, UnitArrayComputeCyclesEqualMacs) {
  const std::string costs = cli::scratch("costs") + "/costs.json";
  cli::write_text(costs, R"({"tfx_mac_ratio": 1.25})");
  const auto r = run({"simulate", "--model", kModel, "--samples", "20", "--bits", "8", "--array", "1x1", "--costs", costs});
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_EQ(r.err.find("WARN"), std::string::npos);
  const auto rows = csv_rows(r.out);
  ASSERT_EQ(rows.size(), 3U);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i][10], rows[i][11]);
    EXPECT_EQ(rows[i][11], "54372");
    EXPECT_EQ(rows[i][4], "1");
  }
}

}  // namespace
}  // namespace taperfx
