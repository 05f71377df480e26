// Copyright 2026 The TreeAdv Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "treeadv/plot.h"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

namespace treeadv {
namespace {

namespace fs = std::filesystem;

fs::path WriteMetrics(const std::string& name, const std::string& body) {
  const fs::path dir = fs::temp_directory_path() / "treeadv_plot_test";
  fs::create_directories(dir);
  std::ofstream(dir / name) << body;
  return dir / name;
}

TEST(ReadSeries, SkipsNullValues) {
  const auto path = WriteMetrics("a.jsonl",
                                 "{\"step\":1,\"mean_reward\":0.5,\"accuracy\":null}\n"
                                 "{\"step\":2,\"mean_reward\":0.25,\"accuracy\":0.75}\n\n");
  const PlotSeries reward = ReadSeries(path, "step", "mean_reward");
  EXPECT_EQ(reward.points, (std::vector<std::pair<double, double>>{{1, 0.5}, {2, 0.25}}));
  const PlotSeries acc = ReadSeries(path, "step", "accuracy");
  EXPECT_EQ(acc.points, (std::vector<std::pair<double, double>>{{2, 0.75}}));
  EXPECT_FALSE(reward.name.empty());
}

TEST(ReadSeries, UnknownFieldNamesTheValidOnes) {
  const auto path = WriteMetrics("b.jsonl", "{\"step\":1,\"mean_reward\":0.5}\n");
  try {
    ReadSeries(path, "step", "reward");
    FAIL() << "expected invalid_argument";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("mean_reward"), std::string::npos);
  }
  EXPECT_THROW(ReadSeries(path.string() + ".missing", "step", "loss"), std::runtime_error);
}

TEST(RenderSvg, DrawsOnePolylinePerSeries) {
  const std::vector<PlotSeries> series = {{"m4", {{1, 0.1}, {2, 0.4}, {3, 0.3}}},
                                          {"m16", {{1, 0.2}, {2, 0.2}}}};
  const std::string svg = RenderSvg(series, "step", "mean_reward");
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  size_t polylines = 0;
  for (size_t pos = svg.find("<polyline"); pos != std::string::npos;
       pos = svg.find("<polyline", pos + 1)) {
    ++polylines;
  }
  EXPECT_EQ(polylines, 2u);
  EXPECT_NE(svg.find("m16"), std::string::npos);
  EXPECT_NE(svg.find("mean_reward"), std::string::npos);
  // Degenerate ranges still render.
  EXPECT_NE(RenderSvg({{"flat", {{1, 1}}}}, "step", "loss").find("</svg>"), std::string::npos);
  EXPECT_NE(RenderSvg({}, "step", "loss").find("</svg>"), std::string::npos);
}

TEST(SeriesCsv, IsLongForm) {
  const std::string csv = SeriesCsv({{"a", {{1, 2}}}, {"b", {{3, 4.5}}}}, "step", "loss");
  EXPECT_EQ(csv, "series,step,loss\na,1,2\nb,3,4.5\n");
}

}  // namespace
}  // namespace treeadv
