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

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace treeadv {

struct PlotSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

// Reads numeric field `y` against `x` from a metrics JSONL file. Records
// with a null value for either field are skipped. Throws
// std::invalid_argument naming the valid fields when `x` or `y` is unknown.
PlotSeries ReadSeries(const std::filesystem::path& jsonl, const std::string& x,
                      const std::string& y);

// Standalone SVG line chart, one polyline per series, with axes, tick
// labels and a legend.
std::string RenderSvg(const std::vector<PlotSeries>& series, const std::string& x_label,
                      const std::string& y_label);

// Long-form CSV: series,x,y.
std::string SeriesCsv(const std::vector<PlotSeries>& series, const std::string& x_label,
                      const std::string& y_label);

}  // namespace treeadv
