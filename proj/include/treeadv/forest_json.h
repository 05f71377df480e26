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

#include <vector>

#include "json.hpp"
#include "treeadv/advantage.h"
#include "treeadv/forest.h"

namespace treeadv {

// Annotated forest document with "format_version": 1. Each segment record
// carries its tokens, behavior log-probs, entropies, branch record,
// leaves_under count and token advantage; leaves add reward and sequence
// advantage. `table` must come from Redistribute.
nlohmann::ordered_json ForestToJson(const RolloutForest& forest,
                                    const std::vector<TrajectoryView>& views,
                                    const AdvantageTable& table);

}  // namespace treeadv
