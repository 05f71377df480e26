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

#include <span>
#include <vector>

#include "treeadv/forest.h"

namespace treeadv {

// Group-normalized sequence advantages of one prompt's K rollouts:
// A_i = (R_i - mu) / sigma, sigma = sqrt(mean squared deviation + delta).
struct GroupAdvantages {
  std::vector<double> seq_adv;
  double mu = 0.0;
  double sigma = 1.0;
  double delta = 0.0;
};

// Throws DegenerateGroup for fewer than two rewards.
GroupAdvantages GroupNormalize(std::span<const double> rewards, double delta);

struct AdvantageTable {
  std::vector<double> seq_adv;
  // token_adv[i][t]: advantage of position t of trajectory i (leaf order).
  std::vector<std::vector<double>> token_adv;
  double delta = 0.0;
  double mu = 0.0;
  double sigma = 1.0;
  // Per-segment advantage and leaf coverage, indexed [tree][segment]. Only
  // filled by Redistribute.
  std::vector<std::vector<double>> segment_adv;
  std::vector<std::vector<int32_t>> segment_leaves;
};

// Token advantage of every segment is the mean sequence advantage of the
// leaves below it; each position takes the value of its covering segment.
// One bottom-up pass per tree. Throws IncompleteForest.
AdvantageTable Redistribute(const RolloutForest& forest,
                            const GroupAdvantages& group);

// Reference computation for tests: for each (i, t) scans all K
// trajectories for those passing through the same segment occurrence at
// position t and averages their advantages. O(K^2 * length).
AdvantageTable OracleRedistribute(const RolloutForest& forest,
                                  const GroupAdvantages& group);

// token_adv[i][t] = seq_adv[i] for every position (the GRPO assignment).
AdvantageTable BroadcastSequenceAdvantages(const RolloutForest& forest,
                                           const GroupAdvantages& group);

}  // namespace treeadv
