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

#include "treeadv/forest_json.h"

#include <sstream>

namespace treeadv {

namespace {

using Json = nlohmann::ordered_json;

Json SegmentJson(const RolloutForest& forest, const std::vector<TrajectoryView>& views,
                 const AdvantageTable& table, int32_t tree_index, int32_t index) {
  const Segment& s = forest.tree(tree_index).segment(index);
  Json j;
  j["id"] = index;
  j["start_offset"] = s.start_offset;
  j["tokens"] = s.tokens;
  j["behavior_logprobs"] = s.behavior_logprobs;
  j["entropies"] = s.entropies;
  j["synthetic"] = s.synthetic;
  j["restart"] = s.restart;
  if (s.branch) {
    j["branch"] = {{"entropy", s.branch->entropy},
                   {"token", s.branch->token},
                   {"armed", s.branch->armed},
                   {"budget_remaining", s.branch->budget_remaining},
                   {"tau", s.branch->tau}};
  } else {
    j["branch"] = nullptr;
  }
  j["leaves_under"] = table.segment_leaves.at(tree_index).at(index);
  j["a_tok"] = table.segment_adv.at(tree_index).at(index);
  if (s.is_leaf()) {
    j["leaf"] = {{"index", s.leaf_index},
                 {"reward", views.at(s.leaf_index).reward},
                 {"seq_adv", table.seq_adv.at(s.leaf_index)}};
  } else {
    j["leaf"] = nullptr;
  }
  Json children = Json::array();
  for (int32_t c : s.children) {
    children.push_back(SegmentJson(forest, views, table, tree_index, c));
  }
  j["children"] = std::move(children);
  return j;
}

}  // namespace

nlohmann::ordered_json ForestToJson(const RolloutForest& forest,
                                    const std::vector<TrajectoryView>& views,
                                    const AdvantageTable& table) {
  Json doc;
  doc["format_version"] = 1;
  doc["K"] = forest.num_leaves();
  doc["M"] = forest.num_trees();
  std::ostringstream hash;
  hash << std::hex << forest.snapshot_hash();
  doc["snapshot_hash"] = hash.str();
  doc["prompt"] = forest.prompt();
  doc["mu"] = table.mu;
  doc["sigma"] = table.sigma;
  doc["delta"] = table.delta;
  doc["seq_adv"] = table.seq_adv;
  const TokenCounts counts = TotalGeneratedTokens(forest);
  doc["tokens_segment"] = counts.segment_sum;
  doc["tokens_leaf"] = counts.leaf_sum;
  doc["branch_points"] = CountBranchPoints(forest);
  Json trees = Json::array();
  for (int32_t t = 0; t < forest.num_trees(); ++t) {
    const RolloutTree& tree = forest.tree(t);
    trees.push_back({{"index", t},
                     {"leaf_count", tree.leaf_count()},
                     {"root", SegmentJson(forest, views, table, t, tree.root())}});
  }
  doc["trees"] = std::move(trees);
  return doc;
}

}  // namespace treeadv
