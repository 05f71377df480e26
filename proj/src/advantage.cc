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

#include "treeadv/advantage.h"

#include <cmath>
#include <string>

namespace treeadv {

namespace {

AdvantageTable EmptyTable(const GroupAdvantages& group) {
  AdvantageTable table;
  table.seq_adv = group.seq_adv;
  table.delta = group.delta;
  table.mu = group.mu;
  table.sigma = group.sigma;
  return table;
}

void CheckLeafCount(const RolloutForest& forest, const GroupAdvantages& group) {
  if (static_cast<int32_t>(group.seq_adv.size()) != forest.num_leaves()) {
    throw ShapeMismatch("got " + std::to_string(group.seq_adv.size()) +
                        " sequence advantages for " +
                        std::to_string(forest.num_leaves()) + " leaves");
  }
}

}  // namespace

GroupAdvantages GroupNormalize(std::span<const double> rewards, double delta) {
  if (rewards.size() < 2) {
    throw DegenerateGroup("group normalization needs K >= 2 rewards");
  }
  if (!(delta >= 0.0)) throw std::invalid_argument("delta must be >= 0");
  const auto k = static_cast<double>(rewards.size());
  GroupAdvantages g;
  g.delta = delta;
  for (double r : rewards) g.mu += r;
  g.mu /= k;
  double var = 0.0;
  for (double r : rewards) var += (r - g.mu) * (r - g.mu);
  var /= k;
  g.sigma = std::sqrt(var + delta);
  g.seq_adv.reserve(rewards.size());
  for (double r : rewards) {
    // All-equal rewards with delta = 0 give 0/0; the deviation is zero so
    // the advantage is too.
    g.seq_adv.push_back(g.sigma > 0.0 ? (r - g.mu) / g.sigma : 0.0);
  }
  return g;
}

AdvantageTable Redistribute(const RolloutForest& forest,
                            const GroupAdvantages& group) {
  CheckLeafCount(forest, group);
  const std::vector<TrajectoryView> views = EnumerateLeaves(forest);
  AdvantageTable table = EmptyTable(group);
  table.segment_adv.resize(forest.num_trees());
  table.segment_leaves.resize(forest.num_trees());

  for (int32_t t = 0; t < forest.num_trees(); ++t) {
    const RolloutTree& tree = forest.tree(t);
    const size_t n = tree.segment_count();
    std::vector<double> sum(n, 0.0);
    std::vector<int32_t> count(n, 0);
    // Pre-order, then accumulate in reverse so children finish first.
    std::vector<int32_t> order;
    std::vector<int32_t> stack{tree.root()};
    while (!stack.empty()) {
      const int32_t s = stack.back();
      stack.pop_back();
      order.push_back(s);
      for (int32_t c : tree.segment(s).children) stack.push_back(c);
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const Segment& seg = tree.segment(*it);
      if (seg.is_leaf()) {
        sum[*it] = group.seq_adv[seg.leaf_index];
        count[*it] = 1;
      }
      if (seg.parent) {
        sum[*seg.parent] += sum[*it];
        count[*seg.parent] += count[*it];
      }
    }
    auto& adv = table.segment_adv[t];
    adv.resize(n);
    for (size_t s = 0; s < n; ++s) {
      adv[s] = count[s] > 0 ? sum[s] / count[s] : 0.0;
    }
    table.segment_leaves[t] = std::move(count);
  }

  table.token_adv.resize(views.size());
  for (size_t i = 0; i < views.size(); ++i) {
    auto& row = table.token_adv[i];
    row.reserve(views[i].size());
    for (const TrajectoryStep& step : views[i].steps) {
      row.push_back(table.segment_adv[step.segment.tree][step.segment.segment]);
    }
  }
  return table;
}

AdvantageTable OracleRedistribute(const RolloutForest& forest,
                                  const GroupAdvantages& group) {
  CheckLeafCount(forest, group);
  const std::vector<TrajectoryView> views = EnumerateLeaves(forest);
  AdvantageTable table = EmptyTable(group);
  table.token_adv.resize(views.size());
  for (size_t i = 0; i < views.size(); ++i) {
    for (size_t t = 0; t < views[i].size(); ++t) {
      const SegmentRef covering = views[i].steps[t].segment;
      double sum = 0.0;
      int32_t matches = 0;
      for (size_t l = 0; l < views.size(); ++l) {
        if (views[l].size() > t && views[l].steps[t].segment == covering) {
          sum += group.seq_adv[views[l].leaf_index];
          ++matches;
        }
      }
      table.token_adv[i].push_back(sum / matches);
    }
  }
  return table;
}

AdvantageTable BroadcastSequenceAdvantages(const RolloutForest& forest,
                                           const GroupAdvantages& group) {
  CheckLeafCount(forest, group);
  const std::vector<TrajectoryView> views = EnumerateLeaves(forest);
  AdvantageTable table = EmptyTable(group);
  table.token_adv.resize(views.size());
  for (size_t i = 0; i < views.size(); ++i) {
    table.token_adv[i].assign(views[i].size(), group.seq_adv[i]);
  }
  return table;
}

}  // namespace treeadv
