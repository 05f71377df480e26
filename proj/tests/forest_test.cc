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

#include "treeadv/forest.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "testing.h"

namespace treeadv {
namespace {

using testing::BuildFig2;

std::set<TokenId> FirstTokens(const RolloutTree& tree, int32_t parent) {
  std::set<TokenId> out;
  for (int32_t c : tree.segment(parent).children) {
    out.insert(tree.segment(c).tokens.front());
  }
  return out;
}

TEST(AddChild, AddsDistinctSibling) {
  RolloutTree tree({1});
  tree.Append(tree.root(), 4, -0.5, 1.0);
  tree.AddChild(tree.root(), 3, -0.1, 1.0);
  tree.AddChild(tree.root(), 7, -0.2, 1.0);
  EXPECT_EQ(FirstTokens(tree, tree.root()), (std::set<TokenId>{3, 7}));
}

TEST(AddChild, LeafBecomesInternal) {
  RolloutTree tree({1});
  tree.Append(tree.root(), 4, -0.5, 1.0);
  EXPECT_TRUE(tree.segment(tree.root()).is_leaf());
  const int32_t child = tree.AddChild(tree.root(), 3, -0.1, 1.0);
  EXPECT_FALSE(tree.segment(tree.root()).is_leaf());
  EXPECT_EQ(tree.segment(child).tokens, std::vector<TokenId>{3});
  EXPECT_EQ(tree.segment(child).start_offset, 1);
  EXPECT_EQ(tree.segment(child).parent, tree.root());
}

TEST(AddChild, DuplicateFirstTokenThrows) {
  RolloutTree tree({1});
  tree.Append(tree.root(), 4, -0.5, 1.0);
  tree.AddChild(tree.root(), 3, -0.1, 1.0);
  EXPECT_THROW(tree.AddChild(tree.root(), 3, -0.1, 1.0), DuplicateBranchToken);
}

TEST(AddRestart, EmptyRootTakesRestartDirectly) {
  RolloutTree tree({1});
  const int32_t a = tree.AddRestart(2, -1.0, 1.0);
  const int32_t b = tree.AddRestart(2, -1.0, 1.0);
  EXPECT_FALSE(tree.segment(tree.root()).synthetic);
  EXPECT_EQ(tree.segment(tree.root()).children, (std::vector<int32_t>{a, b}));
}

TEST(AddRestart, NonEmptyRootIsWrappedInSyntheticRoot) {
  RolloutTree tree({1});
  const int32_t old_root = tree.root();
  tree.Append(old_root, 2, -1.0, 1.0);
  tree.Terminate(old_root);
  // A restart may repeat the original first token.
  const int32_t restart = tree.AddRestart(2, -1.0, 1.0);
  tree.Terminate(restart);
  const Segment& root = tree.segment(tree.root());
  EXPECT_TRUE(root.synthetic);
  EXPECT_TRUE(root.empty());
  EXPECT_EQ(root.children, (std::vector<int32_t>{old_root, restart}));
  EXPECT_TRUE(tree.segment(restart).restart);
  EXPECT_EQ(tree.segment(restart).start_offset, 0);
  EXPECT_EQ(tree.leaf_count(), 2);
}

TEST(EnumerateLeaves, Fig2SharesRootTokensInAllViews) {
  const auto fig = BuildFig2();
  const auto views = EnumerateLeaves(fig.forest);
  ASSERT_EQ(views.size(), 3u);
  EXPECT_EQ(views[0].Tokens(), (std::vector<TokenId>{5, 6, 1, 2}));
  EXPECT_EQ(views[1].Tokens(), (std::vector<TokenId>{5, 6, 3, 4}));
  EXPECT_EQ(views[2].Tokens(), (std::vector<TokenId>{5, 6, 3, 7}));
  for (const auto& v : views) {
    EXPECT_EQ(v.steps[0].segment, fig.root);
    EXPECT_EQ(v.steps[1].segment, fig.root);
    EXPECT_EQ(v.steps[1].offset_in_segment, 1);
  }
  EXPECT_EQ(views[1].steps[2].segment, fig.n_right);
  EXPECT_EQ(views[2].steps[2].segment, fig.n_right);
}

TEST(EnumerateLeaves, LinearForestHasNoSharedSegments) {
  Rng rng(7);
  const RolloutForest forest = testing::RandomForest(rng, 8, 8, false);
  std::set<SegmentRef> seen;
  for (const auto& v : EnumerateLeaves(forest)) {
    std::set<SegmentRef> own;
    for (const auto& s : v.steps) own.insert(s.segment);
    for (const auto& ref : own) EXPECT_TRUE(seen.insert(ref).second);
  }
}

TEST(EnumerateLeaves, OpenPathThrows) {
  RolloutTree tree({1});
  tree.Append(tree.root(), 3, -0.1, 1.0);
  const int32_t a = tree.AddChild(tree.root(), 4, -0.1, 1.0);
  tree.AddChild(tree.root(), 5, -0.1, 1.0);
  tree.Terminate(a);
  std::vector<RolloutTree> trees;
  trees.push_back(std::move(tree));
  const RolloutForest forest(std::move(trees), 2);
  EXPECT_FALSE(forest.complete());
  EXPECT_THROW(EnumerateLeaves(forest), IncompleteForest);
}

TEST(RolloutForest, LeafCountMustMatchBudget) {
  Rng rng(3);
  testing::RandomTreeBuilder builder(rng, 12);
  std::vector<RolloutTree> trees;
  trees.push_back(builder.Build(3, false));
  EXPECT_THROW(RolloutForest(std::move(trees), 4), ShapeMismatch);
}

TEST(LeavesUnder, Fig2) {
  const auto fig = BuildFig2();
  EXPECT_EQ(LeavesUnder(fig.forest, fig.n_right), (std::vector<int32_t>{1, 2}));
  EXPECT_EQ(LeavesUnder(fig.forest, fig.root), (std::vector<int32_t>{0, 1, 2}));
  EXPECT_EQ(LeavesUnder(fig.forest, fig.y1), (std::vector<int32_t>{0}));
  EXPECT_EQ(LeavesUnder(fig.forest, fig.n_left), (std::vector<int32_t>{0}));
}

TEST(TotalGeneratedTokens, Fig2Counts) {
  const auto counts = TotalGeneratedTokens(BuildFig2().forest);
  EXPECT_EQ(counts.segment_sum, 7);
  EXPECT_EQ(counts.leaf_sum, 12);
}

TEST(TotalGeneratedTokens, LinearForestSumsAgree) {
  Rng rng(11);
  const auto counts = TotalGeneratedTokens(testing::RandomForest(rng, 16, 16, false));
  EXPECT_EQ(counts.segment_sum, counts.leaf_sum);
}

class RandomForestProperties : public ::testing::TestWithParam<int> {};

TEST_P(RandomForestProperties, Hold) {
  Rng rng(DeriveSeed(1234, GetParam()));
  const int32_t K = std::vector<int32_t>{4, 8, 16}[GetParam() % 3];
  std::vector<int32_t> divisors;
  for (int32_t m = 1; m <= K; ++m) {
    if (K % m == 0) divisors.push_back(m);
  }
  const int32_t M = divisors[testing::UniformInt(rng, 0, divisors.size() - 1)];
  const RolloutForest forest = testing::RandomForest(rng, K, M, GetParam() % 2 == 0);
  const auto views = EnumerateLeaves(forest);
  ASSERT_EQ(static_cast<int32_t>(views.size()), K);

  for (const auto& view : views) {
    // Path reconstruction and partition: walking up from the leaf and
    // concatenating segments gives the view, with consistent offsets.
    std::vector<SegmentRef> chain;
    SegmentRef ref = forest.leaf_refs()[view.leaf_index];
    while (true) {
      chain.push_back(ref);
      const auto& parent = forest.segment(ref).parent;
      if (!parent) break;
      ref.segment = *parent;
    }
    std::reverse(chain.begin(), chain.end());
    std::vector<TokenId> concat;
    for (const auto& link : chain) {
      const Segment& seg = forest.segment(link);
      EXPECT_EQ(seg.start_offset, static_cast<int32_t>(concat.size()));
      EXPECT_EQ(seg.tokens.size(), seg.behavior_logprobs.size());
      EXPECT_EQ(seg.tokens.size(), seg.entropies.size());
      concat.insert(concat.end(), seg.tokens.begin(), seg.tokens.end());
    }
    EXPECT_EQ(concat, view.Tokens());
    for (size_t j = 0; j < view.steps.size(); ++j) {
      const auto& step = view.steps[j];
      const Segment& seg = forest.segment(step.segment);
      EXPECT_EQ(seg.start_offset + step.offset_in_segment, static_cast<int32_t>(j));
      EXPECT_EQ(seg.tokens[step.offset_in_segment], step.token);
      EXPECT_EQ(seg.behavior_logprobs[step.offset_in_segment], step.behavior_logprob);
    }
  }

  // Leaf-set consistency per tree, and sibling distinctness.
  int32_t first_leaf = 0;
  for (int32_t t = 0; t < forest.num_trees(); ++t) {
    const RolloutTree& tree = forest.tree(t);
    std::vector<int32_t> expected(tree.leaf_count());
    std::iota(expected.begin(), expected.end(), first_leaf);
    EXPECT_EQ(LeavesUnder(forest, {t, tree.root()}), expected);
    first_leaf += tree.leaf_count();
    for (size_t s = 0; s < tree.segment_count(); ++s) {
      const Segment& seg = tree.segment(static_cast<int32_t>(s));
      if (!seg.synthetic && seg.parent) {
        EXPECT_GE(seg.size(), 1u);
      }
      std::set<TokenId> firsts;
      for (int32_t c : seg.children) {
        const Segment& child = tree.segment(c);
        if (!child.restart) EXPECT_TRUE(firsts.insert(child.tokens.front()).second);
      }
    }
  }

  // Token saving: strict iff some real segment splits.
  const auto counts = TotalGeneratedTokens(forest);
  EXPECT_LE(counts.segment_sum, counts.leaf_sum);
  EXPECT_EQ(counts.segment_sum < counts.leaf_sum, CountBranchPoints(forest) > 0);
}

INSTANTIATE_TEST_SUITE_P(Seeds, RandomForestProperties, ::testing::Range(0, 60));

}  // namespace
}  // namespace treeadv
