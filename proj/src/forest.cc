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

#include <algorithm>
#include <stdexcept>
#include <string>

namespace treeadv {

namespace {

// Visits segments of one tree depth-first, children in creation order.
template <typename Fn>
void DepthFirst(const RolloutTree& tree, int32_t start, Fn&& visit) {
  std::vector<int32_t> stack{start};
  while (!stack.empty()) {
    const int32_t index = stack.back();
    stack.pop_back();
    visit(index);
    const auto& children = tree.segment(index).children;
    for (auto it = children.rbegin(); it != children.rend(); ++it) {
      stack.push_back(*it);
    }
  }
}

}  // namespace

RolloutTree::RolloutTree(std::vector<TokenId> prompt)
    : prompt_(std::move(prompt)) {
  segments_.emplace_back();
}

int32_t RolloutTree::leaf_count() const {
  return static_cast<int32_t>(std::count_if(
      segments_.begin(), segments_.end(),
      [](const Segment& s) { return s.is_leaf(); }));
}

bool RolloutTree::complete() const {
  return std::all_of(segments_.begin(), segments_.end(), [](const Segment& s) {
    return !s.is_leaf() || s.terminated;
  });
}

void RolloutTree::Append(int32_t segment, TokenId token,
                         double behavior_logprob, double entropy) {
  Segment& s = segments_.at(segment);
  if (!s.children.empty() || s.terminated) {
    throw std::logic_error("append to a closed segment");
  }
  s.tokens.push_back(token);
  s.behavior_logprobs.push_back(behavior_logprob);
  s.entropies.push_back(entropy);
}

int32_t RolloutTree::NewChild(int32_t parent, TokenId first_token,
                              double behavior_logprob, double entropy,
                              bool restart) {
  Segment& p = segments_.at(parent);
  if (p.terminated) {
    throw std::logic_error("cannot branch from a terminated segment");
  }
  Segment child;
  child.parent = parent;
  child.start_offset = p.start_offset + static_cast<int32_t>(p.size());
  child.restart = restart;
  child.tokens.push_back(first_token);
  child.behavior_logprobs.push_back(behavior_logprob);
  child.entropies.push_back(entropy);
  const auto index = static_cast<int32_t>(segments_.size());
  p.children.push_back(index);
  segments_.push_back(std::move(child));
  return index;
}

int32_t RolloutTree::AddChild(int32_t parent, TokenId first_token,
                              double behavior_logprob, double entropy) {
  for (int32_t c : segments_.at(parent).children) {
    const Segment& sibling = segments_[c];
    if (!sibling.restart && sibling.tokens.front() == first_token) {
      throw DuplicateBranchToken("segment " + std::to_string(parent) +
                                 " already has a child starting with token " +
                                 std::to_string(first_token));
    }
  }
  return NewChild(parent, first_token, behavior_logprob, entropy, false);
}

int32_t RolloutTree::AddRestart(TokenId first_token, double behavior_logprob,
                                double entropy) {
  if (!segments_[root_].empty()) {
    Segment synthetic;
    synthetic.synthetic = true;
    synthetic.children.push_back(root_);
    const auto index = static_cast<int32_t>(segments_.size());
    segments_[root_].parent = index;
    segments_.push_back(std::move(synthetic));
    root_ = index;
  }
  return NewChild(root_, first_token, behavior_logprob, entropy, true);
}

void RolloutTree::Terminate(int32_t segment) {
  Segment& s = segments_.at(segment);
  if (!s.is_leaf() || s.empty()) {
    throw std::logic_error("only a non-empty leaf can be terminated");
  }
  s.terminated = true;
}

void RolloutTree::RecordBranch(int32_t segment, const BranchRecord& record) {
  segments_.at(segment).branch = record;
}

std::vector<TokenId> TrajectoryView::Tokens() const {
  std::vector<TokenId> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.token);
  return out;
}

RolloutForest::RolloutForest(std::vector<RolloutTree> trees,
                             int32_t total_leaves)
    : trees_(std::move(trees)), total_leaves_(total_leaves) {
  for (int32_t t = 0; t < num_trees(); ++t) {
    RolloutTree& tree = trees_[t];
    DepthFirst(tree, tree.root(), [&](int32_t index) {
      Segment& s = tree.segments_[index];
      if (s.is_leaf()) {
        s.leaf_index = static_cast<int32_t>(leaf_refs_.size());
        leaf_refs_.push_back({t, index});
      }
    });
  }
  if (static_cast<int32_t>(leaf_refs_.size()) != total_leaves_) {
    throw ShapeMismatch("forest holds " + std::to_string(leaf_refs_.size()) +
                        " leaves, expected " + std::to_string(total_leaves_));
  }
}

const std::vector<TokenId>& RolloutForest::prompt() const {
  static const std::vector<TokenId> kEmpty;
  return trees_.empty() ? kEmpty : trees_.front().prompt();
}

bool RolloutForest::complete() const {
  return std::all_of(trees_.begin(), trees_.end(),
                     [](const RolloutTree& t) { return t.complete(); });
}

std::vector<TrajectoryView> EnumerateLeaves(const RolloutForest& forest) {
  if (!forest.complete()) {
    throw IncompleteForest("forest has an unterminated frontier path");
  }
  std::vector<TrajectoryView> views;
  views.reserve(forest.leaf_refs().size());
  std::vector<int32_t> chain;
  for (const SegmentRef& leaf : forest.leaf_refs()) {
    const RolloutTree& tree = forest.tree(leaf.tree);
    chain.clear();
    for (std::optional<int32_t> s = leaf.segment; s; s = tree.segment(*s).parent) {
      chain.push_back(*s);
    }
    TrajectoryView view;
    view.leaf_index = tree.segment(leaf.segment).leaf_index;
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
      const Segment& seg = tree.segment(*it);
      for (size_t j = 0; j < seg.size(); ++j) {
        view.steps.push_back({seg.tokens[j], seg.behavior_logprobs[j],
                              seg.entropies[j], SegmentRef{leaf.tree, *it},
                              static_cast<int32_t>(j)});
      }
    }
    views.push_back(std::move(view));
  }
  return views;
}

std::vector<int32_t> LeavesUnder(const RolloutForest& forest, SegmentRef ref) {
  const RolloutTree& tree = forest.tree(ref.tree);
  std::vector<int32_t> leaves;
  DepthFirst(tree, ref.segment, [&](int32_t index) {
    const Segment& s = tree.segment(index);
    if (s.is_leaf()) leaves.push_back(s.leaf_index);
  });
  return leaves;
}

TokenCounts TotalGeneratedTokens(const RolloutForest& forest) {
  TokenCounts counts;
  for (int32_t t = 0; t < forest.num_trees(); ++t) {
    const RolloutTree& tree = forest.tree(t);
    for (size_t i = 0; i < tree.segment_count(); ++i) {
      counts.segment_sum += static_cast<int64_t>(tree.segment(i).size());
    }
  }
  for (const SegmentRef& leaf : forest.leaf_refs()) {
    const Segment& s = forest.segment(leaf);
    counts.leaf_sum += s.start_offset + static_cast<int64_t>(s.size());
  }
  return counts;
}

int32_t CountBranchPoints(const RolloutForest& forest) {
  int32_t n = 0;
  for (const RolloutTree& tree : forest.trees()) {
    for (size_t i = 0; i < tree.segment_count(); ++i) {
      const Segment& s = tree.segment(i);
      if (!s.synthetic && s.children.size() >= 2) ++n;
    }
  }
  return n;
}

}  // namespace treeadv
