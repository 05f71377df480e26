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

#include <compare>
#include <cstdint>
#include <optional>
#include <vector>

#include "treeadv/common.h"

namespace treeadv {

// Addresses one segment occurrence inside a forest.
struct SegmentRef {
  int32_t tree = 0;
  int32_t segment = 0;
  auto operator<=>(const SegmentRef&) const = default;
};

// What the sampler saw at the position where a segment split into children.
struct BranchRecord {
  double entropy = 0.0;
  TokenId token = 0;  // the sampled token that became the first child
  bool armed = false;
  int32_t budget_remaining = 0;
  double tau = 0.0;
};

// A maximal run of tokens shared by every rollout passing through it.
// Per-token behavior log-probs and truncated entropies are recorded at
// sampling time and never recomputed.
struct Segment {
  std::vector<TokenId> tokens;
  std::vector<double> behavior_logprobs;
  std::vector<double> entropies;
  std::optional<int32_t> parent;
  std::vector<int32_t> children;
  int32_t start_offset = 0;
  // Zero-length root introduced when restarts are appended to a tree whose
  // original root already holds tokens.
  bool synthetic = false;
  // Child started by a root restart; exempt from first-token distinctness.
  bool restart = false;
  // Leaf closed by EOS or by the length limit.
  bool terminated = false;
  std::optional<BranchRecord> branch;
  int32_t leaf_index = -1;

  size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
  bool is_leaf() const { return children.empty(); }
};

class RolloutForest;

// One prefix tree of rollouts for a prompt. Segments live in an arena and
// reference each other by index. Growth is append-only.
class RolloutTree {
 public:
  explicit RolloutTree(std::vector<TokenId> prompt);

  const std::vector<TokenId>& prompt() const { return prompt_; }
  int32_t root() const { return root_; }
  const Segment& segment(int32_t index) const { return segments_.at(index); }
  size_t segment_count() const { return segments_.size(); }
  int32_t leaf_count() const;
  // True when every leaf segment has been terminated.
  bool complete() const;

  void Append(int32_t segment, TokenId token, double behavior_logprob,
              double entropy);

  // Seeds a new child of `parent` with its first token. Throws
  // DuplicateBranchToken when a (non-restart) sibling already starts with
  // `first_token`.
  int32_t AddChild(int32_t parent, TokenId first_token,
                   double behavior_logprob, double entropy);

  // Starts an independent rollout from the prompt. Attached under the root
  // when the root is empty; otherwise the tree is re-rooted at a synthetic
  // zero-length segment whose children are the old root and the restarts.
  int32_t AddRestart(TokenId first_token, double behavior_logprob,
                     double entropy);

  void Terminate(int32_t segment);
  void RecordBranch(int32_t segment, const BranchRecord& record);

 private:
  friend class RolloutForest;

  int32_t NewChild(int32_t parent, TokenId first_token,
                   double behavior_logprob, double entropy, bool restart);

  std::vector<TokenId> prompt_;
  std::vector<Segment> segments_;
  int32_t root_ = 0;
};

struct TrajectoryStep {
  TokenId token = 0;
  double behavior_logprob = 0.0;
  double entropy = 0.0;
  SegmentRef segment;
  int32_t offset_in_segment = 0;
};

// A root-to-leaf path flattened into per-position records; step j is the
// token at absolute position j.
struct TrajectoryView {
  int32_t leaf_index = 0;
  std::vector<TrajectoryStep> steps;
  double reward = 0.0;

  size_t size() const { return steps.size(); }
  std::vector<TokenId> Tokens() const;
};

struct TokenCounts {
  // Each segment counted once.
  int64_t segment_sum = 0;
  // Each trajectory counted in full, shared prefixes repeated per leaf.
  int64_t leaf_sum = 0;
};

// The M trees holding the K rollouts of one prompt. Leaf indices are
// assigned at construction: tree index first, then depth-first with
// children in creation order.
class RolloutForest {
 public:
  RolloutForest() = default;
  // Throws ShapeMismatch unless the trees hold exactly `total_leaves` leaves.
  RolloutForest(std::vector<RolloutTree> trees, int32_t total_leaves);

  const std::vector<RolloutTree>& trees() const { return trees_; }
  const RolloutTree& tree(int32_t index) const { return trees_.at(index); }
  const Segment& segment(SegmentRef ref) const {
    return trees_.at(ref.tree).segment(ref.segment);
  }
  int32_t num_leaves() const { return total_leaves_; }
  int32_t num_trees() const { return static_cast<int32_t>(trees_.size()); }
  const std::vector<SegmentRef>& leaf_refs() const { return leaf_refs_; }
  const std::vector<TokenId>& prompt() const;
  bool complete() const;

  // Fingerprint of the policy snapshot the forest was sampled under.
  uint64_t snapshot_hash() const { return snapshot_hash_; }
  void set_snapshot_hash(uint64_t hash) { snapshot_hash_ = hash; }

 private:
  std::vector<RolloutTree> trees_;
  std::vector<SegmentRef> leaf_refs_;
  int32_t total_leaves_ = 0;
  uint64_t snapshot_hash_ = 0;
};

// Exactly num_leaves() views in leaf-index order. Throws IncompleteForest
// if any leaf is still open.
std::vector<TrajectoryView> EnumerateLeaves(const RolloutForest& forest);

// Leaf indices of every rollout whose path passes through `ref`, ascending.
std::vector<int32_t> LeavesUnder(const RolloutForest& forest, SegmentRef ref);

TokenCounts TotalGeneratedTokens(const RolloutForest& forest);

// Number of segments that split into children (synthetic roots excluded).
int32_t CountBranchPoints(const RolloutForest& forest);

}  // namespace treeadv
