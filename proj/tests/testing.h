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

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "treeadv/common.h"
#include "treeadv/forest.h"
#include "treeadv/policy.h"

namespace treeadv::testing {

inline int32_t UniformInt(Rng& rng, int32_t lo, int32_t hi) {
  return lo + static_cast<int32_t>(Uniform01(rng) * (hi - lo + 1));
}

// Random tree holding exactly `leaves` leaves. Internal segments split into
// 2..4 children with distinct first tokens; segment lengths are 1..4.
// With `restarts`, part of the quota is spent on root restarts so that
// synthetic roots show up.
class RandomTreeBuilder {
 public:
  RandomTreeBuilder(Rng& rng, int32_t vocab) : rng_(rng), vocab_(vocab) {}

  RolloutTree Build(int32_t leaves, bool restarts) {
    RolloutTree tree({0, 1, 2});
    int32_t main_leaves = leaves;
    int32_t restart_count = 0;
    if (restarts && leaves > 1 && Uniform01(rng_) < 0.5) {
      restart_count = UniformInt(rng_, 1, leaves - 1);
      main_leaves = leaves - restart_count;
    }
    Append(tree, tree.root(), UniformInt(rng_, 1, 4));
    Grow(tree, tree.root(), main_leaves);
    for (int32_t r = 0; r < restart_count; ++r) {
      const int32_t seg = tree.AddRestart(Token(), LogProb(), Entropy());
      Append(tree, seg, UniformInt(rng_, 0, 3));
      Grow(tree, seg, 1);
    }
    return tree;
  }

 private:
  TokenId Token() { return UniformInt(rng_, 0, vocab_ - 1); }
  double LogProb() { return -3.0 * Uniform01(rng_); }
  double Entropy() { return 2.0 * Uniform01(rng_); }

  void Append(RolloutTree& tree, int32_t seg, int32_t n) {
    for (int32_t i = 0; i < n; ++i) tree.Append(seg, Token(), LogProb(), Entropy());
  }

  void Grow(RolloutTree& tree, int32_t seg, int32_t leaves) {
    if (leaves == 1) {
      tree.Terminate(seg);
      return;
    }
    const int32_t n_children = UniformInt(rng_, 2, std::min({leaves, 4, vocab_}));
    // Split `leaves` into n_children positive parts.
    std::vector<int32_t> parts(n_children, 1);
    for (int32_t extra = leaves - n_children; extra > 0; --extra) {
      ++parts[UniformInt(rng_, 0, n_children - 1)];
    }
    std::vector<TokenId> tokens(vocab_);
    std::iota(tokens.begin(), tokens.end(), 0);
    for (int32_t i = vocab_ - 1; i > 0; --i) {
      std::swap(tokens[i], tokens[UniformInt(rng_, 0, i)]);
    }
    tree.RecordBranch(seg, BranchRecord{Entropy(), tokens[0], true, leaves, 1.0});
    for (int32_t c = 0; c < n_children; ++c) {
      const int32_t child = tree.AddChild(seg, tokens[c], LogProb(), Entropy());
      Append(tree, child, UniformInt(rng_, 0, 3));
      Grow(tree, child, parts[c]);
    }
  }

  Rng& rng_;
  int32_t vocab_;
};

inline RolloutForest RandomForest(Rng& rng, int32_t K, int32_t M, bool restarts,
                                  int32_t vocab = 12) {
  RandomTreeBuilder builder(rng, vocab);
  std::vector<RolloutTree> trees;
  for (int32_t m = 0; m < M; ++m) trees.push_back(builder.Build(K / M, restarts));
  return RolloutForest(std::move(trees), K);
}

inline std::vector<double> RandomRewards(Rng& rng, int32_t K) {
  std::vector<double> r(K);
  for (double& x : r) x = Uniform01(rng) < 0.3 ? -1.0 : std::floor(Uniform01(rng) * 2.0);
  // Occasionally continuous rewards to avoid ties everywhere.
  if (Uniform01(rng) < 0.3) {
    for (double& x : r) x = 2.0 * Uniform01(rng) - 1.0;
  }
  return r;
}

// The three-leaf tree used throughout the docs:
//   root [5,6] -> n_L [1] -> y1 [2]
//              -> n_R [3] -> y2 [4]
//                         -> y3 [7]
struct Fig2 {
  RolloutForest forest;
  SegmentRef root, n_left, n_right, y1, y2, y3;
};

inline Fig2 BuildFig2() {
  RolloutTree tree({0, 1, 0, 8});
  const int32_t root = tree.root();
  tree.Append(root, 5, -0.1, 1.0);
  tree.Append(root, 6, -0.2, 1.5);
  const int32_t left = tree.AddChild(root, 1, -0.7, 1.6);
  const int32_t right = tree.AddChild(root, 3, -0.8, 1.6);
  const int32_t y1 = tree.AddChild(left, 2, -0.3, 0.4);
  const int32_t y2 = tree.AddChild(right, 4, -0.9, 1.5);
  const int32_t y3 = tree.AddChild(right, 7, -0.6, 1.5);
  for (int32_t leaf : {y1, y2, y3}) tree.Terminate(leaf);
  std::vector<RolloutTree> trees;
  trees.push_back(std::move(tree));
  return Fig2{RolloutForest(std::move(trees), 3), {0, root}, {0, left},
              {0, right},                         {0, y1},   {0, y2},
              {0, y3}};
}

// Policy with a fixed next-token distribution regardless of context.
class FixedPolicy final : public PolicyModel {
 public:
  explicit FixedPolicy(std::vector<double> probs) : logp_(probs.size()) {
    for (size_t i = 0; i < probs.size(); ++i) {
      logp_[i] = probs[i] > 0.0 ? std::log(probs[i]) : -INFINITY;
    }
  }
  int32_t vocab_size() const override { return static_cast<int32_t>(logp_.size()); }
  std::vector<double> LogProbs(std::span<const TokenId>) const override { return logp_; }
  uint64_t Fingerprint() const override { return 42; }

 private:
  std::vector<double> logp_;
};

}  // namespace treeadv::testing
