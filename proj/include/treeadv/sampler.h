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

#include <cstdint>
#include <set>
#include <span>
#include <vector>

#include "treeadv/common.h"
#include "treeadv/forest.h"
#include "treeadv/policy.h"

namespace treeadv {

enum class AnnealCadence { kPerEpoch, kPerStep };

// Entropy-guided branching rules.
struct BranchPolicy {
  double tau = 1.4;
  double tau_init = 1.4;
  double tau_floor = 1.0;
  double tau_decrement = 0.05;
  AnnealCadence anneal_cadence = AnnealCadence::kPerEpoch;
  int32_t branch_factor = 2;
  std::set<TokenId> no_branch_tokens;
  std::set<TokenId> delimiter_tokens;
  int32_t top_k = 20;

  // Throws ConfigError (field prefix "branch") on broken invariants.
  void Validate() const;
};

struct DecodeConfig {
  TokenId eos_token = 0;
  // A path that has not produced EOS after `length_cap` tokens gets one
  // more token and stops, so over-long rollouts are observable as
  // length_cap + 1.
  int32_t length_cap = 64;
  // Nucleus mass applied to the full distribution before top-k truncation.
  double top_p = 1.0;

  int32_t max_tokens() const { return length_cap + 1; }
};

// Entropy -sum p ln p over the given entries only. Entries must lie in
// (0, 1] and sum to at most 1 + 1e-9, else InvalidDistribution.
double TruncatedEntropy(std::span<const double> topk_probs);

// Token ids of the k most likely entries, by probability descending and
// token id ascending on ties.
std::vector<TokenId> TopKTokens(std::span<const double> probs, int32_t k);

// Truncated entropy of a full log-prob vector over its top-k support. The
// support is taken before any nucleus filtering.
double TruncatedEntropyOfLogProbs(std::span<const double> logprobs, int32_t k);

bool ShouldBranch(double entropy, TokenId next_token, bool armed,
                  const BranchPolicy& policy, int32_t tree_budget_remaining);

// Grows one tree with exactly `quota` leaves under the behavior policy.
// Throws BudgetInfeasible if quota < 1.
RolloutTree GrowTree(std::span<const TokenId> prompt, const PolicyModel& policy_old,
                     const BranchPolicy& branch_policy, const DecodeConfig& decode,
                     int32_t quota, uint64_t seed);

// M trees of K/M leaves each. Tree j uses sub-seed DeriveSeed(seed, j), so
// growing trees concurrently (`parallel`) yields the same forest.
RolloutForest SampleForest(std::span<const TokenId> prompt,
                           const PolicyModel& policy_old,
                           const BranchPolicy& branch_policy,
                           const DecodeConfig& decode, int32_t K, int32_t M,
                           uint64_t seed, bool parallel = false);

// tau = max(tau_floor, tau_init - tau_decrement * event_count).
BranchPolicy Anneal(const BranchPolicy& branch_policy, int64_t event_count);

}  // namespace treeadv
