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

#include "treeadv/sampler.h"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <string>

namespace treeadv {

void BranchPolicy::Validate() const {
  if (!(tau_floor >= 0.0)) {
    throw ConfigError("branch.tau_floor", "must be >= 0");
  }
  if (!(tau_floor <= tau_init)) {
    throw ConfigError("branch.tau_init", "must be >= tau_floor");
  }
  if (!(tau_floor <= tau && tau <= tau_init)) {
    throw ConfigError("branch.tau", "must lie in [tau_floor, tau_init]");
  }
  if (!(tau_decrement >= 0.0)) {
    throw ConfigError("branch.tau_decrement", "must be >= 0");
  }
  if (branch_factor < 2) {
    throw ConfigError("branch.branch_factor", "must be >= 2");
  }
  if (top_k < 2) throw ConfigError("branch.top_k", "must be >= 2");
  if (branch_factor > top_k) {
    throw ConfigError("branch.branch_factor", "must not exceed top_k");
  }
}

double TruncatedEntropy(std::span<const double> topk_probs) {
  double sum = 0.0;
  double h = 0.0;
  for (double p : topk_probs) {
    if (!(p > 0.0) || p > 1.0) {
      throw InvalidDistribution("probability outside (0, 1]: " +
                                std::to_string(p));
    }
    sum += p;
    h -= p * std::log(p);
  }
  if (sum > 1.0 + 1e-9) {
    throw InvalidDistribution("probabilities sum to " + std::to_string(sum));
  }
  return h;
}

std::vector<TokenId> TopKTokens(std::span<const double> probs, int32_t k) {
  std::vector<TokenId> ids(probs.size());
  std::iota(ids.begin(), ids.end(), 0);
  const auto n = std::min<size_t>(static_cast<size_t>(std::max(k, 0)), ids.size());
  std::partial_sort(ids.begin(), ids.begin() + n, ids.end(),
                    [&](TokenId a, TokenId b) {
                      return probs[a] != probs[b] ? probs[a] > probs[b] : a < b;
                    });
  ids.resize(n);
  return ids;
}

double TruncatedEntropyOfLogProbs(std::span<const double> logprobs, int32_t k) {
  std::vector<double> probs(logprobs.size());
  std::transform(logprobs.begin(), logprobs.end(), probs.begin(),
                 [](double lp) { return std::exp(lp); });
  std::vector<double> support;
  for (TokenId id : TopKTokens(probs, k)) {
    // Underflowed entries carry no entropy.
    if (probs[id] > 0.0) support.push_back(std::min(probs[id], 1.0));
  }
  // exp(log-softmax) can overshoot 1 by an ulp in total; rescale so the
  // validity check in TruncatedEntropy is about the model, not rounding.
  const double total = std::accumulate(support.begin(), support.end(), 0.0);
  if (total > 1.0) {
    for (double& p : support) p /= total;
  }
  return TruncatedEntropy(support);
}

bool ShouldBranch(double entropy, TokenId next_token, bool armed,
                  const BranchPolicy& policy, int32_t tree_budget_remaining) {
  return entropy > policy.tau && !policy.no_branch_tokens.contains(next_token) &&
         armed && tree_budget_remaining >= policy.branch_factor - 1;
}

namespace {

constexpr int32_t kRestartPending = -1;

struct Frontier {
  int32_t segment = kRestartPending;
  std::vector<TokenId> context;  // prompt + generated tokens
  int32_t length = 0;            // generated tokens
  bool armed = false;
};

// Draws one index from `weights` (unnormalized, non-negative).
size_t DrawIndex(std::span<const double> weights, Rng& rng) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  const double u = Uniform01(rng) * total;
  double acc = 0.0;
  size_t last_positive = 0;
  for (size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last_positive = i;
    if (u < acc) return i;
  }
  return last_positive;
}

class TreeGrower {
 public:
  TreeGrower(std::span<const TokenId> prompt, const PolicyModel& policy,
             const BranchPolicy& branch, const DecodeConfig& decode,
             int32_t quota, uint64_t seed)
      : prompt_(prompt.begin(), prompt.end()),
        policy_(policy),
        branch_(branch),
        decode_(decode),
        quota_(quota),
        rng_(seed),
        tree_(prompt_) {}

  RolloutTree Run() {
    Frontier first;
    first.segment = tree_.root();
    first.context = prompt_;
    pending_.push_back(std::move(first));
    planned_leaves_ = 1;
    while (true) {
      while (!pending_.empty()) {
        Frontier path = std::move(pending_.back());
        pending_.pop_back();
        Extend(std::move(path));
      }
      if (planned_leaves_ >= quota_) break;
      // Every path terminated short of the quota: restart from the prompt.
      Frontier restart;
      restart.context = prompt_;
      pending_.push_back(std::move(restart));
      ++planned_leaves_;
    }
    return std::move(tree_);
  }

 private:
  bool Finished(const Frontier& path) const {
    return path.length > 0 && (path.context.back() == decode_.eos_token ||
                               path.length >= decode_.max_tokens());
  }

  void Extend(Frontier path) {
    while (!Finished(path)) {
      const std::vector<double> logp = policy_.LogProbs(path.context);
      std::vector<double> probs(logp.size());
      std::transform(logp.begin(), logp.end(), probs.begin(),
                     [](double lp) { return std::exp(lp); });
      const double entropy = TruncatedEntropyOfLogProbs(logp, branch_.top_k);
      const std::vector<TokenId> topk = TopKTokens(probs, branch_.top_k);
      const TokenId token = SampleToken(probs, topk);

      const int32_t remaining = quota_ - planned_leaves_;
      const auto positive = std::count_if(
          topk.begin(), topk.end(), [&](TokenId id) { return probs[id] > 0.0; });
      const bool branch =
          path.segment != kRestartPending &&
          ShouldBranch(entropy, token, path.armed, branch_, remaining) &&
          positive >= branch_.branch_factor;

      if (branch) {
        tree_.RecordBranch(path.segment, BranchRecord{entropy, token, path.armed,
                                                      remaining, branch_.tau});
        std::vector<TokenId> chosen{token};
        DrawDistinct(probs, topk, chosen);
        std::vector<int32_t> children;
        for (TokenId t : chosen) {
          children.push_back(tree_.AddChild(path.segment, t, logp[t], entropy));
        }
        planned_leaves_ += branch_.branch_factor - 1;
        // Later siblings wait on the stack; the first child continues now.
        for (size_t j = chosen.size() - 1; j >= 1; --j) {
          Frontier sibling;
          sibling.segment = children[j];
          sibling.context = path.context;
          sibling.context.push_back(chosen[j]);
          sibling.length = path.length + 1;
          sibling.armed = false;
          pending_.push_back(std::move(sibling));
        }
        path.segment = children[0];
        path.armed = false;
      } else if (path.segment == kRestartPending) {
        path.segment = tree_.AddRestart(token, logp[token], entropy);
        path.armed = branch_.delimiter_tokens.contains(token);
      } else {
        tree_.Append(path.segment, token, logp[token], entropy);
        path.armed = path.armed || branch_.delimiter_tokens.contains(token);
      }
      path.context.push_back(token);
      ++path.length;
    }
    tree_.Terminate(path.segment);
  }

  // Nucleus over the full distribution, then top-k truncation, renormalized.
  TokenId SampleToken(const std::vector<double>& probs,
                      const std::vector<TokenId>& topk) {
    std::vector<double> weights;
    double mass = 0.0;
    for (TokenId id : topk) {
      if (mass >= decode_.top_p && !weights.empty()) break;
      weights.push_back(probs[id]);
      mass += probs[id];
    }
    return topk[DrawIndex(weights, rng_)];
  }

  // Extends `chosen` to branch_factor distinct tokens drawn without
  // replacement from the renormalized top-k distribution.
  void DrawDistinct(const std::vector<double>& probs,
                    const std::vector<TokenId>& topk, std::vector<TokenId>& chosen) {
    std::vector<double> weights(topk.size());
    for (size_t i = 0; i < topk.size(); ++i) weights[i] = probs[topk[i]];
    for (size_t i = 0; i < topk.size(); ++i) {
      if (topk[i] == chosen.front()) weights[i] = 0.0;
    }
    while (static_cast<int32_t>(chosen.size()) < branch_.branch_factor) {
      const size_t pick = DrawIndex(weights, rng_);
      chosen.push_back(topk[pick]);
      weights[pick] = 0.0;
    }
  }

  std::vector<TokenId> prompt_;
  const PolicyModel& policy_;
  const BranchPolicy& branch_;
  const DecodeConfig& decode_;
  int32_t quota_;
  Rng rng_;
  RolloutTree tree_;
  std::vector<Frontier> pending_;
  int32_t planned_leaves_ = 0;
};

}  // namespace

RolloutTree GrowTree(std::span<const TokenId> prompt, const PolicyModel& policy_old,
                     const BranchPolicy& branch_policy, const DecodeConfig& decode,
                     int32_t quota, uint64_t seed) {
  if (quota < 1) {
    throw BudgetInfeasible("tree quota must be >= 1, got " + std::to_string(quota));
  }
  return TreeGrower(prompt, policy_old, branch_policy, decode, quota, seed).Run();
}

RolloutForest SampleForest(std::span<const TokenId> prompt,
                           const PolicyModel& policy_old,
                           const BranchPolicy& branch_policy,
                           const DecodeConfig& decode, int32_t K, int32_t M,
                           uint64_t seed, bool parallel) {
  if (M < 1 || K < M || K % M != 0) {
    throw BudgetInfeasible("K=" + std::to_string(K) + " is not divisible into M=" +
                           std::to_string(M) + " trees");
  }
  const int32_t quota = K / M;
  std::vector<RolloutTree> trees;
  trees.reserve(M);
  if (parallel && M > 1) {
    std::vector<std::future<RolloutTree>> jobs;
    for (int32_t j = 0; j < M; ++j) {
      jobs.push_back(std::async(std::launch::async, [&, j] {
        return GrowTree(prompt, policy_old, branch_policy, decode, quota,
                        DeriveSeed(seed, j));
      }));
    }
    for (auto& job : jobs) trees.push_back(job.get());
  } else {
    for (int32_t j = 0; j < M; ++j) {
      trees.push_back(GrowTree(prompt, policy_old, branch_policy, decode, quota,
                               DeriveSeed(seed, j)));
    }
  }
  RolloutForest forest(std::move(trees), K);
  forest.set_snapshot_hash(policy_old.Fingerprint());
  return forest;
}

BranchPolicy Anneal(const BranchPolicy& branch_policy, int64_t event_count) {
  BranchPolicy out = branch_policy;
  out.tau = std::max(branch_policy.tau_floor,
                     branch_policy.tau_init -
                         branch_policy.tau_decrement * static_cast<double>(event_count));
  return out;
}

}  // namespace treeadv
