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
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "treeadv/common.h"

namespace treeadv {

// Next-token distribution over a fixed vocabulary. Sampling code only sees
// this interface so a richer model can stand in for the linear one.
class PolicyModel {
 public:
  virtual ~PolicyModel() = default;
  virtual int32_t vocab_size() const = 0;
  // log pi(. | context) where context is the prompt followed by the
  // generated tokens so far.
  virtual std::vector<double> LogProbs(std::span<const TokenId> context) const = 0;
  // Stable hash of the parameters.
  virtual uint64_t Fingerprint() const = 0;
};

// Upper bound on vocab^window when joint n-gram features are enabled.
inline constexpr int64_t kMaxJointRows = 1 << 16;

// Dense gradient with the same layout as LinearPolicy::weights().
using ParamGrad = std::vector<double>;

// Linear softmax over one-hot features of the last `window` tokens (left
// padded with BOS). Feature rows, in order: one block of `vocab` rows per
// window slot, optionally one row per distinct window content (the joint
// n-gram, vocab^window rows), optionally one row per distinct prompt (the
// first prompt_length context tokens, vocab^prompt_length rows), then a
// bias row. Weights are row-major with shape rows() x vocab.
class LinearPolicy final : public PolicyModel {
 public:
  LinearPolicy(int32_t vocab_size, int32_t window, TokenId bos_token,
               bool joint_features = false, int32_t prompt_length = 0);

  int32_t vocab_size() const override { return vocab_size_; }
  int32_t window() const { return window_; }
  TokenId bos_token() const { return bos_token_; }
  bool joint_features() const { return joint_rows_ > 0; }
  int32_t prompt_length() const { return prompt_length_; }
  int32_t rows() const {
    return window_ * vocab_size_ + joint_rows_ + prompt_rows_ + 1;
  }
  int32_t cols() const { return vocab_size_; }

  std::vector<double>& weights() { return weights_; }
  const std::vector<double>& weights() const { return weights_; }
  double& at(int32_t row, int32_t col) { return weights_[row * cols() + col]; }
  double at(int32_t row, int32_t col) const { return weights_[row * cols() + col]; }

  // Row indices of the active one-hot features (window slots, joint
  // n-gram and prompt when enabled, then bias).
  std::vector<int32_t> ActiveRows(std::span<const TokenId> context) const;
  std::vector<double> Logits(std::span<const TokenId> context) const;
  std::vector<double> LogProbs(std::span<const TokenId> context) const override;
  std::vector<double> Distribution(std::span<const TokenId> context) const;

  // logp of `token` and its gradient w.r.t. every weight:
  // (onehot(token) - probs) outer features(context).
  double LogProbAndGrad(std::span<const TokenId> context, TokenId token,
                        ParamGrad* grad) const;
  // grad += scale * d logp(token | context) / d weights; returns logp.
  double AccumulateLogProbGrad(std::span<const TokenId> context, TokenId token,
                               double scale, ParamGrad& grad) const;

  ParamGrad ZeroGrad() const { return ParamGrad(weights_.size(), 0.0); }
  uint64_t Fingerprint() const override;

 private:
  int32_t vocab_size_;
  int32_t window_;
  TokenId bos_token_;
  int32_t joint_rows_ = 0;
  int32_t prompt_length_ = 0;
  int32_t prompt_rows_ = 0;
  std::vector<double> weights_;
};

// Frozen copy used for pi_old and pi_ref; rollouts never read live params.
using PolicySnapshot = std::shared_ptr<const LinearPolicy>;

PolicySnapshot Snapshot(const LinearPolicy& params);

// True when both policies use the same feature layout, so weights of one
// can stand in for the other.
bool SameShape(const LinearPolicy& a, const LinearPolicy& b);

// weights <- weights - lr * grad
void SgdStep(LinearPolicy& params, const ParamGrad& grad, double lr);

// Fills weights with N(0, scale^2) draws; scale 0 leaves them at zero.
void InitializeWeights(LinearPolicy& params, double scale, uint64_t seed);

struct Checkpoint {
  LinearPolicy params;
  int64_t step = 0;
};

// JSON document: {"format_version": 1, "vocab_size", "window", "bos_token",
// "joint_features", "prompt_length", "rows", "cols", "step", "weights": [...]}.
void SaveCheckpoint(const std::filesystem::path& path, const LinearPolicy& params,
                    int64_t step);
// Throws CheckpointError on malformed files or unsupported versions.
Checkpoint LoadCheckpoint(const std::filesystem::path& path);

}  // namespace treeadv
