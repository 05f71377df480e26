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
#include <set>
#include <string>

#include "treeadv/env.h"
#include "treeadv/objective.h"
#include "treeadv/sampler.h"

namespace treeadv {

enum class LrSchedule { kConstant, kWarmupCosine };

// Every tunable of a run. Parsed from and written to a flat key = value
// document (see README); the written form parses back to an equal config.
struct RunConfig {
  SurrogateMode mode = SurrogateMode::kTreeAdvGrpo;
  int32_t K = 16;
  int32_t M = 4;

  // Branching; tau starts at tau_init and follows Anneal().
  double tau_init = 1.4;
  double tau_floor = 1.0;
  double tau_decrement = 0.05;
  AnnealCadence anneal_cadence = AnnealCadence::kPerEpoch;
  int32_t branch_factor = 2;
  int32_t top_k = 20;
  double top_p = 1.0;
  std::set<TokenId> no_branch_tokens;

  double epsilon = 0.2;
  double delta = 1e-8;
  double kl_coeff = 0.0;

  LrSchedule lr_schedule = LrSchedule::kConstant;
  double lr = 0.3;  // constant rate, or the peak of warmup-cosine
  double lr_min = 0.0;
  int32_t warmup_steps = 2;

  int32_t batch_size = 8;
  int32_t total_steps = 200;
  // Gradient passes over each sampled batch; > 1 moves ratios off 1.
  int32_t reuse_epochs = 1;
  int32_t checkpoint_every = 5;
  uint64_t seed = 1;

  TaskKind task = TaskKind::kParity;
  int32_t vocab_size = 12;
  int32_t operands = 3;
  int32_t base = 4;
  int32_t length_cap = 64;
  std::set<TokenId> stall_tokens;

  int32_t window = 3;
  // Adds one feature per distinct window content on top of the per-slot
  // one-hots. Per-slot features alone cannot express XOR-like targets.
  bool joint_features = false;
  // Adds one feature per distinct prompt so the policy keeps seeing the
  // question after it slides out of the window.
  bool prompt_features = true;
  double init_scale = 0.0;
  // Training prompts are drawn from a fixed pool; one epoch is one pass.
  int32_t train_pool = 256;
  int32_t eval_instances = 200;
  // Greedy accuracy is measured every eval_every steps (0 disables).
  int32_t eval_every = 1;
  bool parallel = false;

  // Throws ConfigError naming the offending field.
  void Validate() const;

  TaskFamily Family() const;
  BranchPolicy Branch() const;
  DecodeConfig Decode() const;
  ClipConfig Clip() const;
  Vocabulary Vocab() const { return Vocabulary{vocab_size}; }
};

// Defaults tuned for the parity family: stall token id and no-branch list
// filled from the vocabulary.
RunConfig DefaultConfig();

// Parses and validates. Unknown keys and malformed values throw ConfigError.
RunConfig ParseConfig(const std::string& text);
RunConfig LoadConfig(const std::filesystem::path& path);
std::string FormatConfig(const RunConfig& config);

}  // namespace treeadv
