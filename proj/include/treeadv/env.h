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
#include <string>
#include <string_view>
#include <vector>

#include "treeadv/common.h"

namespace treeadv {

// Token layout shared by every task family: digits 0..num_digits-1 come
// first, then the four special tokens.
struct Vocabulary {
  int32_t size = 12;

  int32_t num_digits() const { return size - 4; }
  TokenId delimiter() const { return size - 4; }
  TokenId stall() const { return size - 3; }
  TokenId bos() const { return size - 2; }
  TokenId eos() const { return size - 1; }
};

enum class TaskKind { kParity, kCopy, kModularSum };

std::string_view TaskKindName(TaskKind kind);
// Accepts "parity", "copy", "modular-sum".
TaskKind ParseTaskKind(std::string_view name);

struct TaskFamily {
  TaskKind kind = TaskKind::kParity;
  Vocabulary vocab;
  // Number of bits / payload digits / summands in a prompt.
  int32_t operands = 3;
  // Modulus for modular-sum; digits are drawn from [0, base).
  int32_t base = 4;
  int32_t length_cap = 64;

  // Operands plus the trailing query token.
  int32_t PromptLength() const { return operands + 1; }

  // Throws ConfigError (field prefix "task") on unsolvable settings.
  void Validate() const;
};

// One problem. A completion is accepted when it is exactly
// answer_prefix + answer + EOS. Parity and modular-sum put the delimiter in
// front of the answer; copy echoes the payload directly.
struct TaskInstance {
  std::vector<TokenId> prompt;
  std::vector<TokenId> answer;
  std::vector<TokenId> answer_prefix;
  std::set<TokenId> delimiter_tokens;
  TokenId eos_token = 0;
  int32_t length_cap = 64;

  // 1 if accepted, else 0. Pure and total on any token sequence.
  double Verify(std::span<const TokenId> completion) const;
  // The accepted completion.
  std::vector<TokenId> ReferenceCompletion() const;
};

// Deterministic in (family, seed): instance j depends only on
// DeriveSeed(seed, j).
std::vector<TaskInstance> Generate(const TaskFamily& family, uint64_t seed,
                                   int32_t count);

// Verifier result in {0, 1}, overridden to -1 when the completion is longer
// than the instance's length cap.
double Reward(const TaskInstance& instance, std::span<const TokenId> completion);

int32_t StallTokenCount(std::span<const TokenId> completion,
                        const std::set<TokenId>& stall_tokens);

}  // namespace treeadv
