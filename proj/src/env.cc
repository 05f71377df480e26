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

#include "treeadv/env.h"

#include <algorithm>
#include <stdexcept>

namespace treeadv {

std::string_view TaskKindName(TaskKind kind) {
  switch (kind) {
    case TaskKind::kParity:
      return "parity";
    case TaskKind::kCopy:
      return "copy";
    case TaskKind::kModularSum:
      return "modular-sum";
  }
  return "unknown";
}

TaskKind ParseTaskKind(std::string_view name) {
  for (auto kind : {TaskKind::kParity, TaskKind::kCopy, TaskKind::kModularSum}) {
    if (name == TaskKindName(kind)) return kind;
  }
  throw std::invalid_argument("unknown task family '" + std::string(name) + "'");
}

void TaskFamily::Validate() const {
  if (vocab.size < 6) {
    throw ConfigError("task.vocab_size", "must be >= 6 (two digits + 4 specials)");
  }
  if (operands < 1) throw ConfigError("task.operands", "must be >= 1");
  if (kind == TaskKind::kModularSum &&
      (base < 2 || base > vocab.num_digits())) {
    throw ConfigError("task.base", "must lie in [2, number of digit tokens]");
  }
  // The accepted completion must fit under the cap.
  const int32_t completion_len = kind == TaskKind::kCopy ? operands + 1 : 3;
  if (length_cap < completion_len) {
    throw ConfigError("task.length_cap", "too small for the accepted completion");
  }
}

double TaskInstance::Verify(std::span<const TokenId> completion) const {
  const std::vector<TokenId> expected = ReferenceCompletion();
  return std::equal(completion.begin(), completion.end(), expected.begin(),
                    expected.end())
             ? 1.0
             : 0.0;
}

std::vector<TokenId> TaskInstance::ReferenceCompletion() const {
  std::vector<TokenId> out = answer_prefix;
  out.insert(out.end(), answer.begin(), answer.end());
  out.push_back(eos_token);
  return out;
}

std::vector<TaskInstance> Generate(const TaskFamily& family, uint64_t seed,
                                   int32_t count) {
  family.Validate();
  if (count < 1) throw std::invalid_argument("instance count must be >= 1");
  const Vocabulary& v = family.vocab;
  std::vector<TaskInstance> out;
  out.reserve(count);
  for (int32_t j = 0; j < count; ++j) {
    Rng rng(DeriveSeed(seed, static_cast<uint64_t>(j)));
    auto draw = [&rng](int32_t n) {
      return static_cast<TokenId>(Uniform01(rng) * n);
    };
    TaskInstance inst;
    inst.delimiter_tokens = {v.delimiter()};
    if (family.kind != TaskKind::kCopy) inst.answer_prefix = {v.delimiter()};
    inst.eos_token = v.eos();
    inst.length_cap = family.length_cap;
    switch (family.kind) {
      case TaskKind::kParity: {
        TokenId parity = 0;
        for (int32_t b = 0; b < family.operands; ++b) {
          const TokenId bit = draw(2);
          inst.prompt.push_back(bit);
          parity ^= bit;
        }
        inst.answer = {parity};
        break;
      }
      case TaskKind::kCopy: {
        for (int32_t b = 0; b < family.operands; ++b) {
          inst.prompt.push_back(draw(v.num_digits()));
        }
        inst.answer = inst.prompt;
        break;
      }
      case TaskKind::kModularSum: {
        int32_t sum = 0;
        for (int32_t b = 0; b < family.operands; ++b) {
          const TokenId d = draw(family.base);
          inst.prompt.push_back(d);
          sum += d;
        }
        inst.answer = {static_cast<TokenId>(sum % family.base)};
        break;
      }
    }
    // The delimiter doubles as the query marker closing the prompt.
    inst.prompt.push_back(v.delimiter());
    out.push_back(std::move(inst));
  }
  return out;
}

double Reward(const TaskInstance& instance, std::span<const TokenId> completion) {
  if (static_cast<int64_t>(completion.size()) > instance.length_cap) return -1.0;
  return instance.Verify(completion);
}

int32_t StallTokenCount(std::span<const TokenId> completion,
                        const std::set<TokenId>& stall_tokens) {
  return static_cast<int32_t>(std::count_if(
      completion.begin(), completion.end(),
      [&](TokenId t) { return stall_tokens.contains(t); }));
}

}  // namespace treeadv
