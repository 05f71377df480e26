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
#include <random>
#include <stdexcept>
#include <string>

namespace treeadv {

using TokenId = int32_t;

// Base class for every error raised by the engine. Callers that only need
// to distinguish "our error" from everything else catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define TREEADV_DEFINE_ERROR(Name) \
  class Name : public Error {      \
   public:                         \
    using Error::Error;            \
  }

TREEADV_DEFINE_ERROR(DuplicateBranchToken);
TREEADV_DEFINE_ERROR(IncompleteForest);
TREEADV_DEFINE_ERROR(InvalidDistribution);
TREEADV_DEFINE_ERROR(BudgetInfeasible);
TREEADV_DEFINE_ERROR(DegenerateGroup);
TREEADV_DEFINE_ERROR(NonFiniteRatio);
TREEADV_DEFINE_ERROR(ShapeMismatch);
TREEADV_DEFINE_ERROR(BoundaryTooClose);
TREEADV_DEFINE_ERROR(NonFiniteLoss);
TREEADV_DEFINE_ERROR(CheckpointError);

#undef TREEADV_DEFINE_ERROR

// Config validation failure; `field` is the dotted path of the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// splitmix64 finalizer; used to derive independent sub-seeds so results do
// not depend on evaluation order.
inline uint64_t MixSeed(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t DeriveSeed(uint64_t seed, uint64_t a) {
  return MixSeed(MixSeed(seed) ^ (a + 0x632be59bd9b4e019ULL));
}

inline uint64_t DeriveSeed(uint64_t seed, uint64_t a, uint64_t b) {
  return DeriveSeed(DeriveSeed(seed, a), b);
}

using Rng = std::mt19937_64;

// Uniform double in [0, 1) with 53 random bits. Spelled out instead of
// std::uniform_real_distribution so the stream is identical across
// standard library implementations.
inline double Uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace treeadv
