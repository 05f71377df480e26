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

#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "treeadv/advantage.h"

namespace treeadv {

enum class SurrogateMode { kGrpo, kTreeAdvGrpo, kGspo, kTreeAdvGspo };

std::string_view ModeName(SurrogateMode mode);
// Accepts "grpo", "treeadv_grpo", "gspo", "treeadv_gspo" (case-insensitive).
SurrogateMode ParseMode(std::string_view name);
bool IsTreeAdv(SurrogateMode mode);
bool IsGspo(SurrogateMode mode);

using PerPosition = std::vector<std::vector<double>>;

// Per-trajectory, per-position log-probs in leaf order.
struct RatioInputs {
  PerPosition logp_new;
  PerPosition logp_old;
  // Value of sg[logp_new]. Empty means "equal to logp_new". Gradient
  // checks pin this to the unperturbed point so the stop-gradient factors
  // stay constant.
  PerPosition logp_detached;
  // Reference policy log-probs; required only when kl_coeff > 0.
  PerPosition logp_ref;
};

struct ClipConfig {
  double epsilon = 0.2;
  double kl_coeff = 0.0;
};

struct LossReport {
  double loss = 0.0;  // negated objective (+ KL penalty)
  PerPosition grad_logp;
  // The ratio that enters the clip at each position (r or w_{i,t}).
  PerPosition ratio;
  double clip_fraction = 0.0;
  double mean_ratio = 0.0;
  double mean_abs_adv = 0.0;
  double kl = 0.0;
  int64_t positions = 0;
};

// Log-ratios beyond this magnitude are reported as NonFiniteRatio; the
// ratio and its products with other ratios must stay representable.
inline constexpr double kMaxLogRatio = 100.0;

// r = exp(logp_new - logp_old) elementwise. Throws NonFiniteRatio.
std::vector<double> TokenRatio(std::span<const double> logp_new,
                               std::span<const double> logp_old);

struct ClippedTerm {
  double value = 0.0;
  bool clipped = false;  // true when the clipped argument attains the min
};

// min(r * adv, clip(r, 1 - eps, 1 + eps) * adv); ties go to the unclipped
// branch.
ClippedTerm ClipTerm(double r, double adv, double epsilon);

// w_i = exp(mean_t(logp_new - logp_old)) over one trajectory.
double GspoSequenceRatio(std::span<const double> logp_new,
                         std::span<const double> logp_old);

struct GspoTokenRatioValue {
  double value = 0.0;
  // d value / d logp_new(i, t); the derivative w.r.t. any other position of
  // the trajectory is zero because w_i is detached.
  double grad_own = 0.0;
};

// w_{i,t} = sg[w_i] * exp(logp_new(i,t) - sg[logp_new(i,t)]).
GspoTokenRatioValue GspoTokenRatio(double w_i, double logp_new,
                                   double logp_detached);

// Clipped token-ratio surrogates. GRPO broadcasts seq_adv; TREEADV_GRPO uses
// token_adv. Throws ShapeMismatch.
LossReport GrpoLoss(const RatioInputs& inputs, const AdvantageTable& table,
                    const ClipConfig& cfg, SurrogateMode mode);

// Same with the detached sequence ratio. GSPO broadcasts seq_adv;
// TREEADV_GSPO uses token_adv.
LossReport GspoLoss(const RatioInputs& inputs, const AdvantageTable& table,
                    const ClipConfig& cfg, SurrogateMode mode);

LossReport ComputeLoss(const RatioInputs& inputs, const AdvantageTable& table,
                       const ClipConfig& cfg, SurrogateMode mode);

using LossFn = std::function<LossReport(const RatioInputs&)>;

struct GradientCheck {
  double max_rel_error = 0.0;
  int64_t coordinates = 0;
};

// Central differences (L(x + h) - L(x - h)) / 2h on every logp_new entry,
// compared to the analytic grad_logp. Relative errors use a denominator
// floored at 1e-4 so exactly-zero and rounding-level gradients compare
// sensibly. Throws BoundaryTooClose when any ratio sits within 10h of a
// clip boundary.
GradientCheck FiniteDifferenceCheck(const LossFn& loss_fn, RatioInputs inputs,
                                    double epsilon, double h);

}  // namespace treeadv
