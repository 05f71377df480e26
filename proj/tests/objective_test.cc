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

#include "treeadv/objective.h"

#include <gtest/gtest.h>

#include <cmath>

#include "testing.h"

namespace treeadv {
namespace {

constexpr SurrogateMode kAllModes[] = {SurrogateMode::kGrpo, SurrogateMode::kTreeAdvGrpo,
                                       SurrogateMode::kGspo, SurrogateMode::kTreeAdvGspo};

struct Instance {
  RolloutForest forest;
  AdvantageTable tree_table;
  RatioInputs inputs;
};

// Random forest, rewards and a perturbed current policy. `spread` is the
// standard deviation of logp_new - logp_old per position.
Instance RandomInstance(uint64_t seed, int32_t K, int32_t M, double spread) {
  Rng rng(seed);
  Instance inst{testing::RandomForest(rng, K, M, true), {}, {}};
  const auto views = EnumerateLeaves(inst.forest);
  inst.tree_table = Redistribute(inst.forest, GroupNormalize(testing::RandomRewards(rng, K), 1e-8));
  for (const auto& v : views) {
    std::vector<double> old_row, new_row;
    for (const auto& s : v.steps) {
      old_row.push_back(s.behavior_logprob);
      const double u1 = 1.0 - Uniform01(rng), u2 = Uniform01(rng);
      const double normal = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
      new_row.push_back(s.behavior_logprob + spread * normal);
    }
    inst.inputs.logp_old.push_back(old_row);
    inst.inputs.logp_new.push_back(new_row);
  }
  return inst;
}

AdvantageTable TableFor(const std::vector<double>& seq_adv, const PerPosition& token_adv) {
  AdvantageTable t;
  t.seq_adv = seq_adv;
  t.token_adv = token_adv;
  return t;
}

TEST(TokenRatio, Examples) {
  const std::vector<double> lp{-1.0, -2.0, -0.5};
  for (double r : TokenRatio(lp, lp)) EXPECT_EQ(r, 1.0);
  const auto r = TokenRatio(std::vector<double>{-1.0 + std::log(1.5)}, std::vector<double>{-1.0});
  EXPECT_NEAR(r[0], 1.5, 1e-15);
  EXPECT_THROW(TokenRatio(std::vector<double>{700.0}, std::vector<double>{0.0}), NonFiniteRatio);
  EXPECT_THROW(TokenRatio(std::vector<double>{NAN}, std::vector<double>{0.0}), NonFiniteRatio);
}

TEST(ClipTerm, Examples) {
  const auto a = ClipTerm(1.5, 1.0, 0.2);
  EXPECT_NEAR(a.value, 1.2, 1e-15);
  EXPECT_TRUE(a.clipped);
  const auto b = ClipTerm(0.5, -1.0, 0.2);
  EXPECT_NEAR(b.value, -0.8, 1e-15);
  EXPECT_TRUE(b.clipped);
  for (double adv : {-2.0, 0.0, 0.7}) {
    const auto c = ClipTerm(1.0, adv, 0.2);
    EXPECT_EQ(c.value, adv);
    EXPECT_FALSE(c.clipped);
  }
  // Ties at the band edge stay on the unclipped branch.
  EXPECT_FALSE(ClipTerm(1.2, 1.0, 0.2).clipped);
  EXPECT_FALSE(ClipTerm(0.5, 0.0, 0.2).clipped);
}

TEST(ClipTerm, IsPessimistic) {
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    const double r = 3.0 * Uniform01(rng);
    const double adv = 4.0 * Uniform01(rng) - 2.0;
    const double eps = 0.01 + 0.9 * Uniform01(rng);
    const double v = ClipTerm(r, adv, eps).value;
    EXPECT_LE(v, r * adv);
    EXPECT_LE(v, std::clamp(r, 1 - eps, 1 + eps) * adv);
  }
}

TEST(GspoSequenceRatio, Examples) {
  const std::vector<double> lp{-1.0, -0.3};
  EXPECT_EQ(GspoSequenceRatio(lp, lp), 1.0);
  EXPECT_NEAR(GspoSequenceRatio(std::vector<double>{-0.8, -0.5}, std::vector<double>{-1.0, -0.3}),
              1.0, 1e-15);
  EXPECT_NEAR(GspoSequenceRatio(std::vector<double>{0.1, 0.3, 0.2}, std::vector<double>{0, 0, 0}),
              1.2214027581601699, 1e-12);
  EXPECT_THROW(GspoSequenceRatio(std::vector<double>{}, std::vector<double>{}), ShapeMismatch);
}

TEST(GspoTokenRatio, ValueAndOwnGradient) {
  const double w = 1.2214;
  for (double lp : {-3.0, -0.2, 0.0}) {
    const auto tok = GspoTokenRatio(w, lp, lp);
    EXPECT_EQ(tok.value, w);
    EXPECT_EQ(tok.grad_own, w);
  }
}

TEST(GrpoLoss, SinglePositionClipped) {
  RatioInputs in;
  in.logp_old = {{-1.0}};
  in.logp_new = {{-1.0 + std::log(1.5)}};
  const auto table = TableFor({1.0}, {{1.0}});
  for (auto mode : {SurrogateMode::kGrpo, SurrogateMode::kTreeAdvGrpo}) {
    const auto rep = GrpoLoss(in, table, ClipConfig{}, mode);
    EXPECT_NEAR(rep.loss, -1.2, 1e-15);
    EXPECT_EQ(rep.grad_logp[0][0], 0.0);
    EXPECT_EQ(rep.clip_fraction, 1.0);
  }
}

TEST(GrpoLoss, RejectsShapeMismatch) {
  RatioInputs in;
  in.logp_old = {{-1.0, -2.0}};
  in.logp_new = {{-1.0}};
  const auto table = TableFor({1.0}, {{1.0}});
  EXPECT_THROW(GrpoLoss(in, table, ClipConfig{}, SurrogateMode::kGrpo), ShapeMismatch);
  in.logp_old = {{-1.0}};
  const auto wrong_k = TableFor({1.0, -1.0}, {{1.0}, {-1.0}});
  EXPECT_THROW(GrpoLoss(in, wrong_k, ClipConfig{}, SurrogateMode::kGrpo), ShapeMismatch);
  EXPECT_THROW(GspoLoss(in, wrong_k, ClipConfig{}, SurrogateMode::kGspo), ShapeMismatch);
}

TEST(Loss, OnPolicyValueIsMinusMeanAdvantageSum) {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Instance inst = RandomInstance(seed, 8, 2, 0.0);
    for (auto mode : kAllModes) {
      const auto rep = ComputeLoss(inst.inputs, inst.tree_table, ClipConfig{}, mode);
      double expected = 0.0;
      for (size_t i = 0; i < inst.inputs.logp_new.size(); ++i) {
        for (size_t t = 0; t < inst.inputs.logp_new[i].size(); ++t) {
          expected += IsTreeAdv(mode) ? inst.tree_table.token_adv[i][t]
                                      : inst.tree_table.seq_adv[i];
        }
      }
      EXPECT_NEAR(rep.loss, -expected / 8.0, 1e-12);
      EXPECT_EQ(rep.clip_fraction, 0.0);
      EXPECT_EQ(rep.mean_ratio, 1.0);
    }
  }
}

TEST(GspoLoss, ForwardTokenRatioEqualsSequenceRatio) {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Instance inst = RandomInstance(seed, 8, 4, 0.05);
    for (auto mode : {SurrogateMode::kGspo, SurrogateMode::kTreeAdvGspo}) {
      const auto rep = GspoLoss(inst.inputs, inst.tree_table, ClipConfig{}, mode);
      for (size_t i = 0; i < rep.ratio.size(); ++i) {
        const double w = GspoSequenceRatio(inst.inputs.logp_new[i], inst.inputs.logp_old[i]);
        for (double r : rep.ratio[i]) EXPECT_EQ(r, w);
      }
    }
  }
}

TEST(GspoLoss, SequenceRatioOutsideBandClipsWholeTrajectory) {
  const double eps = 0.2;
  RatioInputs in;
  in.logp_old = {{-1.0, -1.0, -1.0}, {-0.5, -0.5}};
  const double shift = std::log(1.0 + 2.0 * eps);
  in.logp_new = {{-1.0 + shift, -1.0 + shift, -1.0 + shift}, {-0.5, -0.5}};
  const auto table = TableFor({1.0, -1.0}, {{1.0, 1.0, 1.0}, {-1.0, -1.0}});
  for (auto mode : {SurrogateMode::kGspo, SurrogateMode::kTreeAdvGspo}) {
    const auto rep = GspoLoss(in, table, ClipConfig{eps, 0.0}, mode);
    for (double g : rep.grad_logp[0]) EXPECT_EQ(g, 0.0);
    for (double g : rep.grad_logp[1]) EXPECT_NE(g, 0.0);
    EXPECT_NEAR(rep.clip_fraction, 3.0 / 5.0, 1e-15);
  }
}

TEST(Loss, TreeAdvEqualsBaseWhenNothingIsShared) {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Instance inst = RandomInstance(seed, 8, 8, 0.2);
    const AdvantageTable base = inst.tree_table;
    for (auto [plain, tree] : {std::pair{SurrogateMode::kGrpo, SurrogateMode::kTreeAdvGrpo},
                               std::pair{SurrogateMode::kGspo, SurrogateMode::kTreeAdvGspo}}) {
      const auto a = ComputeLoss(inst.inputs, base, ClipConfig{}, plain);
      const auto b = ComputeLoss(inst.inputs, inst.tree_table, ClipConfig{}, tree);
      EXPECT_NEAR(a.loss, b.loss, 1e-12);
      EXPECT_EQ(a.grad_logp, b.grad_logp);
    }
  }
}

TEST(Loss, GspoEqualsGrpoOnPolicyWithoutSharing) {
  Instance inst = RandomInstance(5, 16, 16, 0.0);
  const auto grpo = ComputeLoss(inst.inputs, inst.tree_table, ClipConfig{}, SurrogateMode::kGrpo);
  const auto gspo = ComputeLoss(inst.inputs, inst.tree_table, ClipConfig{}, SurrogateMode::kGspo);
  EXPECT_NEAR(grpo.loss, gspo.loss, 1e-12);
}

TEST(Loss, ScalingAdvantagesScalesLossAndKeepsBranches) {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Instance inst = RandomInstance(seed, 8, 2, 0.3);
    AdvantageTable scaled = inst.tree_table;
    const double c = 3.7;
    for (double& a : scaled.seq_adv) a *= c;
    for (auto& row : scaled.token_adv) {
      for (double& a : row) a *= c;
    }
    for (auto mode : kAllModes) {
      const auto a = ComputeLoss(inst.inputs, inst.tree_table, ClipConfig{}, mode);
      const auto b = ComputeLoss(inst.inputs, scaled, ClipConfig{}, mode);
      EXPECT_NEAR(b.loss, c * a.loss, 1e-12 * std::max(1.0, std::abs(b.loss)));
      EXPECT_EQ(a.clip_fraction, b.clip_fraction);
      for (size_t i = 0; i < a.grad_logp.size(); ++i) {
        for (size_t t = 0; t < a.grad_logp[i].size(); ++t) {
          EXPECT_EQ(a.grad_logp[i][t] == 0.0, b.grad_logp[i][t] == 0.0);
        }
      }
    }
  }
}

TEST(Loss, ReportStaysInRange) {
  Instance inst = RandomInstance(8, 16, 4, 0.5);
  for (auto mode : kAllModes) {
    const auto rep = ComputeLoss(inst.inputs, inst.tree_table, ClipConfig{}, mode);
    EXPECT_GE(rep.clip_fraction, 0.0);
    EXPECT_LE(rep.clip_fraction, 1.0);
    EXPECT_TRUE(std::isfinite(rep.loss));
  }
}

// Finite-difference gradient checks on random instances, skipping draws
// that land too close to a clip boundary.
class GradientCheckTest : public ::testing::TestWithParam<SurrogateMode> {};

TEST_P(GradientCheckTest, MatchesCentralDifferences) {
  const SurrogateMode mode = GetParam();
  int checked = 0;
  for (uint64_t seed = 0; checked < 20; ++seed) {
    ASSERT_LT(seed, 500u);
    Instance inst = RandomInstance(DeriveSeed(seed, 99), 8, 2, 0.15);
    const ClipConfig cfg{0.2, seed % 2 == 0 ? 0.0 : 0.05};
    if (cfg.kl_coeff > 0.0) {
      inst.inputs.logp_ref = inst.inputs.logp_old;
      for (auto& row : inst.inputs.logp_ref) {
        for (double& x : row) x -= 0.1;
      }
    }
    const AdvantageTable table = inst.tree_table;
    try {
      const auto check = FiniteDifferenceCheck(
          [&](const RatioInputs& in) { return ComputeLoss(in, table, cfg, mode); },
          inst.inputs, cfg.epsilon, 1e-5);
      EXPECT_LT(check.max_rel_error, 1e-5) << "seed " << seed;
      EXPECT_GT(check.coordinates, 0);
      ++checked;
    } catch (const BoundaryTooClose&) {
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Modes, GradientCheckTest, ::testing::ValuesIn(kAllModes),
                         [](const auto& info) { return std::string(ModeName(info.param)); });

TEST(FiniteDifferenceCheck, RejectsPointsAtAKink) {
  RatioInputs in;
  in.logp_old = {{-1.0}, {-1.0}};
  in.logp_new = {{-1.0 + std::log(1.2)}, {-1.0}};
  const auto table = TableFor({1.0, -1.0}, {{1.0}, {-1.0}});
  EXPECT_THROW(FiniteDifferenceCheck(
                   [&](const RatioInputs& x) {
                     return ComputeLoss(x, table, ClipConfig{}, SurrogateMode::kGrpo);
                   },
                   in, 0.2, 1e-5),
               BoundaryTooClose);
}

TEST(KlPenalty, ZeroAtReferenceAndPositiveElsewhere) {
  Instance inst = RandomInstance(2, 4, 2, 0.0);
  inst.inputs.logp_ref = inst.inputs.logp_new;
  const ClipConfig cfg{0.2, 0.5};
  const auto at_ref = ComputeLoss(inst.inputs, inst.tree_table, cfg, SurrogateMode::kGrpo);
  EXPECT_EQ(at_ref.kl, 0.0);
  for (auto& row : inst.inputs.logp_ref) {
    for (double& x : row) x -= 0.3;
  }
  const auto away = ComputeLoss(inst.inputs, inst.tree_table, cfg, SurrogateMode::kGrpo);
  EXPECT_NEAR(away.kl, std::exp(-0.3) + 0.3 - 1.0, 1e-12);
  EXPECT_NEAR(away.loss - at_ref.loss, 0.5 * away.kl, 1e-12);
}

TEST(ParseMode, RoundTripsNames) {
  for (auto mode : kAllModes) EXPECT_EQ(ParseMode(ModeName(mode)), mode);
  EXPECT_EQ(ParseMode("TreeAdv_GSPO"), SurrogateMode::kTreeAdvGspo);
  EXPECT_THROW(ParseMode("ppo"), std::invalid_argument);
}

}  // namespace
}  // namespace treeadv
