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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "treeadv/config.h"
#include "treeadv/env.h"
#include "treeadv/forest.h"
#include "treeadv/policy.h"

namespace treeadv {

// One record of metrics.jsonl.
struct StepMetrics {
  int64_t step = 0;
  double mean_reward = 0.0;
  double mean_truncated_entropy = 0.0;
  // Generated tokens per question: segments counted once vs per leaf.
  double tokens_segment = 0.0;
  double tokens_leaf = 0.0;
  double clip_fraction = 0.0;
  double loss = 0.0;
  double tau = 0.0;
  double stall_count_mean = 0.0;
  double lr = 0.0;
  int64_t branch_points = 0;
  // Greedy accuracy on the held-out set; empty on steps without evaluation.
  std::optional<double> accuracy;
  std::optional<double> eval_mean_tokens;
  uint64_t snapshot_hash = 0;
};

std::string MetricsToJsonLine(const StepMetrics& m);

// Names of the numeric fields a metrics record carries (for plotting).
const std::vector<std::string>& MetricFieldNames();

struct EvalResult {
  double accuracy = 0.0;
  double mean_tokens = 0.0;
};

// Greedy (argmax, lowest id on ties) decoding; accuracy is the mean reward
// with the -1 length penalty counted as 0.
EvalResult Evaluate(const LinearPolicy& params,
                    const std::vector<TaskInstance>& instances);
EvalResult Evaluate(const LinearPolicy& params, const TaskFamily& family,
                    int32_t n_instances, uint64_t seed);

std::vector<TokenId> GreedyDecode(const LinearPolicy& params,
                                  const TaskInstance& instance);

// Held-out instances are drawn from a seed stream disjoint from training.
std::vector<TaskInstance> TrainingPool(const RunConfig& config);
std::vector<TaskInstance> HeldOutSet(const RunConfig& config);

// Learning rate at 1-based `step`.
double LearningRate(const RunConfig& config, int64_t step);
// Threshold in force at 1-based `step`.
double TauAtStep(const RunConfig& config, int64_t step);

LinearPolicy InitialPolicy(const RunConfig& config);

struct TrainOptions {
  // When set, metrics.jsonl, resolved_config.cfg and checkpoints go here.
  std::optional<std::filesystem::path> out_dir;
  std::optional<Checkpoint> resume;
  std::function<void(const StepMetrics&)> on_step;
  // Called once per sampled forest, in batch order, after the step's
  // forests are complete.
  std::function<void(int64_t step, const RolloutForest&)> on_forest;
};

struct CheckpointEval {
  int64_t step = 0;
  double accuracy = 0.0;
};

struct TrainResult {
  LinearPolicy params;
  std::vector<StepMetrics> metrics;
  std::vector<CheckpointEval> checkpoints;
  // Best held-out accuracy over saved checkpoints and the final one.
  double best_accuracy = 0.0;
  int64_t best_step = 0;
  double final_accuracy = 0.0;
};

// Runs the configured number of steps. Throws NonFiniteLoss if a loss
// becomes non-finite; other module errors propagate.
TrainResult Train(const RunConfig& config, const TrainOptions& options = {});

struct SweepResult {
  std::vector<int32_t> m_values;
  std::vector<TrainResult> runs;
};

// Trains once per M with everything else shared. Each M must divide K.
SweepResult BudgetSweep(const RunConfig& config, const std::vector<int32_t>& m_values);

// Header m,step,mean_reward,accuracy,tokens_segment,tokens_leaf,clip_fraction,tau
std::string SweepCsv(const SweepResult& sweep);

}  // namespace treeadv
