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

#include "treeadv/trainer.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "treeadv/advantage.h"
#include "treeadv/forest.h"
#include "treeadv/objective.h"
#include "treeadv/sampler.h"

namespace treeadv {

namespace {

// Seed streams.
constexpr uint64_t kTrainPoolStream = 1;
constexpr uint64_t kHeldOutStream = 2;
constexpr uint64_t kRolloutStream = 3;
constexpr uint64_t kInitStream = 4;

std::string HexHash(uint64_t h) {
  std::ostringstream s;
  s << std::hex << h;
  return s.str();
}

// Everything computed for one prompt within a step.
struct PromptBatch {
  const TaskInstance* instance = nullptr;
  RolloutForest forest;
  std::vector<TrajectoryView> views;
  AdvantageTable table;
  std::vector<double> rewards;
};

struct PassResult {
  LossReport report;
  ParamGrad grad;
};

// Loss and parameter gradient for one prompt under the live params.
PassResult PromptPass(const RunConfig& config, const LinearPolicy& params,
                      const LinearPolicy& reference, const PromptBatch& batch) {
  RatioInputs inputs;
  const bool kl = config.kl_coeff > 0.0;
  for (const TrajectoryView& view : batch.views) {
    std::vector<double> lp_new, lp_old, lp_ref;
    std::vector<TokenId> context = batch.instance->prompt;
    for (const TrajectoryStep& step : view.steps) {
      lp_new.push_back(params.LogProbs(context)[step.token]);
      lp_old.push_back(step.behavior_logprob);
      if (kl) lp_ref.push_back(reference.LogProbs(context)[step.token]);
      context.push_back(step.token);
    }
    inputs.logp_new.push_back(std::move(lp_new));
    inputs.logp_old.push_back(std::move(lp_old));
    if (kl) inputs.logp_ref.push_back(std::move(lp_ref));
  }
  PassResult out;
  out.report = ComputeLoss(inputs, batch.table, config.Clip(), config.mode);
  if (!std::isfinite(out.report.loss)) {
    throw NonFiniteLoss("non-finite loss " + std::to_string(out.report.loss));
  }
  // Chain rule: dL/dtheta = sum over positions of dL/dlogp * dlogp/dtheta.
  out.grad = params.ZeroGrad();
  for (size_t i = 0; i < batch.views.size(); ++i) {
    std::vector<TokenId> context = batch.instance->prompt;
    for (size_t t = 0; t < batch.views[i].size(); ++t) {
      const TokenId token = batch.views[i].steps[t].token;
      const double g = out.report.grad_logp[i][t];
      if (g != 0.0) params.AccumulateLogProbGrad(context, token, g, out.grad);
      context.push_back(token);
    }
  }
  return out;
}

template <typename Fn>
void ForEachPrompt(size_t n, bool parallel, Fn&& fn) {
  if (!parallel || n < 2) {
    for (size_t b = 0; b < n; ++b) fn(b);
    return;
  }
  std::vector<std::future<void>> jobs;
  jobs.reserve(n);
  for (size_t b = 0; b < n; ++b) {
    jobs.push_back(std::async(std::launch::async, [&fn, b] { fn(b); }));
  }
  for (auto& job : jobs) job.get();
}

void WriteCheckpoint(const std::filesystem::path& dir, const LinearPolicy& params,
                     int64_t step) {
  const std::string name = "ckpt_step" + std::to_string(step) + ".json";
  SaveCheckpoint(dir / name, params, step);
  nlohmann::json latest{{"checkpoint", name}, {"step", step}};
  std::ofstream(dir / "latest") << latest.dump() << "\n";
}

}  // namespace

std::string MetricsToJsonLine(const StepMetrics& m) {
  nlohmann::ordered_json j;
  j["step"] = m.step;
  j["mean_reward"] = m.mean_reward;
  j["mean_truncated_entropy"] = m.mean_truncated_entropy;
  j["tokens_segment"] = m.tokens_segment;
  j["tokens_leaf"] = m.tokens_leaf;
  j["clip_fraction"] = m.clip_fraction;
  j["loss"] = m.loss;
  j["tau"] = m.tau;
  j["stall_count_mean"] = m.stall_count_mean;
  j["lr"] = m.lr;
  j["branch_points"] = m.branch_points;
  j["accuracy"] = m.accuracy ? nlohmann::ordered_json(*m.accuracy) : nullptr;
  j["eval_mean_tokens"] =
      m.eval_mean_tokens ? nlohmann::ordered_json(*m.eval_mean_tokens) : nullptr;
  j["snapshot_hash"] = HexHash(m.snapshot_hash);
  return j.dump();
}

const std::vector<std::string>& MetricFieldNames() {
  static const std::vector<std::string> names = {
      "step",         "mean_reward", "mean_truncated_entropy",
      "tokens_segment", "tokens_leaf", "clip_fraction",
      "loss",         "tau",         "stall_count_mean",
      "lr",           "branch_points", "accuracy",
      "eval_mean_tokens"};
  return names;
}

std::vector<TokenId> GreedyDecode(const LinearPolicy& params,
                                  const TaskInstance& instance) {
  std::vector<TokenId> context = instance.prompt;
  std::vector<TokenId> completion;
  const int32_t limit = instance.length_cap + 1;
  while (static_cast<int32_t>(completion.size()) < limit) {
    const std::vector<double> logp = params.LogProbs(context);
    const auto best = static_cast<TokenId>(
        std::max_element(logp.begin(), logp.end()) - logp.begin());
    completion.push_back(best);
    context.push_back(best);
    if (best == instance.eos_token) break;
  }
  return completion;
}

EvalResult Evaluate(const LinearPolicy& params,
                    const std::vector<TaskInstance>& instances) {
  if (instances.empty()) throw std::invalid_argument("evaluation needs n >= 1");
  EvalResult out;
  for (const TaskInstance& inst : instances) {
    const std::vector<TokenId> completion = GreedyDecode(params, inst);
    out.accuracy += std::max(0.0, Reward(inst, completion));
    out.mean_tokens += static_cast<double>(completion.size());
  }
  const auto n = static_cast<double>(instances.size());
  out.accuracy /= n;
  out.mean_tokens /= n;
  return out;
}

EvalResult Evaluate(const LinearPolicy& params, const TaskFamily& family,
                    int32_t n_instances, uint64_t seed) {
  if (n_instances < 1) throw std::invalid_argument("evaluation needs n >= 1");
  return Evaluate(params, Generate(family, seed, n_instances));
}

std::vector<TaskInstance> TrainingPool(const RunConfig& config) {
  return Generate(config.Family(), DeriveSeed(config.seed, kTrainPoolStream),
                  config.train_pool);
}

std::vector<TaskInstance> HeldOutSet(const RunConfig& config) {
  return Generate(config.Family(), DeriveSeed(config.seed, kHeldOutStream),
                  config.eval_instances);
}

double LearningRate(const RunConfig& config, int64_t step) {
  if (config.lr_schedule == LrSchedule::kConstant) return config.lr;
  if (step <= config.warmup_steps) {
    return config.lr * static_cast<double>(step) / config.warmup_steps;
  }
  const double span = std::max<int64_t>(1, config.total_steps - config.warmup_steps);
  const double progress =
      std::min(1.0, static_cast<double>(step - config.warmup_steps) / span);
  return config.lr_min + 0.5 * (config.lr - config.lr_min) *
                             (1.0 + std::cos(std::numbers::pi * progress));
}

double TauAtStep(const RunConfig& config, int64_t step) {
  const int64_t index = step - 1;
  const int64_t events =
      config.anneal_cadence == AnnealCadence::kPerStep
          ? index
          : index * config.batch_size / config.train_pool;
  return Anneal(config.Branch(), events).tau;
}

LinearPolicy InitialPolicy(const RunConfig& config) {
  LinearPolicy params(config.vocab_size, config.window, config.Vocab().bos(),
                      config.joint_features,
                      config.prompt_features ? config.Family().PromptLength() : 0);
  InitializeWeights(params, config.init_scale, DeriveSeed(config.seed, kInitStream));
  return params;
}

TrainResult Train(const RunConfig& config, const TrainOptions& options) {
  config.Validate();
  const std::vector<TaskInstance> pool = TrainingPool(config);
  const std::vector<TaskInstance> held_out = HeldOutSet(config);
  const LinearPolicy reference = InitialPolicy(config);

  TrainResult result{reference, {}, {}, 0.0, 0, 0.0};
  int64_t first_step = 1;
  if (options.resume) {
    const LinearPolicy& loaded = options.resume->params;
    if (!SameShape(loaded, reference)) {
      throw ConfigError("resume", "checkpoint feature layout does not match the config");
    }
    result.params = loaded;
    first_step = options.resume->step + 1;
  }
  LinearPolicy& params = result.params;

  std::ofstream metrics_out;
  if (options.out_dir) {
    std::filesystem::create_directories(*options.out_dir);
    std::ofstream(*options.out_dir / "resolved_config.cfg") << FormatConfig(config);
    metrics_out.open(*options.out_dir / "metrics.jsonl");
  }

  const DecodeConfig decode = config.Decode();
  const size_t batch_size = static_cast<size_t>(config.batch_size);
  bool have_best = false;

  for (int64_t step = first_step; step <= config.total_steps; ++step) {
    BranchPolicy branch = config.Branch();
    branch.tau = TauAtStep(config, step);
    const PolicySnapshot old_policy = Snapshot(params);
    const uint64_t snapshot_hash = old_policy->Fingerprint();

    std::vector<PromptBatch> batch(batch_size);
    ForEachPrompt(batch_size, config.parallel, [&](size_t b) {
      PromptBatch& pb = batch[b];
      const size_t pool_index =
          (static_cast<size_t>(step - 1) * batch_size + b) % pool.size();
      pb.instance = &pool[pool_index];
      pb.forest = SampleForest(pb.instance->prompt, *old_policy, branch, decode,
                               config.K, config.M,
                               DeriveSeed(config.seed, kRolloutStream,
                                          static_cast<uint64_t>(step) * 1000003ULL + b));
      if (pb.forest.snapshot_hash() != snapshot_hash) {
        throw std::logic_error("forest sampled under a stale policy snapshot");
      }
      pb.views = EnumerateLeaves(pb.forest);
      for (TrajectoryView& view : pb.views) {
        view.reward = Reward(*pb.instance, view.Tokens());
        pb.rewards.push_back(view.reward);
      }
      const GroupAdvantages group = GroupNormalize(pb.rewards, config.delta);
      pb.table = IsTreeAdv(config.mode) ? Redistribute(pb.forest, group)
                                        : BroadcastSequenceAdvantages(pb.forest, group);
    });

    if (options.on_forest) {
      for (const PromptBatch& pb : batch) options.on_forest(step, pb.forest);
    }

    const double lr = LearningRate(config, step);
    double loss_sum = 0.0;
    double clip_sum = 0.0;
    for (int32_t pass = 0; pass < config.reuse_epochs; ++pass) {
      std::vector<PassResult> passes(batch_size);
      ForEachPrompt(batch_size, config.parallel, [&](size_t b) {
        passes[b] = PromptPass(config, params, reference, batch[b]);
      });
      // Fixed reduction order keeps the update independent of threading.
      ParamGrad grad = params.ZeroGrad();
      for (const PassResult& p : passes) {
        for (size_t j = 0; j < grad.size(); ++j) grad[j] += p.grad[j];
        loss_sum += p.report.loss;
        clip_sum += p.report.clip_fraction;
      }
      for (double& g : grad) g /= static_cast<double>(batch_size);
      SgdStep(params, grad, lr);
    }

    StepMetrics m;
    m.step = step;
    m.tau = branch.tau;
    m.lr = lr;
    m.snapshot_hash = snapshot_hash;
    const double passes_total = static_cast<double>(config.reuse_epochs * batch_size);
    m.loss = loss_sum / passes_total;
    m.clip_fraction = clip_sum / passes_total;
    double reward_sum = 0.0, entropy_sum = 0.0, stall_sum = 0.0;
    int64_t leaves = 0, positions = 0;
    for (const PromptBatch& pb : batch) {
      const TokenCounts counts = TotalGeneratedTokens(pb.forest);
      m.tokens_segment += static_cast<double>(counts.segment_sum);
      m.tokens_leaf += static_cast<double>(counts.leaf_sum);
      m.branch_points += CountBranchPoints(pb.forest);
      for (const RolloutTree& tree : pb.forest.trees()) {
        for (size_t s = 0; s < tree.segment_count(); ++s) {
          for (double h : tree.segment(s).entropies) entropy_sum += h;
          positions += static_cast<int64_t>(tree.segment(s).size());
        }
      }
      for (const TrajectoryView& view : pb.views) {
        reward_sum += view.reward;
        stall_sum += StallTokenCount(view.Tokens(), config.stall_tokens);
        ++leaves;
      }
    }
    m.tokens_segment /= static_cast<double>(batch_size);
    m.tokens_leaf /= static_cast<double>(batch_size);
    m.mean_reward = reward_sum / static_cast<double>(leaves);
    m.stall_count_mean = stall_sum / static_cast<double>(leaves);
    m.mean_truncated_entropy = positions > 0 ? entropy_sum / positions : 0.0;

    const bool checkpoint_step =
        step % config.checkpoint_every == 0 || step == config.total_steps;
    const bool eval_step = checkpoint_step ||
                           (config.eval_every > 0 && step % config.eval_every == 0);
    if (eval_step) {
      const EvalResult eval = Evaluate(params, held_out);
      m.accuracy = eval.accuracy;
      m.eval_mean_tokens = eval.mean_tokens;
    }
    if (checkpoint_step) {
      result.checkpoints.push_back({step, *m.accuracy});
      if (!have_best || *m.accuracy > result.best_accuracy) {
        result.best_accuracy = *m.accuracy;
        result.best_step = step;
        have_best = true;
      }
      if (options.out_dir) WriteCheckpoint(*options.out_dir, params, step);
    }
    if (step == config.total_steps) result.final_accuracy = *m.accuracy;

    if (metrics_out.is_open()) metrics_out << MetricsToJsonLine(m) << "\n";
    if (options.on_step) options.on_step(m);
    result.metrics.push_back(std::move(m));
  }
  return result;
}

SweepResult BudgetSweep(const RunConfig& config, const std::vector<int32_t>& m_values) {
  SweepResult sweep;
  for (int32_t m : m_values) {
    if (m < 1 || config.K % m != 0) {
      throw ConfigError("M", "sweep value " + std::to_string(m) + " does not divide K=" +
                                 std::to_string(config.K));
    }
  }
  for (int32_t m : m_values) {
    RunConfig run = config;
    run.M = m;
    sweep.m_values.push_back(m);
    sweep.runs.push_back(Train(run));
  }
  return sweep;
}

std::string SweepCsv(const SweepResult& sweep) {
  std::ostringstream out;
  out.precision(17);
  out << "m,step,mean_reward,accuracy,tokens_segment,tokens_leaf,clip_fraction,tau\n";
  for (size_t r = 0; r < sweep.runs.size(); ++r) {
    for (const StepMetrics& m : sweep.runs[r].metrics) {
      out << sweep.m_values[r] << ',' << m.step << ',' << m.mean_reward << ',';
      if (m.accuracy) out << *m.accuracy;
      out << ',' << m.tokens_segment << ',' << m.tokens_leaf << ','
          << m.clip_fraction << ',' << m.tau << '\n';
    }
  }
  return out.str();
}

}  // namespace treeadv
