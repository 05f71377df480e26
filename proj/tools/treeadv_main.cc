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

// Command-line front end: train, eval, sweep, inspect-forest, plot.
//
// Exit codes: 0 success, 2 usage or configuration error, 3 runtime failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "treeadv/advantage.h"
#include "treeadv/config.h"
#include "treeadv/forest_json.h"
#include "treeadv/plot.h"
#include "treeadv/sampler.h"
#include "treeadv/trainer.h"

namespace fs = std::filesystem;
using namespace treeadv;

namespace {

constexpr int kUsageError = 2;
constexpr int kRuntimeError = 3;

// Distinguishes configuration problems (exit 2) from failures while running.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

LinearPolicy PolicyFor(const RunConfig& config, const std::string& ckpt_path) {
  if (ckpt_path.empty()) return InitialPolicy(config);
  Checkpoint ckpt = [&] {
    try {
      return LoadCheckpoint(ckpt_path);
    } catch (const CheckpointError& e) {
      throw UsageError(e.what());
    }
  }();
  if (!SameShape(ckpt.params, InitialPolicy(config))) {
    throw UsageError("checkpoint shape (vocab_size " +
                     std::to_string(ckpt.params.vocab_size()) + ", window " +
                     std::to_string(ckpt.params.window()) + ") does not match config");
  }
  return ckpt.params;
}

RunConfig ReadConfig(const std::string& path) {
  try {
    return LoadConfig(path);
  } catch (const ConfigError& e) {
    throw UsageError(std::string("config error: ") + e.what());
  }
}

int RunTrain(const std::string& config_path, const std::string& resume,
             const std::string& out) {
  const RunConfig config = ReadConfig(config_path);
  TrainOptions options;
  options.out_dir = fs::path(out);
  if (!resume.empty()) {
    try {
      options.resume = LoadCheckpoint(resume);
    } catch (const CheckpointError& e) {
      throw UsageError(e.what());
    }
    if (!SameShape(options.resume->params, InitialPolicy(config))) {
      throw UsageError("resume checkpoint shape does not match config");
    }
  }
  options.on_step = [](const StepMetrics& m) {
    std::fprintf(stderr, "step %lld reward %.4f loss %.5f tau %.3f tokens %.1f/%.1f\n",
                 static_cast<long long>(m.step), m.mean_reward, m.loss, m.tau,
                 m.tokens_segment, m.tokens_leaf);
  };
  const TrainResult result = Train(config, options);
  std::cout << "final_accuracy " << result.final_accuracy << " best_accuracy "
            << result.best_accuracy << " best_step " << result.best_step << "\n";
  return 0;
}

int RunEval(const std::string& config_path, const std::string& ckpt, int instances,
            long long seed) {
  const RunConfig config = ReadConfig(config_path);
  if (instances < 1) throw UsageError("--instances must be >= 1");
  const LinearPolicy params = PolicyFor(config, ckpt);
  const EvalResult r =
      seed < 0 ? Evaluate(params, HeldOutSet([&] {
        RunConfig c = config;
        c.eval_instances = instances;
        return c;
      }()))
               : Evaluate(params, config.Family(), instances, static_cast<uint64_t>(seed));
  nlohmann::ordered_json j{{"accuracy", r.accuracy}, {"mean_tokens", r.mean_tokens},
                           {"instances", instances}};
  std::cout << j.dump() << "\n";
  return 0;
}

std::vector<int32_t> ParseMList(const std::string& text) {
  std::vector<int32_t> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("--m expects a comma-separated list of integers");
    }
  }
  if (out.empty()) throw UsageError("--m is empty");
  return out;
}

int RunSweep(const std::string& config_path, const std::string& m_list,
             const std::string& out) {
  const RunConfig config = ReadConfig(config_path);
  const std::vector<int32_t> ms = ParseMList(m_list);
  SweepResult sweep;
  try {
    sweep = BudgetSweep(config, ms);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  fs::create_directories(out);
  std::ofstream(fs::path(out) / "sweep.csv") << SweepCsv(sweep);
  for (size_t r = 0; r < sweep.runs.size(); ++r) {
    std::ofstream metrics(fs::path(out) /
                          ("metrics_m" + std::to_string(sweep.m_values[r]) + ".jsonl"));
    for (const StepMetrics& m : sweep.runs[r].metrics) {
      metrics << MetricsToJsonLine(m) << "\n";
    }
  }
  std::ofstream(fs::path(out) / "resolved_config.cfg") << FormatConfig(config);
  return 0;
}

int RunInspect(const std::string& config_path, long long prompt_seed,
               const std::string& ckpt, const std::string& out) {
  const RunConfig config = ReadConfig(config_path);
  const LinearPolicy params = PolicyFor(config, ckpt);
  const PolicySnapshot snapshot = Snapshot(params);
  const TaskInstance instance =
      Generate(config.Family(), static_cast<uint64_t>(prompt_seed), 1).front();
  BranchPolicy branch = config.Branch();
  const RolloutForest forest =
      SampleForest(instance.prompt, *snapshot, branch, config.Decode(), config.K,
                   config.M, DeriveSeed(config.seed, static_cast<uint64_t>(prompt_seed)),
                   config.parallel);
  std::vector<TrajectoryView> views = EnumerateLeaves(forest);
  std::vector<double> rewards;
  for (TrajectoryView& v : views) {
    v.reward = Reward(instance, v.Tokens());
    rewards.push_back(v.reward);
  }
  const AdvantageTable table = Redistribute(forest, GroupNormalize(rewards, config.delta));
  auto doc = ForestToJson(forest, views, table);
  doc["answer"] = instance.answer;
  doc["reference_completion"] = instance.ReferenceCompletion();
  const fs::path out_path(out);
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  std::ofstream(out_path) << doc.dump(2) << "\n";
  return 0;
}

int RunPlot(const std::vector<std::string>& metrics, const std::string& out,
            const std::string& y, const std::string& x) {
  std::vector<PlotSeries> series;
  for (const auto& path : metrics) {
    try {
      series.push_back(ReadSeries(path, x, y));
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  const fs::path svg_path(out);
  if (svg_path.has_parent_path()) fs::create_directories(svg_path.parent_path());
  std::ofstream(svg_path) << RenderSvg(series, x, y);
  fs::path csv_path = svg_path;
  csv_path.replace_extension(".csv");
  std::ofstream(csv_path) << SeriesCsv(series, x, y);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tree-structured advantage RL engine"};
  app.require_subcommand(1);

  std::string config_path, resume, out, ckpt, m_list = "1,2,4,16";
  std::string y_field, x_field = "step";
  std::vector<std::string> metrics_files;
  int instances = 200;
  long long seed = -1;
  long long prompt_seed = 0;

  auto* train = app.add_subcommand("train", "Run a training job");
  train->add_option("--config", config_path, "Run config file")->required();
  train->add_option("--resume", resume, "Checkpoint to resume from");
  train->add_option("--out", out, "Output directory")->default_val("out");

  auto* eval = app.add_subcommand("eval", "Greedy-decode accuracy of a checkpoint");
  eval->add_option("--config", config_path, "Run config file")->required();
  eval->add_option("--ckpt", ckpt, "Checkpoint (default: initial policy)");
  eval->add_option("--instances", instances, "Number of held-out instances");
  eval->add_option("--seed", seed, "Instance seed (default: held-out stream)");

  auto* sweep = app.add_subcommand("sweep", "Train once per tree count M");
  sweep->add_option("--config", config_path, "Run config file")->required();
  sweep->add_option("--m", m_list, "Comma-separated M values");
  sweep->add_option("--out", out, "Output directory")->default_val("sweep");

  auto* inspect = app.add_subcommand("inspect-forest", "Dump one annotated forest");
  inspect->add_option("--config", config_path, "Run config file")->required();
  inspect->add_option("--prompt-seed", prompt_seed, "Seed of the prompt")->required();
  inspect->add_option("--ckpt", ckpt, "Checkpoint (default: initial policy)");
  inspect->add_option("--out", out, "Output JSON file")->required();

  auto* plot = app.add_subcommand("plot", "SVG line chart of metrics files");
  plot->add_option("--metrics", metrics_files, "metrics.jsonl files")->required();
  plot->add_option("--out", out, "Output SVG file")->required();
  plot->add_option("--y", y_field, "Field on the y axis")->required();
  plot->add_option("--x", x_field, "Field on the x axis");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (*train) return RunTrain(config_path, resume, out);
    if (*eval) return RunEval(config_path, ckpt, instances, seed);
    if (*sweep) return RunSweep(config_path, m_list, out);
    if (*inspect) return RunInspect(config_path, prompt_seed, ckpt, out);
    if (*plot) return RunPlot(metrics_files, out, y_field, x_field);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kUsageError;
}
