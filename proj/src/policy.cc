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

#include "treeadv/policy.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "json.hpp"

namespace treeadv {

LinearPolicy::LinearPolicy(int32_t vocab_size, int32_t window,
                           TokenId bos_token, bool joint_features,
                           int32_t prompt_length)
    : vocab_size_(vocab_size), window_(window), bos_token_(bos_token) {
  if (vocab_size < 2 || window < 1 || bos_token < 0 || bos_token >= vocab_size) {
    throw std::invalid_argument("invalid policy shape");
  }
  auto table_rows = [vocab_size](int32_t length) {
    int64_t n = 1;
    for (int32_t i = 0; i < length; ++i) {
      n *= vocab_size;
      if (n > kMaxJointRows) throw std::invalid_argument("joint feature table too large");
    }
    return static_cast<int32_t>(n);
  };
  if (prompt_length < 0) throw std::invalid_argument("negative prompt length");
  if (joint_features) joint_rows_ = table_rows(window);
  if (prompt_length > 0) {
    prompt_length_ = prompt_length;
    prompt_rows_ = table_rows(prompt_length);
  }
  weights_.assign(static_cast<size_t>(rows()) * cols(), 0.0);
}

std::vector<int32_t> LinearPolicy::ActiveRows(
    std::span<const TokenId> context) const {
  std::vector<int32_t> active;
  active.reserve(window_ + 2);
  const auto len = static_cast<int64_t>(context.size());
  int32_t joint = 0;
  for (int32_t slot = 0; slot < window_; ++slot) {
    const int64_t pos = len - window_ + slot;
    const TokenId tok = pos >= 0 ? context[pos] : bos_token_;
    active.push_back(slot * vocab_size_ + tok);
    joint = joint * vocab_size_ + tok;
  }
  if (joint_rows_ > 0) active.push_back(window_ * vocab_size_ + joint);
  if (prompt_rows_ > 0) {
    int32_t prompt = 0;
    for (int32_t i = 0; i < prompt_length_; ++i) {
      const TokenId tok = i < len ? context[i] : bos_token_;
      prompt = prompt * vocab_size_ + tok;
    }
    active.push_back(window_ * vocab_size_ + joint_rows_ + prompt);
  }
  active.push_back(rows() - 1);
  return active;
}

std::vector<double> LinearPolicy::Logits(std::span<const TokenId> context) const {
  std::vector<double> logits(vocab_size_, 0.0);
  for (int32_t row : ActiveRows(context)) {
    const double* w = &weights_[static_cast<size_t>(row) * cols()];
    for (int32_t a = 0; a < vocab_size_; ++a) logits[a] += w[a];
  }
  return logits;
}

std::vector<double> LinearPolicy::LogProbs(std::span<const TokenId> context) const {
  std::vector<double> out = Logits(context);
  const double max = *std::max_element(out.begin(), out.end());
  double sum = 0.0;
  for (double z : out) sum += std::exp(z - max);
  const double log_norm = max + std::log(sum);
  for (double& z : out) z -= log_norm;
  return out;
}

std::vector<double> LinearPolicy::Distribution(
    std::span<const TokenId> context) const {
  std::vector<double> p = LogProbs(context);
  for (double& x : p) x = std::exp(x);
  return p;
}

double LinearPolicy::AccumulateLogProbGrad(std::span<const TokenId> context,
                                           TokenId token, double scale,
                                           ParamGrad& grad) const {
  const std::vector<double> logp = LogProbs(context);
  for (int32_t row : ActiveRows(context)) {
    double* g = &grad[static_cast<size_t>(row) * cols()];
    for (int32_t a = 0; a < vocab_size_; ++a) {
      g[a] -= scale * std::exp(logp[a]);
    }
    g[token] += scale;
  }
  return logp[token];
}

double LinearPolicy::LogProbAndGrad(std::span<const TokenId> context,
                                    TokenId token, ParamGrad* grad) const {
  if (grad == nullptr) return LogProbs(context)[token];
  grad->assign(weights_.size(), 0.0);
  return AccumulateLogProbGrad(context, token, 1.0, *grad);
}

uint64_t LinearPolicy::Fingerprint() const {
  // FNV-1a style over 64-bit words of the shape and the raw weights,
  // finished with a splitmix avalanche.
  uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](uint64_t word) {
    h ^= word;
    h *= 0x100000001b3ULL;
  };
  mix(static_cast<uint64_t>(vocab_size_));
  mix(static_cast<uint64_t>(window_));
  mix(static_cast<uint64_t>(bos_token_));
  mix(static_cast<uint64_t>(joint_rows_));
  mix(static_cast<uint64_t>(prompt_length_));
  for (double w : weights_) {
    uint64_t bits;
    std::memcpy(&bits, &w, sizeof(bits));
    mix(bits);
  }
  return MixSeed(h);
}

bool SameShape(const LinearPolicy& a, const LinearPolicy& b) {
  return a.vocab_size() == b.vocab_size() && a.window() == b.window() &&
         a.bos_token() == b.bos_token() && a.joint_features() == b.joint_features() &&
         a.prompt_length() == b.prompt_length();
}

PolicySnapshot Snapshot(const LinearPolicy& params) {
  return std::make_shared<const LinearPolicy>(params);
}

void SgdStep(LinearPolicy& params, const ParamGrad& grad, double lr) {
  auto& w = params.weights();
  if (grad.size() != w.size()) throw ShapeMismatch("gradient shape mismatch");
  for (size_t i = 0; i < w.size(); ++i) w[i] -= lr * grad[i];
}

void InitializeWeights(LinearPolicy& params, double scale, uint64_t seed) {
  if (scale == 0.0) return;
  Rng rng(seed);
  for (double& w : params.weights()) {
    // Box-Muller; 1 - u keeps the log argument away from zero.
    const double u1 = 1.0 - Uniform01(rng);
    const double u2 = Uniform01(rng);
    w = scale * std::sqrt(-2.0 * std::log(u1)) *
        std::cos(2.0 * std::numbers::pi * u2);
  }
}

void SaveCheckpoint(const std::filesystem::path& path, const LinearPolicy& params,
                    int64_t step) {
  nlohmann::json doc;
  doc["format_version"] = 1;
  doc["vocab_size"] = params.vocab_size();
  doc["window"] = params.window();
  doc["bos_token"] = params.bos_token();
  doc["joint_features"] = params.joint_features();
  doc["prompt_length"] = params.prompt_length();
  doc["rows"] = params.rows();
  doc["cols"] = params.cols();
  doc["step"] = step;
  doc["weights"] = params.weights();
  std::ofstream out(path);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out << doc.dump() << "\n";
}

Checkpoint LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
    if (doc.at("format_version").get<int>() != 1) {
      throw CheckpointError("unsupported checkpoint format_version");
    }
    LinearPolicy params(doc.at("vocab_size").get<int32_t>(),
                        doc.at("window").get<int32_t>(),
                        doc.at("bos_token").get<TokenId>(),
                        doc.value("joint_features", false),
                        doc.value("prompt_length", 0));
    if (doc.at("rows").get<int32_t>() != params.rows() ||
        doc.at("cols").get<int32_t>() != params.cols()) {
      throw CheckpointError("shape header disagrees with vocab/window");
    }
    auto weights = doc.at("weights").get<std::vector<double>>();
    if (weights.size() != params.weights().size()) {
      throw CheckpointError("weight count disagrees with shape header");
    }
    for (double w : weights) {
      if (!std::isfinite(w)) throw CheckpointError("non-finite weight");
    }
    params.weights() = std::move(weights);
    return Checkpoint{std::move(params), doc.at("step").get<int64_t>()};
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

}  // namespace treeadv
