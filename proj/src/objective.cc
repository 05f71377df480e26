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

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>
#include <string>

namespace treeadv {

std::string_view ModeName(SurrogateMode mode) {
  switch (mode) {
    case SurrogateMode::kGrpo:
      return "grpo";
    case SurrogateMode::kTreeAdvGrpo:
      return "treeadv_grpo";
    case SurrogateMode::kGspo:
      return "gspo";
    case SurrogateMode::kTreeAdvGspo:
      return "treeadv_gspo";
  }
  return "unknown";
}

SurrogateMode ParseMode(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  for (auto mode : {SurrogateMode::kGrpo, SurrogateMode::kTreeAdvGrpo,
                    SurrogateMode::kGspo, SurrogateMode::kTreeAdvGspo}) {
    if (lower == ModeName(mode)) return mode;
  }
  throw std::invalid_argument("unknown surrogate mode '" + std::string(name) + "'");
}

bool IsTreeAdv(SurrogateMode mode) {
  return mode == SurrogateMode::kTreeAdvGrpo || mode == SurrogateMode::kTreeAdvGspo;
}

bool IsGspo(SurrogateMode mode) {
  return mode == SurrogateMode::kGspo || mode == SurrogateMode::kTreeAdvGspo;
}

namespace {

void CheckLogRatio(double diff) {
  if (!std::isfinite(diff) || std::abs(diff) > kMaxLogRatio) {
    throw NonFiniteRatio("log-ratio " + std::to_string(diff) + " out of range");
  }
}

const PerPosition& Detached(const RatioInputs& in) {
  return in.logp_detached.empty() ? in.logp_new : in.logp_detached;
}

void CheckShapes(const RatioInputs& in, const AdvantageTable& table,
                 const ClipConfig& cfg) {
  auto same = [](const PerPosition& a, const PerPosition& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i) {
      if (a[i].size() != b[i].size()) return false;
    }
    return true;
  };
  if (!same(in.logp_new, in.logp_old) || !same(in.logp_new, table.token_adv) ||
      in.logp_new.size() != table.seq_adv.size() ||
      !same(in.logp_new, Detached(in)) ||
      (cfg.kl_coeff > 0.0 && !same(in.logp_new, in.logp_ref))) {
    throw ShapeMismatch("ratio inputs and advantage table disagree in shape");
  }
  if (!(cfg.epsilon > 0.0 && cfg.epsilon < 1.0)) {
    throw std::invalid_argument("clip epsilon must lie in (0, 1)");
  }
}

double ModeAdvantage(const AdvantageTable& table, SurrogateMode mode, size_t i,
                     size_t t) {
  return IsTreeAdv(mode) ? table.token_adv[i][t] : table.seq_adv[i];
}

// k3 estimator of KL(pi_theta || pi_ref) with delta = logp_ref - logp_new:
// exp(delta) - delta - 1, averaged over positions.
void AddKlPenalty(const RatioInputs& in, const ClipConfig& cfg, LossReport& out) {
  if (cfg.kl_coeff <= 0.0 || out.positions == 0) return;
  const double scale = cfg.kl_coeff / static_cast<double>(out.positions);
  double kl = 0.0;
  for (size_t i = 0; i < in.logp_new.size(); ++i) {
    for (size_t t = 0; t < in.logp_new[i].size(); ++t) {
      const double d = in.logp_ref[i][t] - in.logp_new[i][t];
      kl += std::exp(d) - d - 1.0;
      out.grad_logp[i][t] += scale * (1.0 - std::exp(d));
    }
  }
  out.kl = kl / static_cast<double>(out.positions);
  out.loss += cfg.kl_coeff * out.kl;
}

// Shared accumulation for both families once the per-position ratio and
// its derivative w.r.t. logp_new are known.
template <typename RatioAt>
LossReport ClippedSurrogate(const RatioInputs& in, const AdvantageTable& table,
                            const ClipConfig& cfg, SurrogateMode mode,
                            RatioAt&& ratio_at) {
  CheckShapes(in, table, cfg);
  const size_t k = in.logp_new.size();
  LossReport out;
  out.grad_logp.resize(k);
  out.ratio.resize(k);
  double objective = 0.0;
  int64_t clipped = 0;
  double ratio_sum = 0.0;
  double adv_sum = 0.0;
  const double inv_k = k > 0 ? 1.0 / static_cast<double>(k) : 0.0;
  for (size_t i = 0; i < k; ++i) {
    const size_t len = in.logp_new[i].size();
    out.grad_logp[i].assign(len, 0.0);
    out.ratio[i].resize(len);
    for (size_t t = 0; t < len; ++t) {
      const auto [r, dr] = ratio_at(i, t);
      const double adv = ModeAdvantage(table, mode, i, t);
      const ClippedTerm term = ClipTerm(r, adv, cfg.epsilon);
      objective += term.value;
      out.ratio[i][t] = r;
      if (term.clipped) {
        ++clipped;
      } else {
        out.grad_logp[i][t] = -inv_k * dr * adv;
      }
      ratio_sum += r;
      adv_sum += std::abs(adv);
      ++out.positions;
    }
  }
  out.loss = -inv_k * objective;
  if (out.positions > 0) {
    const auto n = static_cast<double>(out.positions);
    out.clip_fraction = static_cast<double>(clipped) / n;
    out.mean_ratio = ratio_sum / n;
    out.mean_abs_adv = adv_sum / n;
  }
  AddKlPenalty(in, cfg, out);
  return out;
}

}  // namespace

std::vector<double> TokenRatio(std::span<const double> logp_new,
                               std::span<const double> logp_old) {
  if (logp_new.size() != logp_old.size()) {
    throw ShapeMismatch("token ratio inputs differ in length");
  }
  std::vector<double> r(logp_new.size());
  for (size_t t = 0; t < r.size(); ++t) {
    const double diff = logp_new[t] - logp_old[t];
    CheckLogRatio(diff);
    r[t] = std::exp(diff);
  }
  return r;
}

ClippedTerm ClipTerm(double r, double adv, double epsilon) {
  const double clipped_r = std::clamp(r, 1.0 - epsilon, 1.0 + epsilon);
  const double unclipped = r * adv;
  const double clipped = clipped_r * adv;
  if (clipped < unclipped) return {clipped, true};
  return {unclipped, false};
}

double GspoSequenceRatio(std::span<const double> logp_new,
                         std::span<const double> logp_old) {
  if (logp_new.empty() || logp_new.size() != logp_old.size()) {
    throw ShapeMismatch("sequence ratio needs equal, non-empty inputs");
  }
  double sum = 0.0;
  for (size_t t = 0; t < logp_new.size(); ++t) sum += logp_new[t] - logp_old[t];
  const double mean = sum / static_cast<double>(logp_new.size());
  CheckLogRatio(mean);
  return std::exp(mean);
}

GspoTokenRatioValue GspoTokenRatio(double w_i, double logp_new,
                                   double logp_detached) {
  const double diff = logp_new - logp_detached;
  CheckLogRatio(diff);
  const double value = w_i * std::exp(diff);
  // d/dx [w_i * exp(x - c)] = w_i * exp(x - c); equals w_i at x = c.
  return {value, value};
}

LossReport GrpoLoss(const RatioInputs& inputs, const AdvantageTable& table,
                    const ClipConfig& cfg, SurrogateMode mode) {
  if (IsGspo(mode)) throw std::invalid_argument("GrpoLoss needs a GRPO mode");
  return ClippedSurrogate(inputs, table, cfg, mode, [&](size_t i, size_t t) {
    const double diff = inputs.logp_new[i][t] - inputs.logp_old[i][t];
    CheckLogRatio(diff);
    const double r = std::exp(diff);
    return std::pair{r, r};
  });
}

LossReport GspoLoss(const RatioInputs& inputs, const AdvantageTable& table,
                    const ClipConfig& cfg, SurrogateMode mode) {
  if (!IsGspo(mode)) throw std::invalid_argument("GspoLoss needs a GSPO mode");
  CheckShapes(inputs, table, cfg);
  const PerPosition& detached = Detached(inputs);
  std::vector<double> w(inputs.logp_new.size(), 1.0);
  for (size_t i = 0; i < w.size(); ++i) {
    if (!inputs.logp_new[i].empty()) {
      w[i] = GspoSequenceRatio(detached[i], inputs.logp_old[i]);
    }
  }
  return ClippedSurrogate(inputs, table, cfg, mode, [&](size_t i, size_t t) {
    const auto token = GspoTokenRatio(w[i], inputs.logp_new[i][t], detached[i][t]);
    return std::pair{token.value, token.grad_own};
  });
}

LossReport ComputeLoss(const RatioInputs& inputs, const AdvantageTable& table,
                       const ClipConfig& cfg, SurrogateMode mode) {
  return IsGspo(mode) ? GspoLoss(inputs, table, cfg, mode)
                      : GrpoLoss(inputs, table, cfg, mode);
}

GradientCheck FiniteDifferenceCheck(const LossFn& loss_fn, RatioInputs inputs,
                                    double epsilon, double h) {
  if (inputs.logp_detached.empty()) inputs.logp_detached = inputs.logp_new;
  const LossReport base = loss_fn(inputs);
  for (const auto& row : base.ratio) {
    for (double r : row) {
      const double margin = 10.0 * h * std::max(1.0, r);
      if (std::abs(r - (1.0 - epsilon)) <= margin ||
          std::abs(r - (1.0 + epsilon)) <= margin) {
        throw BoundaryTooClose("ratio " + std::to_string(r) +
                               " is within 10h of a clip boundary");
      }
    }
  }
  GradientCheck check;
  for (size_t i = 0; i < inputs.logp_new.size(); ++i) {
    for (size_t t = 0; t < inputs.logp_new[i].size(); ++t) {
      const double x = inputs.logp_new[i][t];
      inputs.logp_new[i][t] = x + h;
      const double plus = loss_fn(inputs).loss;
      inputs.logp_new[i][t] = x - h;
      const double minus = loss_fn(inputs).loss;
      inputs.logp_new[i][t] = x;
      const double numeric = (plus - minus) / (2.0 * h);
      const double analytic = base.grad_logp[i][t];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-4});
      check.max_rel_error =
          std::max(check.max_rel_error, std::abs(analytic - numeric) / denom);
      ++check.coordinates;
    }
  }
  return check;
}

}  // namespace treeadv
