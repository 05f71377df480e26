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

#include "treeadv/config.h"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

#include "treeadv/policy.h"

namespace treeadv {

namespace {

std::string Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string FormatDouble(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, end);
  // Keep a decimal point or exponent so the value reads back as a float.
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

int64_t ParseInt(const std::string& key, const std::string& v) {
  int64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key, "expected an integer, got '" + v + "'");
  }
  return out;
}

uint64_t ParseUnsigned(const std::string& key, const std::string& v) {
  uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key, "expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double ParseDouble(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key, "expected a number, got '" + v + "'");
  }
  return out;
}

std::string ParseString(const std::string& key, const std::string& v) {
  if (v.size() < 2 || v.front() != '"' || v.back() != '"') {
    throw ConfigError(key, "expected a quoted string, got '" + v + "'");
  }
  return v.substr(1, v.size() - 2);
}

bool ParseBool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

std::set<TokenId> ParseTokenList(const std::string& key, const std::string& v) {
  if (v.size() < 2 || v.front() != '[' || v.back() != ']') {
    throw ConfigError(key, "expected a list like [1, 2], got '" + v + "'");
  }
  std::set<TokenId> out;
  std::stringstream items(v.substr(1, v.size() - 2));
  std::string item;
  while (std::getline(items, item, ',')) {
    item = Trim(item);
    if (item.empty()) continue;
    out.insert(static_cast<TokenId>(ParseInt(key, item)));
  }
  return out;
}

std::string FormatTokenList(const std::set<TokenId>& tokens) {
  std::string out = "[";
  for (auto it = tokens.begin(); it != tokens.end(); ++it) {
    if (it != tokens.begin()) out += ", ";
    out += std::to_string(*it);
  }
  return out + "]";
}

std::string_view CadenceName(AnnealCadence c) {
  return c == AnnealCadence::kPerEpoch ? "per-epoch" : "per-step";
}

std::string_view ScheduleName(LrSchedule s) {
  return s == LrSchedule::kConstant ? "constant" : "warmup-cosine";
}

struct Field {
  std::function<void(RunConfig&, const std::string& key, const std::string&)> parse;
  std::function<std::string(const RunConfig&)> format;
};

template <typename T>
Field IntField(T RunConfig::*member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) {
            c.*member = static_cast<T>(ParseInt(k, v));
          },
          [member](const RunConfig& c) { return std::to_string(c.*member); }};
}

Field DoubleField(double RunConfig::*member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) {
            c.*member = ParseDouble(k, v);
          },
          [member](const RunConfig& c) { return FormatDouble(c.*member); }};
}

Field TokensField(std::set<TokenId> RunConfig::*member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) {
            c.*member = ParseTokenList(k, v);
          },
          [member](const RunConfig& c) { return FormatTokenList(c.*member); }};
}

std::string Quote(std::string_view s) { return "\"" + std::string(s) + "\""; }

// Ordered as written by FormatConfig.
const std::vector<std::pair<std::string, Field>>& Fields() {
  static const std::vector<std::pair<std::string, Field>> fields = {
      {"mode",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          try {
            c.mode = ParseMode(ParseString(k, v));
          } catch (const std::invalid_argument& e) {
            throw ConfigError(k, e.what());
          }
        },
        [](const RunConfig& c) { return Quote(ModeName(c.mode)); }}},
      {"K", IntField(&RunConfig::K)},
      {"M", IntField(&RunConfig::M)},
      {"tau_init", DoubleField(&RunConfig::tau_init)},
      {"tau_floor", DoubleField(&RunConfig::tau_floor)},
      {"tau_decrement", DoubleField(&RunConfig::tau_decrement)},
      {"anneal_cadence",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          const std::string s = ParseString(k, v);
          if (s == "per-epoch") {
            c.anneal_cadence = AnnealCadence::kPerEpoch;
          } else if (s == "per-step") {
            c.anneal_cadence = AnnealCadence::kPerStep;
          } else {
            throw ConfigError(k, "expected \"per-epoch\" or \"per-step\"");
          }
        },
        [](const RunConfig& c) { return Quote(CadenceName(c.anneal_cadence)); }}},
      {"branch_factor", IntField(&RunConfig::branch_factor)},
      {"top_k", IntField(&RunConfig::top_k)},
      {"top_p", DoubleField(&RunConfig::top_p)},
      {"no_branch_tokens", TokensField(&RunConfig::no_branch_tokens)},
      {"epsilon", DoubleField(&RunConfig::epsilon)},
      {"delta", DoubleField(&RunConfig::delta)},
      {"kl_coeff", DoubleField(&RunConfig::kl_coeff)},
      {"lr_schedule",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          const std::string s = ParseString(k, v);
          if (s == "constant") {
            c.lr_schedule = LrSchedule::kConstant;
          } else if (s == "warmup-cosine") {
            c.lr_schedule = LrSchedule::kWarmupCosine;
          } else {
            throw ConfigError(k, "expected \"constant\" or \"warmup-cosine\"");
          }
        },
        [](const RunConfig& c) { return Quote(ScheduleName(c.lr_schedule)); }}},
      {"lr", DoubleField(&RunConfig::lr)},
      {"lr_min", DoubleField(&RunConfig::lr_min)},
      {"warmup_steps", IntField(&RunConfig::warmup_steps)},
      {"batch_size", IntField(&RunConfig::batch_size)},
      {"total_steps", IntField(&RunConfig::total_steps)},
      {"reuse_epochs", IntField(&RunConfig::reuse_epochs)},
      {"checkpoint_every", IntField(&RunConfig::checkpoint_every)},
      {"seed",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.seed = ParseUnsigned(k, v);
        },
        [](const RunConfig& c) { return std::to_string(c.seed); }}},
      {"task",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          try {
            c.task = ParseTaskKind(ParseString(k, v));
          } catch (const std::invalid_argument& e) {
            throw ConfigError(k, e.what());
          }
        },
        [](const RunConfig& c) { return Quote(TaskKindName(c.task)); }}},
      {"vocab_size", IntField(&RunConfig::vocab_size)},
      {"operands", IntField(&RunConfig::operands)},
      {"base", IntField(&RunConfig::base)},
      {"length_cap", IntField(&RunConfig::length_cap)},
      {"stall_tokens", TokensField(&RunConfig::stall_tokens)},
      {"window", IntField(&RunConfig::window)},
      {"joint_features",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.joint_features = ParseBool(k, v);
        },
        [](const RunConfig& c) { return std::string(c.joint_features ? "true" : "false"); }}},
      {"prompt_features",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.prompt_features = ParseBool(k, v);
        },
        [](const RunConfig& c) { return std::string(c.prompt_features ? "true" : "false"); }}},
      {"init_scale", DoubleField(&RunConfig::init_scale)},
      {"train_pool", IntField(&RunConfig::train_pool)},
      {"eval_instances", IntField(&RunConfig::eval_instances)},
      {"eval_every", IntField(&RunConfig::eval_every)},
      {"parallel",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.parallel = ParseBool(k, v);
        },
        [](const RunConfig& c) { return std::string(c.parallel ? "true" : "false"); }}},
  };
  return fields;
}

void CheckTokens(const std::string& key, const std::set<TokenId>& tokens,
                 int32_t vocab_size) {
  for (TokenId t : tokens) {
    if (t < 0 || t >= vocab_size) {
      throw ConfigError(key, "token " + std::to_string(t) + " outside vocabulary");
    }
  }
}

}  // namespace

void RunConfig::Validate() const {
  if (K < 2) throw ConfigError("K", "must be >= 2 for group normalization");
  if (M < 1) throw ConfigError("M", "must be >= 1");
  if (M > K) throw ConfigError("M", "must not exceed K");
  if (K % M != 0) {
    throw ConfigError("M", "K=" + std::to_string(K) + " must be divisible by M=" +
                               std::to_string(M) + " (K mod M = 0)");
  }
  Branch().Validate();
  if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("top_p", "must lie in (0, 1]");
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw ConfigError("epsilon", "must lie in (0, 1)");
  }
  if (!(delta >= 0.0)) throw ConfigError("delta", "must be >= 0");
  if (!(kl_coeff >= 0.0)) throw ConfigError("kl_coeff", "must be >= 0");
  if (!(lr > 0.0)) throw ConfigError("lr", "must be > 0");
  if (!(lr_min >= 0.0 && lr_min <= lr)) throw ConfigError("lr_min", "must lie in [0, lr]");
  if (warmup_steps < 0) throw ConfigError("warmup_steps", "must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size", "must be >= 1");
  if (total_steps < 1) throw ConfigError("total_steps", "must be >= 1");
  if (reuse_epochs < 1) throw ConfigError("reuse_epochs", "must be >= 1");
  if (checkpoint_every < 1) throw ConfigError("checkpoint_every", "must be >= 1");
  if (window < 1) throw ConfigError("window", "must be >= 1");
  auto check_table = [this](const char* field, int32_t length) {
    int64_t rows = 1;
    for (int32_t i = 0; i < length && rows <= kMaxJointRows; ++i) rows *= vocab_size;
    if (rows > kMaxJointRows) {
      throw ConfigError(field, "feature table exceeds " + std::to_string(kMaxJointRows) +
                                   " rows; shrink vocab_size, window or operands");
    }
  };
  if (joint_features) check_table("joint_features", window);
  if (prompt_features) check_table("prompt_features", operands + 1);
  if (!(init_scale >= 0.0)) throw ConfigError("init_scale", "must be >= 0");
  if (train_pool < 1) throw ConfigError("train_pool", "must be >= 1");
  if (eval_instances < 1) throw ConfigError("eval_instances", "must be >= 1");
  if (eval_every < 0) throw ConfigError("eval_every", "must be >= 0");
  Family().Validate();
  CheckTokens("no_branch_tokens", no_branch_tokens, vocab_size);
  CheckTokens("stall_tokens", stall_tokens, vocab_size);
}

TaskFamily RunConfig::Family() const {
  TaskFamily f;
  f.kind = task;
  f.vocab = Vocab();
  f.operands = operands;
  f.base = base;
  f.length_cap = length_cap;
  return f;
}

BranchPolicy RunConfig::Branch() const {
  BranchPolicy b;
  b.tau = tau_init;
  b.tau_init = tau_init;
  b.tau_floor = tau_floor;
  b.tau_decrement = tau_decrement;
  b.anneal_cadence = anneal_cadence;
  b.branch_factor = branch_factor;
  b.no_branch_tokens = no_branch_tokens;
  b.delimiter_tokens = {Vocab().delimiter()};
  b.top_k = top_k;
  return b;
}

DecodeConfig RunConfig::Decode() const {
  return DecodeConfig{Vocab().eos(), length_cap, top_p};
}

ClipConfig RunConfig::Clip() const { return ClipConfig{epsilon, kl_coeff}; }

RunConfig DefaultConfig() {
  RunConfig c;
  c.stall_tokens = {c.Vocab().stall()};
  c.no_branch_tokens = {c.Vocab().stall()};
  return c;
}

RunConfig ParseConfig(const std::string& text) {
  static const std::map<std::string, const Field*> index = [] {
    std::map<std::string, const Field*> m;
    for (const auto& [name, field] : Fields()) m[name] = &field;
    return m;
  }();
  RunConfig config = DefaultConfig();
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    if (Trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no), "expected key = value");
    }
    const std::string key = Trim(std::string_view(line).substr(0, eq));
    const std::string value = Trim(std::string_view(line).substr(eq + 1));
    const auto it = index.find(key);
    if (it == index.end()) throw ConfigError(key, "unknown key");
    if (!seen.insert(key).second) throw ConfigError(key, "duplicate key");
    it->second->parse(config, key, value);
  }
  config.Validate();
  return config;
}

RunConfig LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return ParseConfig(buf.str());
}

std::string FormatConfig(const RunConfig& config) {
  std::string out;
  for (const auto& [name, field] : Fields()) {
    out += name + " = " + field.format(config) + "\n";
  }
  return out;
}

}  // namespace treeadv
