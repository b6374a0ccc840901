// Copyright 2026 The selfdistill Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "selfdistill/synth.h"

#include <set>
#include <utility>

#include "selfdistill/error.h"

namespace selfdistill {

using minilang::AstNode;
using minilang::NodeKind;

namespace {

constexpr const char* kNames[16] = {"a", "b", "c", "d", "e", "f", "g", "h",
                                    "k", "m", "n", "p", "q", "r", "s", "t"};
constexpr const char* kOps[6] = {"+", "-", "*", "/", "<", ">"};

const char* op_word(const std::string& op) {
  switch (op[0]) {
    case '+': return "plus";
    case '-': return "minus";
    case '*': return "times";
    case '/': return "over";
    case '<': return "below";
    case '>': return "above";
  }
  return "op";
}

AstNode leaf(const SynthConfig& cfg, Rng& rng) {
  if (rng.index(3) == 0) {
    return AstNode{NodeKind::kNumber, std::to_string(rng.index(10)), {}, 0};
  }
  return AstNode{NodeKind::kIdentifier,
                 kNames[rng.index(static_cast<std::size_t>(cfg.identifier_pool_size))], {}, 0};
}

AstNode expression(const SynthConfig& cfg, Rng& rng) {
  AstNode e = leaf(cfg, rng);
  const std::size_t extra = rng.index(static_cast<std::size_t>(cfg.max_expr_depth));
  for (std::size_t i = 0; i < extra; ++i) {
    e = AstNode{NodeKind::kBinaryOp, kOps[rng.index(6)], {std::move(e), leaf(cfg, rng)}, 0};
  }
  return e;
}

AstNode assignment(const SynthConfig& cfg, Rng& rng) {
  AstNode target{NodeKind::kIdentifier,
                 kNames[rng.index(static_cast<std::size_t>(cfg.identifier_pool_size))], {}, 0};
  return AstNode{NodeKind::kAssign, "", {std::move(target), expression(cfg, rng)}, 0};
}

void summarize_expr(const AstNode& e, std::vector<std::string>& out) {
  if (e.kind == NodeKind::kBinaryOp) {
    summarize_expr(e.children[0], out);
    out.emplace_back(op_word(e.label));
    summarize_expr(e.children[1], out);
  } else {
    out.push_back(e.label);
  }
}

void summarize_stmts(const AstNode& prog, std::vector<std::string>& out) {
  for (std::size_t i = 0; i < prog.children.size(); ++i) {
    if (i) out.emplace_back("and");
    const AstNode& s = prog.children[i];
    switch (s.kind) {
      case NodeKind::kAssign:
        out.emplace_back("set");
        out.push_back(s.children[0].label);
        out.emplace_back("to");
        summarize_expr(s.children[1], out);
        break;
      case NodeKind::kReturn:
        out.emplace_back("return");
        summarize_expr(s.children[0], out);
        break;
      case NodeKind::kIf:
        out.emplace_back("when");
        summarize_expr(s.children[0], out);
        out.emplace_back("then");
        summarize_stmts(s.children[1], out);
        out.emplace_back("end");
        break;
      default:
        break;
    }
  }
}

TextPair make_pair(const AstNode& program, Task direction) {
  TextPair p{split_whitespace(minilang::pretty_print(program)), summarize(program)};
  if (direction == Task::kGeneration) std::swap(p.source, p.target);
  return p;
}

}  // namespace

void SynthConfig::validate() const {
  if (count == 0) throw ConfigError("synth: count must be positive");
  if (max_stmts < 1 || max_stmts > 8) throw ConfigError("synth: max_stmts must be in [1, 8]");
  if (max_expr_depth < 1 || max_expr_depth > 4) {
    throw ConfigError("synth: max_expr_depth must be in [1, 4]");
  }
  if (identifier_pool_size < 2 || identifier_pool_size > 16) {
    throw ConfigError("synth: identifier_pool_size must be in [2, 16]");
  }
}

AstNode synth_program(const SynthConfig& cfg, Rng& rng) {
  AstNode prog{NodeKind::kProgram, "", {}, 0};
  const std::size_t n = 1 + rng.index(static_cast<std::size_t>(cfg.max_stmts));
  for (std::size_t i = 0; i < n; ++i) {
    const bool last = i + 1 == n;
    const std::size_t pick = rng.index(6);
    if (last && pick < 3) {
      prog.children.push_back(AstNode{NodeKind::kReturn, "", {expression(cfg, rng)}, 0});
    } else if (pick == 5) {
      AstNode body{NodeKind::kProgram, "", {assignment(cfg, rng)}, 0};
      prog.children.push_back(
          AstNode{NodeKind::kIf, "", {expression(cfg, rng), std::move(body)}, 0});
    } else {
      prog.children.push_back(assignment(cfg, rng));
    }
  }
  return prog;
}

std::vector<std::string> summarize(const AstNode& program) {
  std::vector<std::string> out;
  summarize_stmts(program, out);
  return out;
}

TextDataset synth_generate(const SynthConfig& cfg, Task direction) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, "corpus"));
  TextDataset d{direction, Split::kTrain, {}};
  d.pairs.reserve(cfg.count);
  for (std::size_t i = 0; i < cfg.count; ++i) {
    d.pairs.push_back(make_pair(synth_program(cfg, rng), direction));
  }
  return d;
}

SynthSplits synth_splits(const SynthConfig& cfg, Task direction, std::size_t n_train,
                         std::size_t n_dev, std::size_t n_test) {
  SynthConfig checked = cfg;
  checked.count = n_train + n_dev + n_test;
  checked.validate();
  Rng rng(derive_seed(cfg.seed, "corpus"));
  std::set<std::string> seen;
  std::vector<TextPair> pairs;
  const std::size_t total = checked.count;
  const std::size_t max_attempts = 100 * total + 1000;
  for (std::size_t attempt = 0; pairs.size() < total; ++attempt) {
    if (attempt == max_attempts) {
      throw ConfigError("synth: could not draw " + std::to_string(total) +
                        " distinct programs; enlarge max_stmts, max_expr_depth or "
                        "identifier_pool_size");
    }
    AstNode prog = synth_program(checked, rng);
    if (!seen.insert(minilang::pretty_print(prog)).second) continue;
    pairs.push_back(make_pair(prog, direction));
  }
  SynthSplits s;
  s.train = {direction, Split::kTrain, {pairs.begin(), pairs.begin() + n_train}};
  s.dev = {direction, Split::kDev,
           {pairs.begin() + n_train, pairs.begin() + n_train + n_dev}};
  s.test = {direction, Split::kTest, {pairs.begin() + n_train + n_dev, pairs.end()}};
  return s;
}

}  // namespace selfdistill
