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

#ifndef SELFDISTILL_SYNTH_H_
#define SELFDISTILL_SYNTH_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "selfdistill/corpus.h"
#include "selfdistill/minilang.h"
#include "selfdistill/util/random.h"

namespace selfdistill {

// Seeded generator of (program, summary) pairs over the mini-language.
struct SynthConfig {
  std::uint64_t seed = 0;
  std::size_t count = 1;
  int max_stmts = 3;              // [1, 8]
  int max_expr_depth = 2;         // [1, 4]; operands per expression chain
  int identifier_pool_size = 4;   // [2, 16]

  // Throws ConfigError when a field is out of range.
  void validate() const;
};

// Random program AST drawn from the generator's distribution.
minilang::AstNode synth_program(const SynthConfig& cfg, Rng& rng);

// Deterministic English rendering of a program, e.g.
// "a = b + 1 ; return a ;" -> "set a to b plus 1 and return a".
std::vector<std::string> summarize(const minilang::AstNode& program);

// count pairs; summarization pairs are (code, summary), generation pairs
// the reverse. Pure function of (cfg, direction).
TextDataset synth_generate(const SynthConfig& cfg, Task direction);

struct SynthSplits {
  TextDataset train;
  TextDataset dev;
  TextDataset test;
};

// Disjoint train/dev/test drawn from one stream; no program appears twice.
// cfg.count is ignored in favour of the explicit sizes.
SynthSplits synth_splits(const SynthConfig& cfg, Task direction,
                         std::size_t n_train, std::size_t n_dev, std::size_t n_test);

}  // namespace selfdistill

#endif  // SELFDISTILL_SYNTH_H_
