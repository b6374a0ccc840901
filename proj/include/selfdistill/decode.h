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

#ifndef SELFDISTILL_DECODE_H_
#define SELFDISTILL_DECODE_H_

#include <cstddef>
#include <vector>

#include "selfdistill/corpus.h"
#include "selfdistill/model.h"

namespace selfdistill {

inline constexpr std::size_t kDefaultMaxLen = 64;

struct Hypothesis {
  TokenSequence tokens;  // BOS stripped, EOS-terminated
  double logprob = 0.0;
  bool finished = false;  // false when EOS was forced at max_len

  friend bool operator==(const Hypothesis&, const Hypothesis&) = default;
};

// Sorted by logprob descending, ties by lexicographically smaller tokens.
struct BeamList {
  std::vector<Hypothesis> hypotheses;
  std::size_t beam_size = 0;

  friend bool operator==(const BeamList&, const BeamList&) = default;
};

// BeamList ordering.
bool hypothesis_before(const Hypothesis& a, const Hypothesis& b);

// PAD and BOS are never generated.
inline bool is_emittable(TokenId t) { return t != kPad && t != kBos; }

// Beam search over cumulative log-probability, no length normalization.
// Each step keeps the k best expansions of the live hypotheses; expansions
// ending in EOS move to the finished pool. Search stops once the pool's
// k-th best is at least the best live score, or when live hypotheses hold
// max_len tokens, in which case EOS is appended to them with its actual
// log-probability. Returns the k best of everything finished.
BeamList beam_search(const SequenceModel& model, const TokenSequence& source, std::size_t k,
                     std::size_t max_len = kDefaultMaxLen);

// Argmax at every step, ties to the lowest id; EOS forced at max_len.
Hypothesis greedy_decode(const SequenceModel& model, const TokenSequence& source,
                         std::size_t max_len = kDefaultMaxLen);

// Sum of log p(t_j | source, t_<j) over an EOS-terminated target.
double sequence_logprob(const SequenceModel& model, const TokenSequence& source,
                        const TokenSequence& target);

// Mean over examples of p(greedy decode | source).
double avg_greedy_mass_probability(const SequenceModel& model, const Dataset& dataset,
                                   std::size_t max_len = kDefaultMaxLen);

// Drops one trailing EOS, if present.
TokenSequence strip_eos(TokenSequence tokens);

// Top hypothesis per example, EOS stripped, decoded with `workers` threads.
std::vector<TokenSequence> decode_dataset(const SequenceModel& model, const Dataset& dataset,
                                          std::size_t beam_size,
                                          std::size_t max_len = kDefaultMaxLen,
                                          std::size_t workers = 1);

}  // namespace selfdistill

#endif  // SELFDISTILL_DECODE_H_
