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

#include "selfdistill/decode.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "selfdistill/error.h"
#include "selfdistill/util/parallel.h"

namespace selfdistill {

namespace {

struct LiveHypothesis {
  TokenSequence tokens;
  double score = 0.0;
  std::unique_ptr<DecoderCursor> cursor;
};

struct Expansion {
  double score;
  std::size_t parent;
  TokenId token;
};

}  // namespace

bool hypothesis_before(const Hypothesis& a, const Hypothesis& b) {
  if (a.logprob != b.logprob) return a.logprob > b.logprob;
  return a.tokens < b.tokens;
}

BeamList beam_search(const SequenceModel& model, const TokenSequence& source, std::size_t k,
                     std::size_t max_len) {
  if (k < 1) throw ContractError("beam_search: beam size must be at least 1");
  if (max_len < 1) throw ContractError("beam_search: max_len must be at least 1");
  const std::size_t V = model.vocab_size();

  std::vector<LiveHypothesis> live;
  live.push_back({{}, 0.0, model.start(source)});
  std::vector<Hypothesis> finished;

  for (std::size_t len = 0; !live.empty(); ++len) {
    if (len == max_len) {
      for (auto& h : live) {
        TokenSequence tokens = std::move(h.tokens);
        tokens.push_back(kEos);
        finished.push_back({std::move(tokens), h.score + h.cursor->logprobs()[kEos], false});
      }
      break;
    }

    std::vector<Expansion> expansions;
    expansions.reserve(live.size() * V);
    for (std::size_t i = 0; i < live.size(); ++i) {
      const auto& lp = live[i].cursor->logprobs();
      for (std::size_t t = 0; t < V; ++t) {
        const auto tok = static_cast<TokenId>(t);
        if (!is_emittable(tok) || !std::isfinite(lp[t])) continue;
        expansions.push_back({live[i].score + lp[t], i, tok});
      }
    }
    // Parents are distinct same-length prefixes, so comparing (parent tokens,
    // token) is the lexicographic order of the expanded sequences.
    auto before = [&](const Expansion& a, const Expansion& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.parent != b.parent) return live[a.parent].tokens < live[b.parent].tokens;
      return a.token < b.token;
    };
    const std::size_t keep = std::min(k, expansions.size());
    std::partial_sort(expansions.begin(), expansions.begin() + keep, expansions.end(), before);

    std::vector<LiveHypothesis> next;
    for (std::size_t i = 0; i < keep; ++i) {
      const Expansion& e = expansions[i];
      TokenSequence tokens = live[e.parent].tokens;
      tokens.push_back(e.token);
      if (e.token == kEos) {
        finished.push_back({std::move(tokens), e.score, true});
      } else {
        next.push_back({std::move(tokens), e.score, live[e.parent].cursor->extend(e.token)});
      }
    }
    live = std::move(next);

    if (finished.size() >= k) {
      std::sort(finished.begin(), finished.end(), hypothesis_before);
      const double best_live =
          live.empty() ? -std::numeric_limits<double>::infinity() : live.front().score;
      if (finished[k - 1].logprob >= best_live) break;
    }
  }

  std::sort(finished.begin(), finished.end(), hypothesis_before);
  if (finished.size() > k) finished.resize(k);
  return BeamList{std::move(finished), k};
}

Hypothesis greedy_decode(const SequenceModel& model, const TokenSequence& source,
                         std::size_t max_len) {
  if (max_len < 1) throw ContractError("greedy_decode: max_len must be at least 1");
  Hypothesis h;
  auto cursor = model.start(source);
  for (std::size_t len = 0;; ++len) {
    const auto& lp = cursor->logprobs();
    if (len == max_len) {
      h.tokens.push_back(kEos);
      h.logprob += lp[kEos];
      h.finished = false;
      return h;
    }
    TokenId best = -1;
    for (std::size_t t = 0; t < lp.size(); ++t) {
      const auto tok = static_cast<TokenId>(t);
      if (!is_emittable(tok) || !std::isfinite(lp[t])) continue;
      if (best < 0 || lp[t] > lp[static_cast<std::size_t>(best)]) best = tok;
    }
    if (best < 0) throw DataError("greedy_decode: model assigns zero mass to every token");
    h.tokens.push_back(best);
    h.logprob += lp[static_cast<std::size_t>(best)];
    if (best == kEos) {
      h.finished = true;
      return h;
    }
    cursor = cursor->extend(best);
  }
}

double sequence_logprob(const SequenceModel& model, const TokenSequence& source,
                        const TokenSequence& target) {
  if (target.empty() || target.back() != kEos) {
    throw ContractError("sequence_logprob: target must be EOS-terminated");
  }
  auto cursor = model.start(source);
  double total = 0.0;
  for (std::size_t j = 0; j < target.size(); ++j) {
    const TokenId t = target[j];
    if (t < 0 || static_cast<std::size_t>(t) >= model.vocab_size()) {
      throw DataError("sequence_logprob: id " + std::to_string(t) + " outside the vocabulary");
    }
    total += cursor->logprobs()[static_cast<std::size_t>(t)];
    if (j + 1 < target.size()) cursor = cursor->extend(t);
  }
  return total;
}

double avg_greedy_mass_probability(const SequenceModel& model, const Dataset& dataset,
                                   std::size_t max_len) {
  if (dataset.empty()) throw ContractError("avg_greedy_mass_probability: empty dataset");
  double sum = 0.0;
  for (const auto& ex : dataset.examples) {
    const Hypothesis h = greedy_decode(model, ex.source, max_len);
    sum += std::exp(sequence_logprob(model, ex.source, h.tokens));
  }
  return sum / static_cast<double>(dataset.size());
}

TokenSequence strip_eos(TokenSequence tokens) {
  if (!tokens.empty() && tokens.back() == kEos) tokens.pop_back();
  return tokens;
}

std::vector<TokenSequence> decode_dataset(const SequenceModel& model, const Dataset& dataset,
                                          std::size_t beam_size, std::size_t max_len,
                                          std::size_t workers) {
  std::vector<TokenSequence> out(dataset.size());
  parallel_for(dataset.size(), workers, [&](std::size_t i) {
    const auto& src = dataset.examples[i].source;
    if (beam_size == 1) {
      out[i] = strip_eos(greedy_decode(model, src, max_len).tokens);
    } else {
      const BeamList beam = beam_search(model, src, beam_size, max_len);
      if (beam.hypotheses.empty()) {
        throw DataError("example " + std::to_string(i) + ": beam search found no hypothesis");
      }
      out[i] = strip_eos(beam.hypotheses.front().tokens);
    }
  });
  return out;
}

}  // namespace selfdistill
