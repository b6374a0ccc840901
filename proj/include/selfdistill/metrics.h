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

#ifndef SELFDISTILL_METRICS_H_
#define SELFDISTILL_METRICS_H_

#include <algorithm>
#include <array>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "selfdistill/corpus.h"

namespace selfdistill {

struct BleuScore {
  double value = 0.0;
  std::array<double, 4> precisions{};
  double brevity_penalty = 1.0;
};

// Sentence-level BLEU-4. p1 is the plain clipped precision; orders 2..4 use
// (matches + 1) / (candidate n-grams + 1). BP = min(1, exp(1 - r/c)).
// An empty candidate scores 0; an empty reference is a DataError.
BleuScore smoothed_sentence_bleu(std::span<const TokenId> candidate,
                                 std::span<const TokenId> reference);
BleuScore smoothed_sentence_bleu(std::span<const std::string> candidate,
                                 std::span<const std::string> reference);

template <class T>
bool exact_match(std::span<const T> candidate, std::span<const T> reference) {
  return std::equal(candidate.begin(), candidate.end(), reference.begin(),
                    reference.end());
}

// BLEU-4 in which every n-gram containing a keyword counts kw_weight times.
// The same per-token weights enter the candidate and reference lengths of
// the brevity penalty. kw_weight = 1 reproduces smoothed_sentence_bleu.
double weighted_ngram_match(std::span<const std::string> candidate,
                            std::span<const std::string> reference,
                            const std::set<std::string>& keywords, double kw_weight);

// Fraction of the reference's subtree multiset found in the candidate's.
// nullopt when the reference does not parse (component excluded); 0 when
// only the candidate fails to parse.
std::optional<double> ast_match(std::string_view candidate_src,
                                std::string_view reference_src);

// Def-use edges compared as (variable, def occurrence, use occurrence)
// triples. nullopt when the reference has no edges or does not parse.
std::optional<double> dataflow_match(std::string_view candidate_src,
                                     std::string_view reference_src);

struct CodeBleuWeights {
  double ngram = 0.25;
  double weighted_ngram = 0.25;
  double ast = 0.25;
  double dataflow = 0.25;

  // Non-negative and summing to 1 within 1e-9, else ConfigError.
  void validate() const;
  friend bool operator==(const CodeBleuWeights&, const CodeBleuWeights&) = default;
};

inline constexpr double kDefaultKeywordWeight = 4.0;

struct CodeBleuScore {
  double value = 0.0;
  double ngram = 0.0;
  double weighted_ngram = 0.0;
  std::optional<double> ast_match;
  std::optional<double> dataflow_match;
  CodeBleuWeights weights;
  // Weights after dropping excluded components and renormalizing.
  CodeBleuWeights effective_weights;
};

CodeBleuScore codebleu(std::string_view candidate_src, std::string_view reference_src,
                       const CodeBleuWeights& weights = {},
                       double kw_weight = kDefaultKeywordWeight);

// sim(candidate, reference) used for pseudo-target selection.
using SimilarityFn =
    std::function<double(std::span<const std::string>, std::span<const std::string>)>;
SimilarityFn similarity(Task task, const CodeBleuWeights& weights = {},
                        double kw_weight = kDefaultKeywordWeight);
SimilarityFn similarity(std::string_view task_name);

struct SentenceScore {
  double bleu = 0.0;
  bool exact = false;
  std::optional<CodeBleuScore> codebleu;
};

// Corpus figures are means of sentence scores scaled by 100, summed in
// example order; exact_match_rate stays in [0, 1].
struct MetricReport {
  double corpus_bleu = 0.0;
  double exact_match_rate = 0.0;
  std::optional<double> corpus_codebleu;
  // Means over the examples where the component was defined, x100.
  std::optional<double> mean_ngram;
  std::optional<double> mean_weighted_ngram;
  std::optional<double> mean_ast_match;
  std::optional<double> mean_dataflow_match;
  std::vector<SentenceScore> per_sentence;

  // {"bleu", "em", "codebleu", "components": {...}}
  nlohmann::json to_json() const;
};

MetricReport evaluate(std::span<const std::vector<std::string>> predictions,
                      std::span<const std::vector<std::string>> references, Task task,
                      const CodeBleuWeights& weights = {},
                      double kw_weight = kDefaultKeywordWeight);
MetricReport evaluate(std::span<const TokenSequence> predictions, const Dataset& dataset,
                      const Vocab& vocab);

}  // namespace selfdistill

#endif  // SELFDISTILL_METRICS_H_
