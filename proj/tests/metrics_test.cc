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

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "oracles.h"
#include "selfdistill/corpus.h"
#include "selfdistill/error.h"
#include "selfdistill/metrics.h"
#include "selfdistill/minilang.h"
#include "selfdistill/synth.h"

namespace selfdistill {
namespace {

using Words = std::vector<std::string>;

Words w(std::string_view s) { return split_whitespace(s); }

TEST(BleuTest, HandComputedCases) {
  for (const auto& c : oracle::kBleuCases) {
    const double got = smoothed_sentence_bleu(w(c.candidate), w(c.reference)).value;
    EXPECT_NEAR(got, c.expected, 1e-9) << c.candidate << " | " << c.reference;
    EXPECT_NEAR(oracle::bleu(w(c.candidate), w(c.reference)), c.expected, 1e-9)
        << "oracle disagrees with the closed form: " << c.candidate;
  }
}

TEST(BleuTest, WorkedExampleComponents) {
  const BleuScore s = smoothed_sentence_bleu(w("the the the cat"), w("the cat"));
  EXPECT_NEAR(s.precisions[0], 0.5, 1e-12);
  EXPECT_NEAR(s.precisions[1], 0.5, 1e-12);
  EXPECT_NEAR(s.precisions[2], 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(s.precisions[3], 0.5, 1e-12);
  EXPECT_EQ(s.brevity_penalty, 1.0);
  EXPECT_NEAR(s.value, 0.45180, 5e-6);
}

TEST(BleuTest, EmptyCandidateAndReference) {
  EXPECT_EQ(smoothed_sentence_bleu(Words{}, w("a b")).value, 0.0);
  EXPECT_THROW(smoothed_sentence_bleu(w("a"), Words{}), DataError);
}

TEST(BleuTest, IdOverloadAgreesWithStrings) {
  const TokenSequence c{4, 4, 4, 5}, r{4, 5};
  EXPECT_EQ(smoothed_sentence_bleu(c, r).value,
            smoothed_sentence_bleu(w("the the the cat"), w("the cat")).value);
}

TEST(BleuTest, RandomPairsMatchOracleAndStayInRange) {
  std::mt19937_64 rng(17);
  const Words alphabet{"a", "b", "c", "d"};
  for (int trial = 0; trial < 500; ++trial) {
    Words c(rng() % 9), r(1 + rng() % 8);
    for (auto& t : c) t = alphabet[rng() % alphabet.size()];
    for (auto& t : r) t = alphabet[rng() % alphabet.size()];
    const double v = smoothed_sentence_bleu(c, r).value;
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    EXPECT_NEAR(v, oracle::bleu(c, r), 1e-12);
  }
}

TEST(ExactMatchTest, Cases) {
  const Words a = w("a b"), b = w("a c"), empty;
  EXPECT_TRUE(exact_match<std::string>(a, a));
  EXPECT_FALSE(exact_match<std::string>(a, b));
  EXPECT_TRUE(exact_match<std::string>(empty, empty));
}

TEST(WeightedNgramTest, ReducesToBleuWithoutKeywords) {
  const std::set<std::string> kw{"if", "return"};
  EXPECT_DOUBLE_EQ(weighted_ngram_match(w("a b c d"), w("a c b d"), kw, 4.0),
                   smoothed_sentence_bleu(w("a b c d"), w("a c b d")).value);
  EXPECT_DOUBLE_EQ(weighted_ngram_match(w("return a b"), w("return b a"), kw, 1.0),
                   smoothed_sentence_bleu(w("return a b"), w("return b a")).value);
}

TEST(WeightedNgramTest, IdentityIsOne) {
  const std::set<std::string> kw{"if", "return"};
  EXPECT_DOUBLE_EQ(weighted_ngram_match(w("return a ;"), w("return a ;"), kw, 4.0), 1.0);
}

TEST(WeightedNgramTest, MissingKeywordCostsMore) {
  // All precisions are 1; only the brevity penalty differs:
  // unweighted r/c = 4/3, weighted r/c = (4 + 1 + 1 + 1)/3.
  const std::set<std::string> kw{"if", "return"};
  const double plain = smoothed_sentence_bleu(w("a b c"), w("return a b c")).value;
  const double weighted = weighted_ngram_match(w("a b c"), w("return a b c"), kw, 4.0);
  EXPECT_NEAR(plain, std::exp(-1.0 / 3.0), 1e-12);
  EXPECT_NEAR(weighted, std::exp(-4.0 / 3.0), 1e-12);
  EXPECT_LT(weighted, plain);
}

TEST(AstMatchTest, Cases) {
  EXPECT_EQ(ast_match("a = 1 ; return a ;", "a = 1 ; return a ;"), 1.0);
  EXPECT_EQ(ast_match("a = 1 ;", "b = 2 ;"), 1.0);
  EXPECT_EQ(ast_match("a = ;", "a = 1 ;"), 0.0);
  EXPECT_FALSE(ast_match("a = 1 ;", "a = ;").has_value());
  // Reference {Program(Assign), Assign(ID,NUM)} vs candidate
  // {Program(Assign), Assign(ID,ID)}: one of two subtrees matches.
  EXPECT_EQ(ast_match("a = b ;", "a = 1 ;"), 0.5);
}

TEST(DataflowMatchTest, Cases) {
  EXPECT_EQ(dataflow_match("a = 1 ; return a ;", "a = 1 ; return a ;"), 1.0);
  EXPECT_EQ(dataflow_match("a = 1 ; return a ;", "a = 2 ; return a ;"), 1.0);
  EXPECT_FALSE(dataflow_match("return 1 ;", "return 1 ;").has_value());
  EXPECT_EQ(dataflow_match("a = ;", "a = 1 ; return a ;"), 0.0);
  EXPECT_EQ(dataflow_match("b = 1 ; return b ;", "a = 1 ; return a ;"), 0.0);
  // Reference edges by occurrence ordinal: (a,0,1) and (a,0,2); the candidate
  // has only (a,0,1).
  EXPECT_EQ(dataflow_match("a = 1 ; return a ;", "a = 1 ; b = a ; return a ;"), 0.5);
  // Reference (a,0,2) and (a,1,3) vs candidate (a,0,1): no shared triple.
  EXPECT_EQ(dataflow_match("a = 1 ; return a ;", "a = 1 ; a = a + 1 ; return a ;"), 0.0);
}

TEST(CodeBleuTest, IdentityIsOne) {
  const CodeBleuScore s = codebleu("a = 1 ; b = a + 2 ; return b ;",
                                   "a = 1 ; b = a + 2 ; return b ;");
  EXPECT_DOUBLE_EQ(s.value, 1.0);
  EXPECT_DOUBLE_EQ(s.ngram, 1.0);
  EXPECT_DOUBLE_EQ(s.weighted_ngram, 1.0);
  EXPECT_EQ(s.ast_match, 1.0);
  EXPECT_EQ(s.dataflow_match, 1.0);
}

TEST(CodeBleuTest, ExcludedDataflowRenormalizes) {
  // ngram: p = (2/4, 1/4, 1/3, 1/2), so ngram = (1/48)^(1/4); no keywords so
  // weighted_ngram is equal; ast = 1; the reference has no def-use edge.
  const CodeBleuScore s = codebleu("a = 1 ;", "b = 2 ;");
  const double ng = std::pow(1.0 / 48.0, 0.25);
  EXPECT_NEAR(s.ngram, ng, 1e-12);
  EXPECT_NEAR(s.weighted_ngram, ng, 1e-12);
  EXPECT_EQ(s.ast_match, 1.0);
  EXPECT_FALSE(s.dataflow_match.has_value());
  EXPECT_NEAR(s.effective_weights.ngram, 1.0 / 3.0, 1e-12);
  EXPECT_EQ(s.effective_weights.dataflow, 0.0);
  EXPECT_NEAR(s.value, (2.0 * ng + 1.0) / 3.0, 1e-12);
  EXPECT_NEAR(s.value, 0.58661, 5e-6);
}

TEST(CodeBleuTest, UnparseableZeroOverlapScoresZero) {
  EXPECT_EQ(codebleu("q q q", "a = 1 ;").value, 0.0);
}

TEST(CodeBleuTest, InvalidWeightsRejected) {
  EXPECT_THROW(codebleu("a = 1 ;", "a = 1 ;", {0.5, 0.5, 0.5, 0.0}), ConfigError);
  EXPECT_THROW(codebleu("a = 1 ;", "a = 1 ;", {-0.5, 0.5, 0.5, 0.5}), ConfigError);
}

TEST(CodeBleuTest, SynthesizedProgramsStayInRange) {
  SynthConfig cfg;
  cfg.seed = 9;
  cfg.count = 200;
  cfg.max_stmts = 4;
  cfg.max_expr_depth = 3;
  const TextDataset d = synth_generate(cfg, Task::kSummarization);
  for (std::size_t i = 0; i + 1 < d.size(); ++i) {
    const std::string a = join_tokens(d.pairs[i].source);
    const std::string b = join_tokens(d.pairs[i + 1].source);
    const CodeBleuScore self = codebleu(a, a);
    EXPECT_DOUBLE_EQ(self.value, 1.0) << a;
    const CodeBleuScore s = codebleu(a, b);
    for (double v : {s.value, s.ngram, s.weighted_ngram, s.ast_match.value_or(0.0),
                     s.dataflow_match.value_or(0.0)}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(SimilarityTest, SelectsMetricByTask) {
  const auto sum = similarity(Task::kSummarization);
  const auto gen = similarity("generation");
  EXPECT_EQ(sum(w("the the the cat"), w("the cat")),
            smoothed_sentence_bleu(w("the the the cat"), w("the cat")).value);
  EXPECT_EQ(gen(w("a = 1 ;"), w("b = 2 ;")), codebleu("a = 1 ;", "b = 2 ;").value);
  EXPECT_THROW(similarity("translation"), ConfigError);
}

TEST(EvaluateTest, PerfectPredictions) {
  const std::vector<Words> refs{w("set a to 1"), w("return b")};
  const MetricReport r = evaluate(refs, refs, Task::kSummarization);
  EXPECT_DOUBLE_EQ(r.corpus_bleu, 100.0);
  EXPECT_DOUBLE_EQ(r.exact_match_rate, 1.0);
  EXPECT_FALSE(r.corpus_codebleu.has_value());
}

TEST(EvaluateTest, EmptyPredictions) {
  const std::vector<Words> refs{w("set a to 1"), w("return b")};
  const std::vector<Words> preds(2);
  const MetricReport r = evaluate(preds, refs, Task::kSummarization);
  EXPECT_EQ(r.corpus_bleu, 0.0);
  EXPECT_EQ(r.exact_match_rate, 0.0);
}

TEST(EvaluateTest, MeanOfSentenceScores) {
  const std::vector<Words> refs{w("set a to 1"), w("return b")};
  const std::vector<Words> preds{w("set a to 1"), w("x y")};
  const MetricReport r = evaluate(preds, refs, Task::kSummarization);
  EXPECT_DOUBLE_EQ(r.corpus_bleu, 50.0);
  EXPECT_DOUBLE_EQ(r.exact_match_rate, 0.5);
  ASSERT_EQ(r.per_sentence.size(), 2u);
  EXPECT_TRUE(r.per_sentence[0].exact);
}

TEST(EvaluateTest, GenerationReportsCodeBleu) {
  const std::vector<Words> refs{w("a = 1 ; return a ;")};
  const MetricReport r = evaluate(refs, refs, Task::kGeneration);
  ASSERT_TRUE(r.corpus_codebleu.has_value());
  EXPECT_DOUBLE_EQ(*r.corpus_codebleu, 100.0);
  const auto j = r.to_json();
  EXPECT_TRUE(j.contains("bleu"));
  EXPECT_TRUE(j.contains("em"));
  EXPECT_TRUE(j["components"].contains("dataflow_match"));
}

TEST(EvaluateTest, LengthMismatchNamesBothCounts) {
  const std::vector<Words> refs{w("a"), w("b"), w("c")};
  const std::vector<Words> preds{w("a"), w("b")};
  try {
    evaluate(preds, refs, Task::kSummarization);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_EQ(std::string(e.what()), "prediction count 2 does not match reference count 3");
  }
}

}  // namespace
}  // namespace selfdistill
