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

#include <filesystem>
#include <random>

#include "json.hpp"
#include "oracles.h"
#include "selfdistill/error.h"
#include "selfdistill/selfimprove.h"
#include "selfdistill/synth.h"
#include "selfdistill/util/digest.h"

namespace selfdistill {
namespace {

namespace fs = std::filesystem;

PseudoGenConfig pseudo_cfg(std::size_t k, std::size_t max_len, std::size_t workers = 1) {
  PseudoGenConfig c;
  c.beam_size = k;
  c.max_len = max_len;
  c.workers = workers;
  return c;
}

TEST(PseudoTest, MatchesBruteForceOracle) {
  std::mt19937_64 rng(77);
  for (int c = 0; c < 40; ++c) {
    const oracle::PseudoCase pc = oracle::random_pseudo_case(rng, 2 + c % 3);
    const Vocab vocab = oracle::numbered_vocab(pc.vocab_size);
    const std::size_t full = oracle::pow_size(pc.vocab_size, pc.max_len);
    for (std::size_t k : {std::size_t{1}, std::size_t{3}, full}) {
      const Dataset out =
          generate_pseudo_dataset(pc.model, pc.train, vocab, pseudo_cfg(k, pc.max_len));
      ASSERT_EQ(out.size(), pc.train.size());
      EXPECT_EQ(out.origin, Origin::kPseudo);
      const auto sim = similarity(Task::kSummarization);
      for (std::size_t i = 0; i < out.size(); ++i) {
        const ExamplePair& ex = pc.train.examples[i];
        EXPECT_EQ(out.examples[i].source, ex.source);
        EXPECT_EQ(out.examples[i].index, ex.index);
        EXPECT_EQ(out.examples[i].target, oracle::pseudo_target(pc.model, ex, vocab, k, pc.max_len))
            << "case " << c << " k " << k << " example " << i;
        // Membership and dominance against the list beam_search produced.
        const BeamList list = beam_search(pc.model, ex.source, k, pc.max_len);
        const auto ref = vocab.decode(ex.target);
        const double chosen = sim(vocab.decode(out.examples[i].target), ref);
        bool member = false;
        for (const auto& h : list.hypotheses) {
          const TokenSequence body = strip_eos(h.tokens);
          member = member || body == out.examples[i].target;
          EXPECT_GE(chosen, sim(vocab.decode(body), ref));
        }
        EXPECT_TRUE(member);
      }
    }
  }
}

TEST(PseudoTest, KOneIsGreedy) {
  std::mt19937_64 rng(5);
  const oracle::PseudoCase pc = oracle::random_pseudo_case(rng, 3);
  const Vocab vocab = oracle::numbered_vocab(pc.vocab_size);
  const Dataset out = generate_pseudo_dataset(pc.model, pc.train, vocab, pseudo_cfg(1, pc.max_len));
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_EQ(out.examples[i].target,
              strip_eos(greedy_decode(pc.model, pc.train.examples[i].source, pc.max_len).tokens));
  }
}

TEST(PseudoTest, ReferenceInListIsChosen) {
  // The reference A A is the second hypothesis of the width-7 list.
  TabularModel m(6, {0.0, 0.0, 0.1, 0.0, 0.6, 0.3});
  const Vocab vocab = oracle::numbered_vocab(6);
  Dataset train;
  train.examples = {{0, {4}, {4, 4}}};
  const Dataset out = generate_pseudo_dataset(m, train, vocab, pseudo_cfg(7, 2));
  EXPECT_EQ(out.examples[0].target, (TokenSequence{4, 4}));
}

TEST(PseudoTest, ZeroSimilarityFallsBackToBeamOrder) {
  // No hypothesis shares a token with the reference: the top of the beam wins,
  // never the reference itself.
  TabularModel m(7, {0.0, 0.0, 0.1, 0.0, 0.6, 0.3, 0.0});
  const Vocab vocab = oracle::numbered_vocab(7);
  Dataset train;
  train.examples = {{0, {4}, {6, 6}}};
  const Dataset out = generate_pseudo_dataset(m, train, vocab, pseudo_cfg(3, 2));
  EXPECT_EQ(out.examples[0].target, strip_eos(beam_search(m, {4}, 3, 2).hypotheses[0].tokens));
}

TEST(PseudoTest, WorkerCountIsInvisible) {
  std::mt19937_64 rng(31);
  const oracle::PseudoCase pc = oracle::random_pseudo_case(rng, 4);
  const Vocab vocab = oracle::numbered_vocab(pc.vocab_size);
  const Dataset one = generate_pseudo_dataset(pc.model, pc.train, vocab, pseudo_cfg(3, pc.max_len, 1));
  const Dataset four = generate_pseudo_dataset(pc.model, pc.train, vocab, pseudo_cfg(3, pc.max_len, 4));
  EXPECT_EQ(to_jsonl(decode(one, vocab)), to_jsonl(decode(four, vocab)));
}

TEST(PseudoTest, Preconditions) {
  const TabularModel m(6);
  const Vocab vocab = oracle::numbered_vocab(6);
  Dataset empty;
  EXPECT_THROW(generate_pseudo_dataset(m, empty, vocab, pseudo_cfg(3, 2)), ContractError);
  Dataset dev;
  dev.split = Split::kDev;
  dev.examples = {{0, {4}, {4}}};
  EXPECT_THROW(generate_pseudo_dataset(m, dev, vocab, pseudo_cfg(3, 2)), ContractError);
  Dataset train;
  train.examples = {{0, {4}, {4}}};
  EXPECT_THROW(generate_pseudo_dataset(m, train, oracle::numbered_vocab(7), pseudo_cfg(3, 2)),
               DataError);
  EXPECT_THROW(generate_pseudo_dataset(m, train, vocab, pseudo_cfg(0, 2)), ConfigError);
  const Checkpoint pretrained = init_checkpoint({6, 4}, vocab.digest(), 0);
  EXPECT_THROW(generate_pseudo_dataset(pretrained, train, vocab, pseudo_cfg(3, 2)), ContractError);
}

// A small fine-tuned checkpoint on synthetic data, shared by the tests below.
struct Fixture {
  Vocab vocab;
  Dataset train, dev, test;
  Checkpoint fine_tuned;
  TrainConfig cfg;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture f;
    SynthConfig sc;
    sc.seed = 12;
    sc.max_stmts = 1;
    sc.max_expr_depth = 2;
    const SynthSplits s = synth_splits(sc, Task::kSummarization, 40, 10, 10);
    f.vocab = build_vocab(std::vector<TextDataset>{s.train}, 100);
    f.train = encode(s.train, f.vocab);
    f.dev = encode(s.dev, f.vocab);
    f.test = encode(s.test, f.vocab);
    f.cfg.epochs = 4;
    f.cfg.batch_size = 8;
    f.cfg.max_len = 16;
    f.cfg.learning_rate = 0.02;
    f.fine_tuned = train(init_checkpoint({f.vocab.size(), 12}, f.vocab.digest(), 3), f.train,
                         f.dev, f.cfg);
    return f;
  }();
  return f;
}

TEST(ImproveTest, LearningRateIsDividedByTen) {
  const Fixture& f = fixture();
  const Dataset pseudo = generate_pseudo_dataset(f.fine_tuned, f.train, f.vocab, pseudo_cfg(3, 16));
  const Checkpoint out = improve(f.fine_tuned, pseudo, f.dev, f.cfg);
  EXPECT_EQ(out.stage, Stage::kImproved);
  EXPECT_EQ(out.meta.learning_rate, f.cfg.learning_rate / 10.0);
  EXPECT_EQ(improvement_config(f.cfg, {}).learning_rate, f.cfg.learning_rate / 10.0);
}

TEST(ImproveTest, OverrideNeedsUnsafeFlag) {
  const Fixture& f = fixture();
  ImproveOptions o;
  o.learning_rate = 0.5;
  EXPECT_THROW(improvement_config(f.cfg, o), ContractError);
  o.unsafe = true;
  EXPECT_EQ(improvement_config(f.cfg, o).learning_rate, 0.5);
}

TEST(ImproveTest, StageAndOriginChecked) {
  const Fixture& f = fixture();
  Dataset pseudo = f.train;
  pseudo.origin = Origin::kPseudo;
  const Checkpoint pretrained = init_checkpoint(f.fine_tuned.dims, f.vocab.digest(), 0);
  EXPECT_THROW(improve(pretrained, pseudo, f.dev, f.cfg), ContractError);
  EXPECT_THROW(improve(f.fine_tuned, f.train, f.dev, f.cfg), ContractError);
}

TEST(ImproveTest, DegenerateCaseDoesNotRegressOnDev) {
  const Fixture& f = fixture();
  Dataset same = f.train;
  same.origin = Origin::kPseudo;
  const Checkpoint out = improve(f.fine_tuned, same, f.dev, f.cfg);
  EXPECT_GE(out.meta.best_dev_bleu, dev_bleu(Seq2SeqModel(f.fine_tuned), f.dev, f.cfg.max_len));
}

TEST(ImproveTest, EmptyPseudoTargetsAreSkipped) {
  const Fixture& f = fixture();
  Dataset pseudo = f.train;
  pseudo.origin = Origin::kPseudo;
  pseudo.examples[0].target.clear();
  EXPECT_NO_THROW(improve(f.fine_tuned, pseudo, f.dev, f.cfg));
  for (auto& ex : pseudo.examples) ex.target.clear();
  EXPECT_THROW(improve(f.fine_tuned, pseudo, f.dev, f.cfg), ContractError);
}

PipelineConfig small_pipeline() {
  const Fixture& f = fixture();
  PipelineConfig p;
  p.seed = 4;
  p.dim = 12;
  p.train = f.cfg;
  p.pseudo = pseudo_cfg(3, 16, 2);
  p.eval_beams = {1, 5, 10};
  p.eval_max_len = 16;
  return p;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("selfdistill_pipeline_" + name);
  fs::remove_all(p);
  return p;
}

TEST(PipelineTest, CompleteRunIsVerifiable) {
  const Fixture& f = fixture();
  const fs::path dir = fresh_dir("complete");
  const PipelineRun run = run_pipeline(f.train, f.dev, f.test, f.vocab, small_pipeline(), dir);
  for (const char* name :
       {"manifest.json", "vocab.json", "ckpt.fine_tuned", "ckpt.improved", "pseudo.jsonl",
        "scores.csv"}) {
    EXPECT_TRUE(fs::exists(dir / name)) << name;
  }
  EXPECT_TRUE(verify_manifest(dir).empty());
  ASSERT_EQ(run.rows.size(), 6u);
  const std::string csv = read_file(run.scores);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "stage,beam_size,bleu,em,codebleu");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);

  const auto manifest = nlohmann::json::parse(read_file(run.manifest));
  EXPECT_EQ(manifest["status"], "completed");
  EXPECT_EQ(manifest["stages"].size(), 4u);
  EXPECT_TRUE(manifest.contains("seeds"));
  EXPECT_FALSE(manifest["assumptions"].empty());

  const Checkpoint improved = Checkpoint::load(run.improved);
  EXPECT_EQ(improved.stage, Stage::kImproved);
  EXPECT_EQ(Checkpoint::load(run.fine_tuned).stage, Stage::kFineTuned);
  EXPECT_DOUBLE_EQ(improved.meta.learning_rate, f.cfg.learning_rate / 10.0);

  // The saved pseudo data stays aligned with the train sources.
  const Dataset pseudo = load_jsonl(run.pseudo, Task::kSummarization, Split::kTrain, f.vocab);
  ASSERT_EQ(pseudo.size(), f.train.size());
  for (std::size_t i = 0; i < pseudo.size(); ++i) {
    EXPECT_EQ(pseudo.examples[i].source, f.train.examples[i].source);
  }
}

TEST(PipelineTest, TamperingIsDetected) {
  const Fixture& f = fixture();
  const fs::path dir = fresh_dir("tamper");
  run_pipeline(f.train, f.dev, f.test, f.vocab, small_pipeline(), dir);
  write_file(dir / "scores.csv", "stage,beam_size,bleu,em,codebleu\n");
  const auto problems = verify_manifest(dir);
  ASSERT_EQ(problems.size(), 1u);
  EXPECT_NE(problems[0].find("scores.csv"), std::string::npos);
  fs::remove(dir / "pseudo.jsonl");
  EXPECT_EQ(verify_manifest(dir).size(), 2u);
}

TEST(PipelineTest, DeterministicArtifacts) {
  const Fixture& f = fixture();
  const fs::path a = fresh_dir("det_a"), b = fresh_dir("det_b");
  run_pipeline(f.train, f.dev, f.test, f.vocab, small_pipeline(), a);
  PipelineConfig other = small_pipeline();
  other.pseudo.workers = 1;
  run_pipeline(f.train, f.dev, f.test, f.vocab, other, b);
  for (const char* name : {"ckpt.fine_tuned", "ckpt.improved", "pseudo.jsonl", "scores.csv"}) {
    EXPECT_EQ(read_file(a / name), read_file(b / name)) << name;
  }
}

TEST(PipelineTest, FailureKeepsPartialManifest) {
  const Fixture& f = fixture();
  const fs::path dir = fresh_dir("failure");
  fs::create_directories(dir / "pseudo.jsonl");  // blocks the pseudo write
  EXPECT_THROW(run_pipeline(f.train, f.dev, f.test, f.vocab, small_pipeline(), dir), IoError);
  const auto manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
  EXPECT_EQ(manifest["status"], "failed");
  EXPECT_TRUE(manifest["files"].contains("ckpt.fine_tuned"));
  EXPECT_FALSE(manifest["files"].contains("ckpt.improved"));
  EXPECT_FALSE(manifest["error"].get<std::string>().empty());
}

TEST(PipelineTest, OverlappingSplitsRejected) {
  const Fixture& f = fixture();
  Dataset test = f.test;
  test.examples.push_back(f.train.examples[0]);
  EXPECT_THROW(run_pipeline(f.train, f.dev, test, f.vocab, small_pipeline(), fresh_dir("overlap")),
               ContractError);
}

}  // namespace
}  // namespace selfdistill
