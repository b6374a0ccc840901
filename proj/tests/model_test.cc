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
#include <cstring>
#include <filesystem>
#include <limits>
#include <numeric>

#include "selfdistill/error.h"
#include "selfdistill/model.h"
#include "selfdistill/seq2seq.h"
#include "selfdistill/synth.h"
#include "selfdistill/trainer.h"
#include "selfdistill/util/digest.h"

namespace selfdistill {
namespace {

std::vector<ExamplePair> tiny_batch() {
  return {{0, {4, 5, 6}, {7, 4}}, {1, {9, 8}, {5, 5, 6}}, {2, {}, {4}}};
}

TEST(GradientTest, MatchesCentralDifferences) {
  const ModelDims dims{10, 3};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Checkpoint ckpt = init_checkpoint(dims, "", seed);
    EXPECT_LT(gradient_check(ckpt, tiny_batch(), 20, 1e-4, seed), 1e-4) << "seed " << seed;
  }
}

TEST(GradientTest, QuadraticHead) {
  // f(x) = sum_i c_i x_i^2 with gradient 2 c_i x_i.
  const std::vector<double> c{1.0, -2.0, 0.5, 3.0};
  Objective f = [&](std::span<const double> x, std::vector<double>* g) {
    double v = 0;
    if (g) g->assign(x.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      v += c[i] * x[i] * x[i];
      if (g) (*g)[i] = 2 * c[i] * x[i];
    }
    return v;
  };
  const std::vector<double> at{0.3, -1.2, 2.0, 0.7};
  EXPECT_LT(gradient_check(f, at, 4, 1e-4), 1e-8);
}

TEST(GradientTest, RejectsBadArguments) {
  const Checkpoint ckpt = init_checkpoint({10, 3}, "", 0);
  EXPECT_THROW(gradient_check(ckpt, tiny_batch(), 20, 0.0), ContractError);
  EXPECT_THROW(gradient_check(ckpt, tiny_batch(), 0, 1e-4), ContractError);
}

TEST(TabularModelTest, LookupReturnsStoredLogs) {
  TabularModel m(6);
  const std::vector<double> p{0.0, 0.0, 0.1, 0.2, 0.3, 0.4};
  m.set({4}, {kBos}, p);
  const auto lp = m.next_token_logprobs({4}, {kBos});
  for (std::size_t t = 0; t < p.size(); ++t) EXPECT_EQ(lp[t], std::log(p[t]));
  // Unset keys use the uniform fallback.
  EXPECT_DOUBLE_EQ(m.next_token_logprobs({5}, {kBos})[3], std::log(1.0 / 6.0));
}

TEST(TabularModelTest, RejectsInvalidDistributions) {
  TabularModel m(4);
  EXPECT_THROW(m.set({}, {kBos}, {0.5, 0.5, 0.5, 0.0}), DataError);
  EXPECT_THROW(m.set({}, {kBos}, {0.5, 0.5}), DataError);
  EXPECT_THROW(m.set({}, {kBos}, {-0.5, 0.5, 0.5, 0.5}), DataError);
  EXPECT_THROW(m.next_token_logprobs({}, {4}), ContractError);
}

TEST(CheckpointTest, ManifestCoversParams) {
  const ModelDims dims{20, 8};
  std::size_t total = 0;
  for (const auto& s : param_manifest(dims)) total += s.rows * s.cols;
  EXPECT_EQ(total, param_count(dims));
  EXPECT_EQ(init_checkpoint(dims, "x", 1).params.size(), total);
  EXPECT_EQ(param_manifest(dims).front().name, "embedding");
}

TEST(CheckpointTest, SerializeRoundTrip) {
  Checkpoint c = init_checkpoint({12, 4}, "abc", 3);
  c.stage = Stage::kFineTuned;
  c.meta = {17, 4, 2, 0.01, 55.5, 99};
  const std::string bytes = c.serialize();
  EXPECT_EQ(bytes.substr(0, 8), "SDCKPT01");
  std::uint64_t header_len = 0;
  for (int i = 7; i >= 0; --i) header_len = header_len << 8 | static_cast<unsigned char>(bytes[8 + i]);
  EXPECT_EQ(bytes.size(), 16 + header_len + 8 * c.params.size());
  double first = 0;
  std::memcpy(&first, bytes.data() + 16 + header_len, 8);
  EXPECT_EQ(first, c.params[0]);
  EXPECT_EQ(Checkpoint::deserialize(bytes), c);
}

TEST(CheckpointTest, SaveLoadKeepsPredictions) {
  const auto path = std::filesystem::temp_directory_path() / "selfdistill_ckpt_roundtrip";
  const Checkpoint c = init_checkpoint({12, 4}, "", 5);
  c.save(path);
  const Checkpoint d = Checkpoint::load(path);
  EXPECT_EQ(c, d);
  const Seq2SeqModel a(c), b(d);
  EXPECT_EQ(a.next_token_logprobs({4, 5, 6}, {kBos, 7}), b.next_token_logprobs({4, 5, 6}, {kBos, 7}));
}

TEST(CheckpointTest, CorruptBytesRejected) {
  std::string bytes = init_checkpoint({12, 4}, "", 5).serialize();
  EXPECT_THROW(Checkpoint::deserialize(bytes.substr(0, bytes.size() - 8)), DataError);
  bytes[0] = 'X';
  EXPECT_THROW(Checkpoint::deserialize(bytes), DataError);
  EXPECT_THROW(Checkpoint::deserialize(""), DataError);
}

TEST(Seq2SeqTest, DistributionsNormalizeAndAreDeterministic) {
  const Checkpoint c = init_checkpoint({15, 6}, "", 8);
  const Seq2SeqModel m(c), again(init_checkpoint({15, 6}, "", 8));
  const auto lp = m.next_token_logprobs({4, 9, 10}, {kBos, 5, 6});
  double mass = 0;
  for (double x : lp) mass += std::exp(x);
  EXPECT_NEAR(mass, 1.0, 1e-12);
  EXPECT_EQ(lp, again.next_token_logprobs({4, 9, 10}, {kBos, 5, 6}));
  // Cursor stepping matches the whole-prefix call.
  auto cur = m.start({4, 9, 10});
  cur = cur->extend(5);
  cur = cur->extend(6);
  EXPECT_EQ(cur->logprobs(), lp);
}

TEST(Seq2SeqTest, VocabBinding) {
  const Vocab v = Vocab::from_tokens({"<pad>", "<bos>", "<eos>", "<unk>", "a"});
  const Seq2SeqModel bound(init_checkpoint({5, 3}, v.digest(), 0));
  EXPECT_NO_THROW(check_vocab(bound, v));
  const Seq2SeqModel other(init_checkpoint({5, 3}, "not-this-vocab", 0));
  EXPECT_THROW(check_vocab(other, v), DataError);
}

TEST(MleLossTest, ZeroParamsGiveUniformLoss) {
  // All-zero weights make every logit 0, so each target token costs ln V.
  Checkpoint c = init_checkpoint({8, 4}, "", 0);
  std::fill(c.params.begin(), c.params.end(), 0.0);
  const std::vector<ExamplePair> batch{{0, {4, 5}, {6, 7}}, {1, {3}, {5}}};
  EXPECT_NEAR(mle_loss(c, batch).loss, std::log(8.0), 1e-12);
}

TEST(MleLossTest, EmptyTargetNamesExample) {
  const Checkpoint c = init_checkpoint({8, 4}, "", 0);
  const std::vector<ExamplePair> batch{{3, {4}, {5}}, {7, {4}, {}}};
  try {
    mle_loss(c, batch);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("example 7"), std::string::npos) << e.what();
  }
}

Dataset toy(Split split, std::size_t n, std::uint64_t seed, Vocab* vocab) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.max_stmts = 1;
  cfg.max_expr_depth = 1;
  const SynthSplits s = synth_splits(cfg, Task::kSummarization, n, n / 2 + 1, 1);
  if (vocab->size() == kNumReserved) {
    *vocab = build_vocab(std::vector<TextDataset>{s.train}, 100);
  }
  return encode(split == Split::kTrain ? s.train : s.dev, *vocab);
}

TEST(TrainTest, StageTransitions) {
  EXPECT_EQ(next_stage(Stage::kPretrained, Origin::kOriginal), Stage::kFineTuned);
  EXPECT_EQ(next_stage(Stage::kFineTuned, Origin::kPseudo), Stage::kImproved);
  EXPECT_THROW(next_stage(Stage::kPretrained, Origin::kPseudo), ContractError);
  EXPECT_THROW(next_stage(Stage::kFineTuned, Origin::kOriginal), ContractError);
  EXPECT_THROW(next_stage(Stage::kImproved, Origin::kPseudo), ContractError);
}

TEST(TrainTest, ConfigValidation) {
  TrainConfig c;
  c.learning_rate = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.epochs = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.early_stop_patience = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(TrainTest, LearnsAndIsDeterministic) {
  Vocab v;
  const Dataset tr = toy(Split::kTrain, 60, 4, &v);
  const Dataset dev = toy(Split::kDev, 60, 4, &v);
  const Checkpoint init = init_checkpoint({v.size(), 16}, v.digest(), 1);
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.batch_size = 8;
  cfg.seed = 2;
  cfg.max_len = 20;
  std::vector<double> losses;
  const Checkpoint a = train(init, tr, dev, cfg, [&](const EpochReport& r) {
    if (r.epoch > 0) losses.push_back(r.train_loss);
  });
  const Checkpoint b = train(init, tr, dev, cfg);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.stage, Stage::kFineTuned);
  EXPECT_EQ(a.meta.learning_rate, cfg.learning_rate);
  ASSERT_GE(losses.size(), 2u);
  EXPECT_LT(losses.back(), losses.front());
  EXPECT_GT(a.meta.best_dev_bleu, dev_bleu(Seq2SeqModel(init), dev, 20));
}

TEST(TrainTest, NoImprovementReturnsInput) {
  Vocab v;
  const Dataset tr = toy(Split::kTrain, 20, 6, &v);
  const Dataset dev = toy(Split::kDev, 20, 6, &v);
  const Checkpoint init = init_checkpoint({v.size(), 8}, v.digest(), 1);
  TrainConfig cfg;
  cfg.learning_rate = 1e-12;
  cfg.epochs = 5;
  cfg.early_stop_patience = 1;
  cfg.max_len = 10;
  const Checkpoint out = train(init, tr, dev, cfg);
  EXPECT_EQ(out.params, init.params);
  EXPECT_EQ(out.meta.best_epoch, 0);
  EXPECT_EQ(out.meta.epochs_run, 1);
}

TEST(TrainTest, NonFiniteLossAbortsWithPosition) {
  Vocab v;
  const Dataset tr = toy(Split::kTrain, 20, 6, &v);
  const Dataset dev = toy(Split::kDev, 20, 6, &v);
  const Checkpoint init = init_checkpoint({v.size(), 8}, v.digest(), 1);
  TrainConfig cfg;
  cfg.learning_rate = 1e300;  // the first update overflows the weights
  cfg.batch_size = 4;
  cfg.max_len = 10;
  try {
    train(init, tr, dev, cfg);
    FAIL();
  } catch (const TrainingError& e) {
    EXPECT_GE(e.step(), 1u);
    EXPECT_NE(std::string(e.what()).find("non-finite loss"), std::string::npos);
  }
}

}  // namespace
}  // namespace selfdistill
