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

#include "selfdistill/config.h"
#include "selfdistill/error.h"
#include "selfdistill/util/random.h"

namespace selfdistill {
namespace {

const std::filesystem::path kToy = std::filesystem::path(SELFDISTILL_SOURCE_DIR) / "configs/toy.cfg";

TEST(ConfigTest, DefaultsCoverSchema) {
  const Config c;
  for (const auto& spec : Config::schema()) {
    EXPECT_NO_THROW(c.get(spec.key)) << spec.key;
  }
  EXPECT_EQ(c.seed(), 0u);
  EXPECT_EQ(c.task(), Task::kSummarization);
  EXPECT_EQ(c.get_beams("eval.beams"), (std::vector<std::size_t>{1, 5, 10}));
  EXPECT_EQ(c.pseudo_config().beam_size, 10u);
}

TEST(ConfigTest, RoundTripsThroughPrintedForm) {
  Config c = Config::load(kToy);
  c.set("train.learning_rate", "0.0025");
  c.set("improve.unsafe", "true");
  c.set("improve.learning_rate", "1e-4");
  c.set("eval.beams", "10, 1");
  const Config back = Config::parse(c.to_string());
  EXPECT_EQ(back, c);
  EXPECT_EQ(back.to_string(), c.to_string());
  EXPECT_EQ(Config::parse(Config().to_string()), Config());
}

TEST(ConfigTest, CommentsAndWhitespace) {
  const Config c = Config::parse("# header\n\n  seed   =  42  # trailing\ntask=generation\n");
  EXPECT_EQ(c.seed(), 42u);
  EXPECT_EQ(c.task(), Task::kGeneration);
}

TEST(ConfigTest, RejectsBadInput) {
  EXPECT_THROW(Config::parse("no_such_key = 1\n"), ConfigError);
  EXPECT_THROW(Config::parse("seed = 1\nseed = 2\n"), ConfigError);
  EXPECT_THROW(Config::parse("seed 1\n"), ConfigError);
  EXPECT_THROW(Config::parse("seed = -1\n"), ConfigError);
  EXPECT_THROW(Config::parse("train.epochs = 2.5\n"), ConfigError);
  EXPECT_THROW(Config::parse("train.learning_rate = fast\n"), ConfigError);
  EXPECT_THROW(Config::parse("improve.unsafe = maybe\n"), ConfigError);
  EXPECT_THROW(Config::parse("task = translation\n"), ConfigError);
  EXPECT_THROW(Config::parse("eval.beams = 1,x\n"), ConfigError);
  Config c;
  EXPECT_THROW(c.set_assignment("seed"), ConfigError);
  EXPECT_THROW(c.set("bogus", "1"), ConfigError);
  EXPECT_THROW(Config::load("/nonexistent/x.cfg"), IoError);
}

TEST(ConfigTest, AssignmentsOverride) {
  Config c = Config::load(kToy);
  c.set_assignment("train.epochs=3");
  EXPECT_EQ(c.train_config().epochs, 3u);
}

TEST(ConfigTest, NamedSubSeeds) {
  Config c;
  c.set("seed", "7");
  EXPECT_EQ(c.synth_config().seed, derive_seed(7, "corpus"));
  EXPECT_EQ(c.train_config().seed, derive_seed(7, "shuffle"));
  EXPECT_NE(derive_seed(7, "corpus"), derive_seed(7, "shuffle"));
  EXPECT_NE(derive_seed(7, "init"), derive_seed(8, "init"));
  EXPECT_EQ(c.pipeline_config().seed, 7u);
}

TEST(ConfigTest, ImproveOverrideNeedsUnsafe) {
  Config c;
  c.set("improve.learning_rate", "0.5");
  EXPECT_THROW(c.improve_options(), ConfigError);
  EXPECT_THROW(c.pipeline_config(), ConfigError);
  c.set("improve.unsafe", "true");
  const ImproveOptions o = c.improve_options();
  EXPECT_TRUE(o.unsafe);
  EXPECT_EQ(o.learning_rate, 0.5);
  EXPECT_FALSE(Config().improve_options().learning_rate.has_value());
}

TEST(ConfigTest, ResolvedJsonMatchesStrings) {
  const Config c = Config::load(kToy);
  const auto j = c.to_json();
  EXPECT_EQ(j.size(), Config::schema().size());
  EXPECT_EQ(c.pipeline_config().resolved, j);
}

}  // namespace
}  // namespace selfdistill
