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

#ifndef SELFDISTILL_SELFIMPROVE_H_
#define SELFDISTILL_SELFIMPROVE_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "selfdistill/corpus.h"
#include "selfdistill/decode.h"
#include "selfdistill/metrics.h"
#include "selfdistill/seq2seq.h"
#include "selfdistill/trainer.h"

namespace selfdistill {

struct PseudoGenConfig {
  std::size_t beam_size = 10;
  std::size_t max_len = kDefaultMaxLen;
  Task task = Task::kSummarization;  // selects sim
  std::size_t workers = 1;
  CodeBleuWeights weights;
  double kw_weight = kDefaultKeywordWeight;

  void validate() const;
};

// Index of the hypothesis maximizing sim(hypothesis, reference). Equal
// similarities go to the earlier entry, i.e. the higher log-probability and
// then BeamList order. EOS is stripped before scoring.
std::size_t select_pseudo_target(const BeamList& beam, std::span<const std::string> reference,
                                 const Vocab& vocab, const SimilarityFn& sim);

// Replaces every train target by its selected K-best hypothesis. Sources and
// indices are kept; the result is marked as pseudo data.
Dataset generate_pseudo_dataset(const SequenceModel& model, const Dataset& train,
                                const Vocab& vocab, const PseudoGenConfig& cfg);

// As above; requires a fine_tuned checkpoint bound to `vocab`.
Dataset generate_pseudo_dataset(const Checkpoint& fine_tuned, const Dataset& train,
                                const Vocab& vocab, const PseudoGenConfig& cfg);

struct ImproveOptions {
  // Replaces base_lr / 10; refused unless `unsafe` is set.
  std::optional<double> learning_rate;
  bool unsafe = false;
};

inline constexpr double kImproveLearningRateDivisor = 10.0;

// base with learning_rate divided by 10, or the unsafe override.
TrainConfig improvement_config(const TrainConfig& base, const ImproveOptions& options);

// Continues training a fine_tuned checkpoint on pseudo data; stage improved.
// Pairs whose pseudo target is empty (bare EOS picked) are left out.
Checkpoint improve(const Checkpoint& fine_tuned, const Dataset& pseudo, const Dataset& dev,
                   const TrainConfig& base_cfg, const ImproveOptions& options = {},
                   const EpochCallback& on_epoch = {});

// ---------------------------------------------------------------------------
// Three-stage pipeline.
//
// Run directory layout:
//   manifest.json    configs, seeds, timestamps, SHA-256 of every artifact
//   vocab.json
//   ckpt.fine_tuned
//   pseudo.jsonl
//   ckpt.improved
//   scores.csv       stage,beam_size,bleu,em,codebleu

struct PipelineConfig {
  std::uint64_t seed = 0;
  std::size_t dim = 32;
  TrainConfig train;
  PseudoGenConfig pseudo;
  ImproveOptions improve;
  std::vector<std::size_t> eval_beams = {1, 5, 10};
  std::size_t eval_max_len = kDefaultMaxLen;
  // Resolved user-facing configuration, copied into the manifest verbatim.
  nlohmann::json resolved;
};

struct ScoreRow {
  Stage stage = Stage::kFineTuned;
  std::size_t beam_size = 1;
  double bleu = 0.0;
  double em = 0.0;
  std::optional<double> codebleu;
};

std::string scores_csv(std::span<const ScoreRow> rows);

struct PipelineRun {
  std::filesystem::path dir;
  std::filesystem::path manifest;
  std::filesystem::path fine_tuned;
  std::filesystem::path improved;
  std::filesystem::path pseudo;
  std::filesystem::path scores;
  std::vector<ScoreRow> rows;
  double mass_fine_tuned = 0.0;  // avg greedy mass probability on test
  double mass_improved = 0.0;
};

// Progress lines for the CLI; may be empty.
using Logger = std::function<void(const std::string&)>;

// fine-tune -> pseudo data -> improve -> evaluate both checkpoints on test at
// every beam in eval_beams. The manifest is rewritten after each stage; on
// failure it records the error and the artifacts written so far.
PipelineRun run_pipeline(const Dataset& train, const Dataset& dev, const Dataset& test,
                         const Vocab& vocab, const PipelineConfig& cfg,
                         const std::filesystem::path& run_dir, const Logger& log = {});

// Recomputes every digest listed in manifest.json; returns the problems found.
std::vector<std::string> verify_manifest(const std::filesystem::path& run_dir);

}  // namespace selfdistill

#endif  // SELFDISTILL_SELFIMPROVE_H_
