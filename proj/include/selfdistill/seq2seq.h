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

#ifndef SELFDISTILL_SEQ2SEQ_H_
#define SELFDISTILL_SEQ2SEQ_H_

// Reference encoder-decoder: token embeddings, one GRU layer on each side,
// dot-product attention from the decoder state over encoder states, a tanh
// output layer on [state; context], and an output projection tied to the
// embedding matrix. Gradients are derived by hand and checked against
// central differences in the tests.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "selfdistill/corpus.h"
#include "selfdistill/model.h"

namespace selfdistill {

enum class Stage { kPretrained, kFineTuned, kImproved };

std::string_view to_string(Stage stage);
Stage parse_stage(std::string_view name);

struct ModelDims {
  std::size_t vocab_size = 0;
  std::size_t dim = 32;  // embedding and hidden width

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

struct ParamShape {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;

  friend bool operator==(const ParamShape&, const ParamShape&) = default;
};

// Named blocks in storage order; each block is column-major.
std::vector<ParamShape> param_manifest(const ModelDims& dims);
std::size_t param_count(const ModelDims& dims);

struct TrainMeta {
  std::uint64_t steps = 0;
  int epochs_run = 0;
  int best_epoch = 0;
  double learning_rate = 0.0;  // effective rate of the last training run
  double best_dev_bleu = 0.0;
  std::uint64_t seed = 0;

  friend bool operator==(const TrainMeta&, const TrainMeta&) = default;
};

// Checkpoint file layout (all integers little-endian):
//   bytes 0..7   magic "SDCKPT01"
//   bytes 8..15  uint64 header length N
//   next N bytes UTF-8 JSON header: format_version, stage, vocab_digest,
//                dims, manifest [{name, shape: [rows, cols]}], param_count,
//                train_meta
//   remainder    param_count IEEE-754 float64 values
struct Checkpoint {
  static constexpr int kFormatVersion = 1;

  Stage stage = Stage::kPretrained;
  ModelDims dims;
  std::string vocab_digest;
  std::vector<double> params;
  TrainMeta meta;

  std::string serialize() const;
  static Checkpoint deserialize(std::string_view bytes);
  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

// Seeded random initialization, stage = pretrained.
Checkpoint init_checkpoint(const ModelDims& dims, std::string vocab_digest,
                           std::uint64_t seed);

class Seq2SeqModel final : public SequenceModel {
 public:
  explicit Seq2SeqModel(std::shared_ptr<const Checkpoint> checkpoint);
  explicit Seq2SeqModel(Checkpoint checkpoint);

  std::size_t vocab_size() const override { return checkpoint_->dims.vocab_size; }
  std::string_view vocab_digest() const override { return checkpoint_->vocab_digest; }
  std::unique_ptr<DecoderCursor> start(const TokenSequence& source) const override;

  const Checkpoint& checkpoint() const { return *checkpoint_; }

 private:
  std::shared_ptr<const Checkpoint> checkpoint_;
};

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> gradient;
};

// Mean teacher-forced negative log-likelihood per target token; every
// target is scored with a trailing EOS. Empty targets are a DataError
// naming the example index.
LossAndGradient mle_loss(const ModelDims& dims, std::span<const double> params,
                         std::span<const ExamplePair> batch);
LossAndGradient mle_loss(const Checkpoint& checkpoint, std::span<const ExamplePair> batch);

}  // namespace selfdistill

#endif  // SELFDISTILL_SEQ2SEQ_H_
