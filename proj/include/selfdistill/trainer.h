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

#ifndef SELFDISTILL_TRAINER_H_
#define SELFDISTILL_TRAINER_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "selfdistill/corpus.h"
#include "selfdistill/decode.h"
#include "selfdistill/error.h"
#include "selfdistill/seq2seq.h"

namespace selfdistill {

struct TrainConfig {
  double learning_rate = 1e-2;
  int epochs = 30;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  double grad_clip = 1.0;        // global L2 norm
  int early_stop_patience = 5;   // epochs without dev-BLEU improvement
  std::size_t max_len = kDefaultMaxLen;  // greedy decoding length on dev

  void validate() const;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-8;

class TrainingError : public DataError {
 public:
  TrainingError(std::uint64_t step, std::size_t batch, const std::string& what);
  std::uint64_t step() const { return step_; }
  std::size_t batch() const { return batch_; }

 private:
  std::uint64_t step_;
  std::size_t batch_;
};

// pretrained + original data -> fine_tuned; fine_tuned + pseudo data ->
// improved. Anything else is a ContractError.
Stage next_stage(Stage current, Origin data);

struct EpochReport {
  int epoch = 0;  // 0 is the untouched input
  double train_loss = 0.0;
  double dev_bleu = 0.0;
  bool improved = false;
};
using EpochCallback = std::function<void(const EpochReport&)>;

// Mean sentence BLEU x100 of greedy decodes against dev targets.
double dev_bleu(const SequenceModel& model, const Dataset& dev, std::size_t max_len);

// Adam with bias correction and global-norm clipping over seeded shuffled
// mini-batches. Dev BLEU is measured before training (epoch 0) and after
// every epoch; the best snapshot is returned and training stops after
// early_stop_patience epochs without improvement.
Checkpoint train(const Checkpoint& init, const Dataset& train, const Dataset& dev,
                 const TrainConfig& cfg, const EpochCallback& on_epoch = {});

// f(params, gradient-or-null) -> value.
using Objective = std::function<double(std::span<const double>, std::vector<double>*)>;

// Max over `coords` seeded-random coordinates of
// |g_analytic - g_numeric| / max(|g_analytic|, |g_numeric|, 1e-8), where
// g_numeric is the central difference with step eps.
double gradient_check(const Objective& f, std::span<const double> at, std::size_t coords,
                      double eps, std::uint64_t seed = 0);
double gradient_check(const Checkpoint& checkpoint, std::span<const ExamplePair> batch,
                      std::size_t coords, double eps, std::uint64_t seed = 0);

}  // namespace selfdistill

#endif  // SELFDISTILL_TRAINER_H_
