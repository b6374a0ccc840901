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

#include "selfdistill/trainer.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "selfdistill/metrics.h"
#include "selfdistill/util/random.h"

namespace selfdistill {

TrainingError::TrainingError(std::uint64_t step, std::size_t batch, const std::string& what)
    : DataError("training aborted at step " + std::to_string(step) + ", batch " +
                std::to_string(batch) + ": " + what),
      step_(step),
      batch_(batch) {}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("train: learning_rate must be positive");
  }
  if (epochs < 1) throw ConfigError("train: epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be at least 1");
  if (!(grad_clip > 0.0)) throw ConfigError("train: grad_clip must be positive");
  if (early_stop_patience < 1) throw ConfigError("train: early_stop_patience must be at least 1");
  if (max_len < 1) throw ConfigError("train: max_len must be at least 1");
}

Stage next_stage(Stage current, Origin data) {
  if (current == Stage::kPretrained && data == Origin::kOriginal) return Stage::kFineTuned;
  if (current == Stage::kFineTuned && data == Origin::kPseudo) return Stage::kImproved;
  throw ContractError(std::string("train: cannot train a ") + std::string(to_string(current)) +
                      " checkpoint on " +
                      (data == Origin::kPseudo ? "pseudo" : "original") + " data");
}

double dev_bleu(const SequenceModel& model, const Dataset& dev, std::size_t max_len) {
  if (dev.empty()) throw ContractError("dev_bleu: empty dev set");
  double sum = 0.0;
  for (const auto& ex : dev.examples) {
    const TokenSequence pred = strip_eos(greedy_decode(model, ex.source, max_len).tokens);
    sum += smoothed_sentence_bleu(pred, ex.target).value;
  }
  return 100.0 * sum / static_cast<double>(dev.size());
}

namespace {

class Adam {
 public:
  explicit Adam(std::size_t n) : m_(n, 0.0), v_(n, 0.0) {}

  void step(std::vector<double>& params, const std::vector<double>& grad, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = kAdamBeta1 * m_[i] + (1.0 - kAdamBeta1) * grad[i];
      v_[i] = kAdamBeta2 * v_[i] + (1.0 - kAdamBeta2) * grad[i] * grad[i];
      const double m_hat = m_[i] / c1;
      const double v_hat = v_[i] / c2;
      params[i] -= lr * m_hat / (std::sqrt(v_hat) + kAdamEpsilon);
    }
  }

 private:
  std::vector<double> m_;
  std::vector<double> v_;
  std::uint64_t t_ = 0;
};

void clip_global_norm(std::vector<double>& g, double max_norm) {
  double sq = 0.0;
  for (double x : g) sq += x * x;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (double& x : g) x *= s;
  }
}

}  // namespace

Checkpoint train(const Checkpoint& init, const Dataset& train, const Dataset& dev,
                 const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  const Stage target_stage = next_stage(init.stage, train.origin);
  if (train.empty()) throw ContractError("train: empty training set");
  if (dev.empty()) throw ContractError("train: empty dev set");

  Checkpoint best = init;
  best.stage = target_stage;
  best.meta = TrainMeta{};
  best.meta.learning_rate = cfg.learning_rate;
  best.meta.seed = cfg.seed;

  const double initial_bleu = dev_bleu(Seq2SeqModel(init), dev, cfg.max_len);
  best.meta.best_dev_bleu = initial_bleu;
  if (on_epoch) on_epoch({0, 0.0, initial_bleu, true});

  std::vector<double> params = init.params;
  Adam adam(params.size());
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::uint64_t steps = 0;
  int stale = 0;

  std::vector<ExamplePair> batch;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(train.examples[order[i]]);
      LossAndGradient lg = mle_loss(init.dims, params, batch);
      if (!std::isfinite(lg.loss)) {
        throw TrainingError(steps, batches, "non-finite loss");
      }
      clip_global_norm(lg.gradient, cfg.grad_clip);
      adam.step(params, lg.gradient, cfg.learning_rate);
      ++steps;
      ++batches;
      loss_sum += lg.loss;
    }

    Checkpoint current = init;
    current.params = params;
    const double bleu = dev_bleu(Seq2SeqModel(std::move(current)), dev, cfg.max_len);
    const bool improved = bleu > best.meta.best_dev_bleu;
    if (improved) {
      best.params = params;
      best.meta.best_epoch = epoch;
      best.meta.best_dev_bleu = bleu;
      stale = 0;
    } else {
      ++stale;
    }
    best.meta.epochs_run = epoch;
    best.meta.steps = steps;
    if (on_epoch) on_epoch({epoch, loss_sum / static_cast<double>(batches), bleu, improved});
    if (stale >= cfg.early_stop_patience) break;
  }
  return best;
}

double gradient_check(const Objective& f, std::span<const double> at, std::size_t coords,
                      double eps, std::uint64_t seed) {
  if (coords < 1) throw ContractError("gradient_check: coords must be at least 1");
  if (!(eps > 0.0)) throw ContractError("gradient_check: eps must be positive");
  if (at.empty()) throw ContractError("gradient_check: empty parameter vector");
  std::vector<double> analytic;
  f(at, &analytic);
  if (analytic.size() != at.size()) {
    throw ContractError("gradient_check: gradient length does not match parameters");
  }
  std::vector<std::size_t> idx(at.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(derive_seed(seed, "gradient_check"));
  rng.shuffle(idx);
  idx.resize(std::min(coords, idx.size()));

  std::vector<double> x(at.begin(), at.end());
  double worst = 0.0;
  for (std::size_t i : idx) {
    const double orig = x[i];
    x[i] = orig + eps;
    const double up = f(x, nullptr);
    x[i] = orig - eps;
    const double down = f(x, nullptr);
    x[i] = orig;
    const double numeric = (up - down) / (2.0 * eps);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

double gradient_check(const Checkpoint& checkpoint, std::span<const ExamplePair> batch,
                      std::size_t coords, double eps, std::uint64_t seed) {
  const ModelDims dims = checkpoint.dims;
  Objective f = [&](std::span<const double> p, std::vector<double>* grad) {
    LossAndGradient lg = mle_loss(dims, p, batch);
    if (grad) *grad = std::move(lg.gradient);
    return lg.loss;
  };
  return gradient_check(f, checkpoint.params, coords, eps, seed);
}

}  // namespace selfdistill
