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

#include "selfdistill/model.h"

#include <cmath>

#include "selfdistill/error.h"

namespace selfdistill {

std::vector<double> SequenceModel::next_token_logprobs(const TokenSequence& source,
                                                       const TokenSequence& prefix) const {
  if (prefix.empty() || prefix.front() != kBos) {
    throw ContractError("next_token_logprobs: prefix must begin with BOS");
  }
  for (TokenId t : source) {
    if (t < 0 || static_cast<std::size_t>(t) >= vocab_size()) {
      throw DataError("next_token_logprobs: source id " + std::to_string(t) +
                      " outside the vocabulary");
    }
  }
  auto cursor = start(source);
  for (std::size_t i = 1; i < prefix.size(); ++i) {
    if (prefix[i] < 0 || static_cast<std::size_t>(prefix[i]) >= vocab_size()) {
      throw DataError("next_token_logprobs: prefix id " + std::to_string(prefix[i]) +
                      " outside the vocabulary");
    }
    cursor = cursor->extend(prefix[i]);
  }
  return cursor->logprobs();
}

void check_vocab(const SequenceModel& model, const Vocab& vocab) {
  if (model.vocab_size() != vocab.size()) {
    throw DataError("vocabulary mismatch: model has " + std::to_string(model.vocab_size()) +
                    " entries, vocabulary has " + std::to_string(vocab.size()));
  }
  const auto digest = model.vocab_digest();
  if (!digest.empty() && digest != vocab.digest()) {
    throw DataError("vocabulary mismatch: model bound to digest " + std::string(digest) +
                    ", vocabulary digest is " + vocab.digest());
  }
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> logs(const std::vector<double>& p) {
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = std::log(p[i]);
  return out;
}

class TabularCursor final : public DecoderCursor {
 public:
  TabularCursor(const TabularModel* model, std::shared_ptr<const TokenSequence> source,
                TokenSequence prefix)
      : model_(model), source_(std::move(source)), prefix_(std::move(prefix)),
        logprobs_(&model_->logprobs(*source_, prefix_)) {}

  const std::vector<double>& logprobs() const override { return *logprobs_; }

  std::unique_ptr<DecoderCursor> extend(TokenId token) const override {
    TokenSequence next = prefix_;
    next.push_back(token);
    return std::make_unique<TabularCursor>(model_, source_, std::move(next));
  }

 private:
  const TabularModel* model_;
  std::shared_ptr<const TokenSequence> source_;
  TokenSequence prefix_;
  const std::vector<double>* logprobs_;
};

}  // namespace

TabularModel::TabularModel(std::size_t vocab_size, std::vector<double> default_probs)
    : vocab_size_(vocab_size) {
  default_probs_ = checked(std::move(default_probs));
  default_logprobs_ = logs(default_probs_);
}

TabularModel::TabularModel(std::size_t vocab_size)
    : TabularModel(vocab_size,
                   std::vector<double>(vocab_size, 1.0 / static_cast<double>(vocab_size))) {}

std::vector<double> TabularModel::checked(std::vector<double> probs) const {
  if (probs.size() != vocab_size_) {
    throw DataError("tabular model: distribution has " + std::to_string(probs.size()) +
                    " entries, expected " + std::to_string(vocab_size_));
  }
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw DataError("tabular model: negative probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw DataError("tabular model: probabilities sum to " + std::to_string(sum));
  }
  return probs;
}

void TabularModel::set(const TokenSequence& source, const TokenSequence& prefix,
                       std::vector<double> probs) {
  if (prefix.empty() || prefix.front() != kBos) {
    throw ContractError("tabular model: prefix must begin with BOS");
  }
  auto p = checked(std::move(probs));
  Key key{source, prefix};
  logprobs_[key] = logs(p);
  probs_[key] = std::move(p);
}

const std::vector<double>& TabularModel::probs(const TokenSequence& source,
                                               const TokenSequence& prefix) const {
  auto it = probs_.find(Key{source, prefix});
  return it == probs_.end() ? default_probs_ : it->second;
}

const std::vector<double>& TabularModel::logprobs(const TokenSequence& source,
                                                  const TokenSequence& prefix) const {
  auto it = logprobs_.find(Key{source, prefix});
  return it == logprobs_.end() ? default_logprobs_ : it->second;
}

std::unique_ptr<DecoderCursor> TabularModel::start(const TokenSequence& source) const {
  return std::make_unique<TabularCursor>(this, std::make_shared<const TokenSequence>(source),
                                         TokenSequence{kBos});
}

}  // namespace selfdistill
