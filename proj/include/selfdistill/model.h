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

#ifndef SELFDISTILL_MODEL_H_
#define SELFDISTILL_MODEL_H_

#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "selfdistill/corpus.h"

namespace selfdistill {

// Incremental decoding state: the model has consumed BOS plus some prefix.
class DecoderCursor {
 public:
  virtual ~DecoderCursor() = default;

  // Log-probabilities of the next token, one entry per vocabulary id.
  virtual const std::vector<double>& logprobs() const = 0;

  // State after additionally consuming `token`.
  virtual std::unique_ptr<DecoderCursor> extend(TokenId token) const = 0;
};

// Autoregressive p(t_j | source, prefix). Implementations are immutable
// after construction; all methods are safe to call concurrently.
class SequenceModel {
 public:
  virtual ~SequenceModel() = default;

  virtual std::size_t vocab_size() const = 0;

  // Digest of the bound vocabulary, empty if the model is not bound.
  virtual std::string_view vocab_digest() const { return {}; }

  // Cursor positioned right after BOS.
  virtual std::unique_ptr<DecoderCursor> start(const TokenSequence& source) const = 0;

  // prefix must begin with BOS.
  std::vector<double> next_token_logprobs(const TokenSequence& source,
                                          const TokenSequence& prefix) const;
};

// Throws DataError when a bound model and the vocabulary disagree.
void check_vocab(const SequenceModel& model, const Vocab& vocab);

// Explicit conditional distributions keyed by (source, BOS-prefixed prefix),
// with a fallback for keys that were never set. Used as an oracle in tests.
class TabularModel final : public SequenceModel {
 public:
  TabularModel(std::size_t vocab_size, std::vector<double> default_probs);

  // Uniform fallback.
  explicit TabularModel(std::size_t vocab_size);

  // probs must be non-negative and sum to 1 within 1e-9.
  void set(const TokenSequence& source, const TokenSequence& prefix,
           std::vector<double> probs);

  const std::vector<double>& probs(const TokenSequence& source,
                                   const TokenSequence& prefix) const;
  const std::vector<double>& logprobs(const TokenSequence& source,
                                      const TokenSequence& prefix) const;

  std::size_t vocab_size() const override { return vocab_size_; }
  std::unique_ptr<DecoderCursor> start(const TokenSequence& source) const override;

 private:
  using Key = std::pair<TokenSequence, TokenSequence>;

  std::vector<double> checked(std::vector<double> probs) const;

  std::size_t vocab_size_;
  std::vector<double> default_logprobs_;
  std::map<Key, std::vector<double>> probs_;
  std::map<Key, std::vector<double>> logprobs_;
  std::vector<double> default_probs_;
};

}  // namespace selfdistill

#endif  // SELFDISTILL_MODEL_H_
