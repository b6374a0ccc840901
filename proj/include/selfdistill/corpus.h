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

#ifndef SELFDISTILL_CORPUS_H_
#define SELFDISTILL_CORPUS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace selfdistill {

using TokenId = std::int32_t;
using TokenSequence = std::vector<TokenId>;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr std::size_t kNumReserved = 4;

enum class Task { kSummarization, kGeneration };
enum class Split { kTrain, kDev, kTest };
// Pseudo datasets carry their origin so the trainer can enforce stage rules.
enum class Origin { kOriginal, kPseudo };

std::string_view to_string(Task task);
std::string_view to_string(Split split);
Task parse_task(std::string_view name);
Split parse_split(std::string_view name);

class Vocab {
 public:
  static constexpr const char* kReservedTokens[kNumReserved] = {
      "<pad>", "<bos>", "<eos>", "<unk>"};

  // Reserved tokens only.
  Vocab();

  // tokens[0..3] must be the reserved tokens; all entries distinct.
  static Vocab from_tokens(std::vector<std::string> tokens);

  std::size_t size() const { return id_to_token_.size(); }
  const std::vector<std::string>& tokens() const { return id_to_token_; }

  // Unknown strings map to kUnk.
  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const;

  TokenSequence encode(std::span<const std::string> tokens) const;
  std::vector<std::string> decode(std::span<const TokenId> ids) const;

  // SHA-256 over the ordered token list; binds checkpoints to a vocabulary.
  const std::string& digest() const { return digest_; }

  // {"tokens": [...]}
  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

  friend bool operator==(const Vocab& a, const Vocab& b) {
    return a.id_to_token_ == b.id_to_token_;
  }

 private:
  void assign(std::vector<std::string> tokens);

  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, TokenId> token_to_id_;
  std::string digest_;
};

struct ExamplePair {
  std::size_t index = 0;
  TokenSequence source;
  TokenSequence target;

  friend bool operator==(const ExamplePair&, const ExamplePair&) = default;
};

struct Dataset {
  Task task = Task::kSummarization;
  Split split = Split::kTrain;
  Origin origin = Origin::kOriginal;
  std::vector<ExamplePair> examples;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Whitespace-tokenized pairs before a vocabulary exists.
struct TextPair {
  std::vector<std::string> source;
  std::vector<std::string> target;

  friend bool operator==(const TextPair&, const TextPair&) = default;
};

struct TextDataset {
  Task task = Task::kSummarization;
  Split split = Split::kTrain;
  std::vector<TextPair> pairs;

  std::size_t size() const { return pairs.size(); }
  friend bool operator==(const TextDataset&, const TextDataset&) = default;
};

std::vector<std::string> split_whitespace(std::string_view text);
std::string join_tokens(std::span<const std::string> tokens);

// One {"src": ..., "tgt": ...} object per line. Errors name the 1-based line.
TextDataset read_jsonl(const std::filesystem::path& path, Task task,
                       Split split);
TextDataset parse_jsonl(std::string_view contents, Task task, Split split);

Dataset encode(const TextDataset& text, const Vocab& vocab);
TextDataset decode(const Dataset& data, const Vocab& vocab);

Dataset load_jsonl(const std::filesystem::path& path, Task task, Split split,
                   const Vocab& vocab);
void save_jsonl(const Dataset& data, const Vocab& vocab,
                const std::filesystem::path& path);
void save_jsonl(const TextDataset& data, const std::filesystem::path& path);
std::string to_jsonl(const TextDataset& data);

// Reserved ids first, then tokens by descending frequency over sources and
// targets, ties broken lexicographically. max_size counts reserved slots.
Vocab build_vocab(std::span<const TextDataset> datasets, std::size_t max_size);

}  // namespace selfdistill

#endif  // SELFDISTILL_CORPUS_H_
