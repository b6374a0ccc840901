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

#include "selfdistill/corpus.h"

#include <algorithm>
#include <map>
#include <utility>

#include "json.hpp"
#include "selfdistill/error.h"
#include "selfdistill/util/digest.h"

namespace selfdistill {

std::string_view to_string(Task task) {
  return task == Task::kSummarization ? "summarization" : "generation";
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "train";
}

Task parse_task(std::string_view name) {
  if (name == "summarization") return Task::kSummarization;
  if (name == "generation") return Task::kGeneration;
  throw ConfigError("unknown task '" + std::string(name) +
                    "' (expected summarization or generation)");
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "dev") return Split::kDev;
  if (name == "test") return Split::kTest;
  throw ConfigError("unknown split '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Vocab

Vocab::Vocab() {
  assign({kReservedTokens[0], kReservedTokens[1], kReservedTokens[2],
          kReservedTokens[3]});
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  Vocab v;
  v.assign(std::move(tokens));
  return v;
}

void Vocab::assign(std::vector<std::string> tokens) {
  if (tokens.size() < kNumReserved) {
    throw DataError("vocab: fewer entries than reserved tokens");
  }
  for (std::size_t i = 0; i < kNumReserved; ++i) {
    if (tokens[i] != kReservedTokens[i]) {
      throw DataError("vocab: position " + std::to_string(i) + " must be '" +
                      kReservedTokens[i] + "', found '" + tokens[i] + "'");
    }
  }
  Vocab& v = *this;
  v.id_to_token_ = std::move(tokens);
  v.token_to_id_.clear();
  v.token_to_id_.reserve(v.id_to_token_.size());
  std::string joined;
  for (std::size_t i = 0; i < v.id_to_token_.size(); ++i) {
    const std::string& t = v.id_to_token_[i];
    if (t.empty()) throw DataError("vocab: empty token at id " + std::to_string(i));
    if (!v.token_to_id_.emplace(t, static_cast<TokenId>(i)).second) {
      throw DataError("vocab: duplicate token '" + t + "'");
    }
    joined += t;
    joined += '\n';
  }
  v.digest_ = sha256_hex(joined);
}

TokenId Vocab::id(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnk : it->second;
}

bool Vocab::contains(std::string_view token) const {
  return token_to_id_.count(std::string(token)) != 0;
}

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
    throw DataError("vocab: id " + std::to_string(id) + " out of range [0, " +
                    std::to_string(id_to_token_.size()) + ")");
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

TokenSequence Vocab::encode(std::span<const std::string> tokens) const {
  TokenSequence ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

std::vector<std::string> Vocab::decode(std::span<const TokenId> ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (TokenId i : ids) out.push_back(token(i));
  return out;
}

void Vocab::save(const std::filesystem::path& path) const {
  nlohmann::json j;
  j["tokens"] = id_to_token_;
  write_file(path, j.dump() + "\n");
}

Vocab Vocab::load(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("vocab '" + path.string() + "': " + e.what());
  }
  if (!j.is_object() || !j.contains("tokens") || !j["tokens"].is_array()) {
    throw DataError("vocab '" + path.string() + "': expected {\"tokens\": [...]}");
  }
  std::vector<std::string> tokens;
  for (const auto& t : j["tokens"]) {
    if (!t.is_string()) throw DataError("vocab '" + path.string() + "': non-string token");
    tokens.push_back(t.get<std::string>());
  }
  return from_tokens(std::move(tokens));
}

// ---------------------------------------------------------------------------
// Text handling

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  auto is_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
  };
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

TextDataset parse_jsonl(std::string_view contents, Task task, Split split) {
  TextDataset data{task, split, {}};
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < contents.size()) {
    std::size_t end = contents.find('\n', pos);
    if (end == std::string_view::npos) end = contents.size();
    std::string_view line = contents.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const std::string where = "line " + std::to_string(line_no) + ": ";
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      throw DataError(where + "malformed JSON");
    }
    if (!obj.is_object()) throw DataError(where + "expected a JSON object");
    std::string fields[2];
    const char* names[2] = {"src", "tgt"};
    for (int f = 0; f < 2; ++f) {
      auto it = obj.find(names[f]);
      if (it == obj.end()) {
        throw DataError(where + "missing field '" + names[f] + "'");
      }
      if (!it->is_string()) {
        throw DataError(where + "field '" + names[f] + "' must be a string");
      }
      fields[f] = it->get<std::string>();
    }
    data.pairs.push_back({split_whitespace(fields[0]), split_whitespace(fields[1])});
  }
  return data;
}

TextDataset read_jsonl(const std::filesystem::path& path, Task task,
                       Split split) {
  const std::string contents = read_file(path);
  try {
    return parse_jsonl(contents, task, split);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

Dataset encode(const TextDataset& text, const Vocab& vocab) {
  Dataset d;
  d.task = text.task;
  d.split = text.split;
  d.examples.reserve(text.pairs.size());
  for (std::size_t i = 0; i < text.pairs.size(); ++i) {
    d.examples.push_back(
        {i, vocab.encode(text.pairs[i].source), vocab.encode(text.pairs[i].target)});
  }
  return d;
}

TextDataset decode(const Dataset& data, const Vocab& vocab) {
  TextDataset t{data.task, data.split, {}};
  t.pairs.reserve(data.size());
  for (const auto& ex : data.examples) {
    t.pairs.push_back({vocab.decode(ex.source), vocab.decode(ex.target)});
  }
  return t;
}

Dataset load_jsonl(const std::filesystem::path& path, Task task, Split split,
                   const Vocab& vocab) {
  return encode(read_jsonl(path, task, split), vocab);
}

std::string to_jsonl(const TextDataset& data) {
  std::string out;
  for (const auto& p : data.pairs) {
    nlohmann::json j;
    j["src"] = join_tokens(p.source);
    j["tgt"] = join_tokens(p.target);
    out += j.dump();
    out += '\n';
  }
  return out;
}

void save_jsonl(const TextDataset& data, const std::filesystem::path& path) {
  write_file(path, to_jsonl(data));
}

void save_jsonl(const Dataset& data, const Vocab& vocab,
                const std::filesystem::path& path) {
  save_jsonl(decode(data, vocab), path);
}

Vocab build_vocab(std::span<const TextDataset> datasets, std::size_t max_size) {
  if (max_size < kNumReserved + 1) {
    throw ConfigError("build_vocab: max_size must be at least " +
                      std::to_string(kNumReserved + 1) + ", got " +
                      std::to_string(max_size));
  }
  std::map<std::string, std::size_t> counts;
  auto count = [&](const std::vector<std::string>& seq) {
    for (const auto& t : seq) ++counts[t];
  };
  for (const auto& d : datasets) {
    for (const auto& p : d.pairs) {
      count(p.source);
      count(p.target);
    }
  }
  for (const char* r : Vocab::kReservedTokens) counts.erase(r);

  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second > b.second;  // map order already lexicographic
  });
  std::vector<std::string> tokens(std::begin(Vocab::kReservedTokens),
                                  std::end(Vocab::kReservedTokens));
  for (const auto& [tok, n] : ranked) {
    if (tokens.size() >= max_size) break;
    tokens.push_back(tok);
  }
  return Vocab::from_tokens(std::move(tokens));
}

}  // namespace selfdistill
