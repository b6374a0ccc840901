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

#include "selfdistill/metrics.h"

#include <cmath>
#include <map>
#include <tuple>
#include <unordered_map>

#include "selfdistill/error.h"
#include "selfdistill/minilang.h"

namespace selfdistill {

namespace {

constexpr int kMaxOrder = 4;

using Ngram = std::vector<TokenId>;

// Per-order weighted n-gram counts; weight(i, n) is the weight of the n-gram
// starting at token i.
std::map<Ngram, double> ngram_weights(std::span<const TokenId> seq, int n,
                                      const std::vector<double>& token_w,
                                      std::map<Ngram, double>* weight_of) {
  std::map<Ngram, double> counts;
  if (static_cast<int>(seq.size()) < n) return counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) {
    Ngram g(seq.begin() + i, seq.begin() + i + n);
    double w = 1.0;
    for (int j = 0; j < n; ++j) w = std::max(w, token_w[i + j]);
    counts[g] += 1.0;
    (*weight_of)[g] = w;
  }
  return counts;
}

// Core of both BLEU variants. Token weights are 1 except for keywords.
BleuScore weighted_bleu(std::span<const TokenId> cand, std::span<const TokenId> ref,
                        const std::vector<double>& cand_w, const std::vector<double>& ref_w) {
  if (ref.empty()) throw DataError("BLEU is undefined for an empty reference");
  BleuScore s;
  if (cand.empty()) {
    s.value = 0.0;
    s.precisions = {0.0, 0.0, 0.0, 0.0};
    s.brevity_penalty = std::exp(1.0 - static_cast<double>(ref.size()));
    return s;
  }
  double c_len = 0.0, r_len = 0.0;
  for (double w : cand_w) c_len += w;
  for (double w : ref_w) r_len += w;

  for (int n = 1; n <= kMaxOrder; ++n) {
    std::map<Ngram, double> cw, rw;
    const auto cc = ngram_weights(cand, n, cand_w, &cw);
    const auto rc = ngram_weights(ref, n, ref_w, &rw);
    double matches = 0.0, total = 0.0;
    for (const auto& [g, count] : cc) {
      const double w = cw[g];
      total += w * count;
      auto it = rc.find(g);
      if (it != rc.end()) matches += w * std::min(count, it->second);
    }
    s.precisions[n - 1] = n == 1 ? matches / total : (matches + 1.0) / (total + 1.0);
  }
  s.brevity_penalty = std::min(1.0, std::exp(1.0 - r_len / c_len));
  if (s.precisions[0] == 0.0) {
    s.value = 0.0;
  } else {
    double log_sum = 0.0;
    for (double p : s.precisions) log_sum += 0.25 * std::log(p);
    s.value = s.brevity_penalty * std::exp(log_sum);
  }
  return s;
}

// Maps two string sequences onto a shared id space.
std::pair<TokenSequence, TokenSequence> intern(std::span<const std::string> a,
                                               std::span<const std::string> b) {
  std::unordered_map<std::string, TokenId> ids;
  auto map = [&](std::span<const std::string> s) {
    TokenSequence out;
    out.reserve(s.size());
    for (const auto& t : s) {
      out.push_back(ids.emplace(t, static_cast<TokenId>(ids.size())).first->second);
    }
    return out;
  };
  auto x = map(a);
  auto y = map(b);
  return {std::move(x), std::move(y)};
}

std::optional<minilang::AstNode> try_parse(std::string_view src,
                                           std::vector<std::string>* tokens) {
  try {
    *tokens = minilang::tokenize(src);
    return minilang::parse(*tokens);
  } catch (const DataError&) {
    return std::nullopt;
  }
}

using EdgeKey = std::tuple<std::string, std::size_t, std::size_t>;

std::map<EdgeKey, std::size_t> edge_keys(const minilang::AstNode& ast,
                                         const std::vector<std::string>& tokens) {
  auto ordinal = [&](const std::string& var, std::size_t pos) {
    std::size_t k = 0;
    for (std::size_t i = 0; i < pos; ++i) k += tokens[i] == var;
    return k;
  };
  std::map<EdgeKey, std::size_t> keys;
  for (const auto& e : minilang::dataflow_edges(ast)) {
    ++keys[{e.variable, ordinal(e.variable, e.def_position),
            ordinal(e.variable, e.use_position)}];
  }
  return keys;
}

}  // namespace

BleuScore smoothed_sentence_bleu(std::span<const TokenId> candidate,
                                 std::span<const TokenId> reference) {
  return weighted_bleu(candidate, reference, std::vector<double>(candidate.size(), 1.0),
                       std::vector<double>(reference.size(), 1.0));
}

BleuScore smoothed_sentence_bleu(std::span<const std::string> candidate,
                                 std::span<const std::string> reference) {
  const auto [c, r] = intern(candidate, reference);
  return smoothed_sentence_bleu(c, r);
}

double weighted_ngram_match(std::span<const std::string> candidate,
                            std::span<const std::string> reference,
                            const std::set<std::string>& keywords, double kw_weight) {
  if (!(kw_weight >= 1.0)) throw ConfigError("kw_weight must be >= 1");
  const auto [c, r] = intern(candidate, reference);
  auto weights = [&](std::span<const std::string> s) {
    std::vector<double> w(s.size(), 1.0);
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (keywords.count(s[i])) w[i] = kw_weight;
    }
    return w;
  };
  return weighted_bleu(c, r, weights(candidate), weights(reference)).value;
}

std::optional<double> ast_match(std::string_view candidate_src,
                                std::string_view reference_src) {
  std::vector<std::string> ref_tokens, cand_tokens;
  const auto ref = try_parse(reference_src, &ref_tokens);
  if (!ref) return std::nullopt;
  const auto cand = try_parse(candidate_src, &cand_tokens);
  if (!cand) return 0.0;
  const auto rs = minilang::subtrees(*ref);
  const auto cs = minilang::subtrees(*cand);
  std::size_t total = 0, matched = 0;
  for (const auto& [s, n] : rs) {
    total += n;
    auto it = cs.find(s);
    if (it != cs.end()) matched += std::min(n, it->second);
  }
  return static_cast<double>(matched) / static_cast<double>(total);
}

std::optional<double> dataflow_match(std::string_view candidate_src,
                                     std::string_view reference_src) {
  std::vector<std::string> ref_tokens, cand_tokens;
  const auto ref = try_parse(reference_src, &ref_tokens);
  if (!ref) return std::nullopt;
  const auto rk = edge_keys(*ref, ref_tokens);
  std::size_t total = 0;
  for (const auto& [k, n] : rk) total += n;
  if (total == 0) return std::nullopt;
  const auto cand = try_parse(candidate_src, &cand_tokens);
  if (!cand) return 0.0;
  const auto ck = edge_keys(*cand, cand_tokens);
  std::size_t matched = 0;
  for (const auto& [k, n] : rk) {
    auto it = ck.find(k);
    if (it != ck.end()) matched += std::min(n, it->second);
  }
  return static_cast<double>(matched) / static_cast<double>(total);
}

void CodeBleuWeights::validate() const {
  const double w[4] = {ngram, weighted_ngram, ast, dataflow};
  double sum = 0.0;
  for (double x : w) {
    if (!(x >= 0.0)) throw ConfigError("CodeBLEU weights must be non-negative");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("CodeBLEU weights must sum to 1, got " + std::to_string(sum));
  }
}

CodeBleuScore codebleu(std::string_view candidate_src, std::string_view reference_src,
                       const CodeBleuWeights& weights, double kw_weight) {
  weights.validate();
  const auto cand = split_whitespace(candidate_src);
  const auto ref = split_whitespace(reference_src);
  const auto& kw = minilang::keywords();
  const std::set<std::string> keywords(kw.begin(), kw.end());

  CodeBleuScore s;
  s.weights = weights;
  s.ngram = smoothed_sentence_bleu(cand, ref).value;
  s.weighted_ngram = weighted_ngram_match(cand, ref, keywords, kw_weight);
  s.ast_match = ast_match(candidate_src, reference_src);
  s.dataflow_match = dataflow_match(candidate_src, reference_src);

  CodeBleuWeights eff = weights;
  if (!s.ast_match) eff.ast = 0.0;
  if (!s.dataflow_match) eff.dataflow = 0.0;
  const double mass = eff.ngram + eff.weighted_ngram + eff.ast + eff.dataflow;
  if (mass <= 0.0) {
    s.effective_weights = {0.0, 0.0, 0.0, 0.0};
    s.value = 0.0;
    return s;
  }
  eff.ngram /= mass;
  eff.weighted_ngram /= mass;
  eff.ast /= mass;
  eff.dataflow /= mass;
  s.effective_weights = eff;
  s.value = eff.ngram * s.ngram + eff.weighted_ngram * s.weighted_ngram +
            eff.ast * s.ast_match.value_or(0.0) + eff.dataflow * s.dataflow_match.value_or(0.0);
  return s;
}

SimilarityFn similarity(Task task, const CodeBleuWeights& weights, double kw_weight) {
  weights.validate();
  if (task == Task::kSummarization) {
    return [](std::span<const std::string> c, std::span<const std::string> r) {
      return smoothed_sentence_bleu(c, r).value;
    };
  }
  return [weights, kw_weight](std::span<const std::string> c,
                              std::span<const std::string> r) {
    return codebleu(join_tokens(c), join_tokens(r), weights, kw_weight).value;
  };
}

SimilarityFn similarity(std::string_view task_name) { return similarity(parse_task(task_name)); }

nlohmann::json MetricReport::to_json() const {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  nlohmann::json j;
  j["bleu"] = corpus_bleu;
  j["em"] = exact_match_rate;
  j["codebleu"] = opt(corpus_codebleu);
  nlohmann::json comp = nlohmann::json::object();
  if (corpus_codebleu) {
    comp["ngram"] = opt(mean_ngram);
    comp["weighted_ngram"] = opt(mean_weighted_ngram);
    comp["ast_match"] = opt(mean_ast_match);
    comp["dataflow_match"] = opt(mean_dataflow_match);
  }
  j["components"] = comp;
  return j;
}

MetricReport evaluate(std::span<const std::vector<std::string>> predictions,
                      std::span<const std::vector<std::string>> references, Task task,
                      const CodeBleuWeights& weights, double kw_weight) {
  if (predictions.size() != references.size()) {
    throw DataError("prediction count " + std::to_string(predictions.size()) +
                    " does not match reference count " + std::to_string(references.size()));
  }
  MetricReport report;
  report.per_sentence.reserve(predictions.size());
  const bool code = task == Task::kGeneration;
  double bleu_sum = 0.0, em_sum = 0.0, cb_sum = 0.0;
  double comp_sum[4] = {0, 0, 0, 0};
  std::size_t comp_n[4] = {0, 0, 0, 0};
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (references[i].empty()) {
      throw DataError("example " + std::to_string(i) + ": empty reference");
    }
    SentenceScore s;
    s.bleu = smoothed_sentence_bleu(predictions[i], references[i]).value;
    s.exact = exact_match<std::string>(predictions[i], references[i]);
    bleu_sum += s.bleu;
    em_sum += s.exact ? 1.0 : 0.0;
    if (code) {
      s.codebleu = codebleu(join_tokens(predictions[i]), join_tokens(references[i]), weights,
                            kw_weight);
      cb_sum += s.codebleu->value;
      const std::optional<double> parts[4] = {s.codebleu->ngram, s.codebleu->weighted_ngram,
                                              s.codebleu->ast_match,
                                              s.codebleu->dataflow_match};
      for (int c = 0; c < 4; ++c) {
        if (parts[c]) {
          comp_sum[c] += *parts[c];
          ++comp_n[c];
        }
      }
    }
    report.per_sentence.push_back(std::move(s));
  }
  const double n = static_cast<double>(predictions.size());
  if (n > 0) {
    report.corpus_bleu = 100.0 * bleu_sum / n;
    report.exact_match_rate = em_sum / n;
  }
  if (code) {
    report.corpus_codebleu = n > 0 ? 100.0 * cb_sum / n : 0.0;
    std::optional<double>* means[4] = {&report.mean_ngram, &report.mean_weighted_ngram,
                                       &report.mean_ast_match, &report.mean_dataflow_match};
    for (int c = 0; c < 4; ++c) {
      if (comp_n[c]) *means[c] = 100.0 * comp_sum[c] / static_cast<double>(comp_n[c]);
    }
  }
  return report;
}

MetricReport evaluate(std::span<const TokenSequence> predictions, const Dataset& dataset,
                      const Vocab& vocab) {
  if (predictions.size() != dataset.size()) {
    throw DataError("prediction count " + std::to_string(predictions.size()) +
                    " does not match reference count " + std::to_string(dataset.size()));
  }
  std::vector<std::vector<std::string>> preds, refs;
  preds.reserve(predictions.size());
  refs.reserve(dataset.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    preds.push_back(vocab.decode(predictions[i]));
    refs.push_back(vocab.decode(dataset.examples[i].target));
  }
  return evaluate(preds, refs, dataset.task);
}

}  // namespace selfdistill
