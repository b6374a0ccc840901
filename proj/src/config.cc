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

#include "selfdistill/config.h"

#include <charconv>
#include <cmath>
#include <sstream>

#include "selfdistill/error.h"
#include "selfdistill/util/digest.h"
#include "selfdistill/util/random.h"

namespace selfdistill {

namespace {

using Kind = Config::Kind;

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

bool parse_int(std::string_view s, std::int64_t* out) {
  const auto res = std::from_chars(s.data(), s.data() + s.size(), *out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && !s.empty();
}

bool parse_double(std::string_view s, double* out) {
  const auto res = std::from_chars(s.data(), s.data() + s.size(), *out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && !s.empty() &&
         std::isfinite(*out);
}

const Config::KeySpec* find_spec(std::string_view key) {
  for (const auto& s : Config::schema()) {
    if (s.key == key) return &s;
  }
  return nullptr;
}

// Canonical spelling of `value`, or ConfigError.
std::string canonical(const Config::KeySpec& spec, std::string_view value) {
  const std::string bad = "config key '" + std::string(spec.key) + "': invalid value '" +
                          std::string(value) + "'";
  switch (spec.kind) {
    case Kind::kInt: {
      std::int64_t v = 0;
      if (!parse_int(value, &v) || v < 0) {
        throw ConfigError(bad + " (expected a non-negative integer)");
      }
      return std::to_string(v);
    }
    case Kind::kOptionalReal:
      if (value.empty()) return "";
      [[fallthrough]];
    case Kind::kReal: {
      double v = 0;
      if (!parse_double(value, &v)) throw ConfigError(bad + " (expected a number)");
      return format_double(v);
    }
    case Kind::kBool:
      if (value == "true" || value == "1" || value == "yes") return "true";
      if (value == "false" || value == "0" || value == "no") return "false";
      throw ConfigError(bad + " (expected true or false)");
    case Kind::kString:
      return std::string(value);
    case Kind::kTask:
      try {
        return std::string(to_string(parse_task(value)));
      } catch (const Error&) {
        throw ConfigError(bad + " (expected summarization or generation)");
      }
    case Kind::kBeams: {
      std::string out;
      std::size_t start = 0;
      while (true) {
        const std::size_t comma = value.find(',', start);
        const std::string_view item = trim(value.substr(start, comma - start));
        std::int64_t v = 0;
        if (!parse_int(item, &v) || v < 1) {
          throw ConfigError(bad + " (expected comma-separated positive integers)");
        }
        if (!out.empty()) out += ',';
        out += std::to_string(v);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
      }
      return out;
    }
  }
  throw ConfigError(bad);
}

}  // namespace

const std::vector<Config::KeySpec>& Config::schema() {
  static const std::vector<KeySpec> kSchema = {
      {"seed", Kind::kInt, "0", "base seed; corpus, init and shuffle seeds derive from it"},
      {"task", Kind::kTask, "summarization", "summarization (code -> text) or generation"},
      {"data.train", Kind::kString, "", "train JSONL; empty means synthesize"},
      {"data.dev", Kind::kString, "", "dev JSONL; empty means synthesize"},
      {"data.test", Kind::kString, "", "test JSONL; empty means synthesize"},
      {"synth.train", Kind::kInt, "500", "synthetic train examples"},
      {"synth.dev", Kind::kInt, "100", "synthetic dev examples"},
      {"synth.test", Kind::kInt, "100", "synthetic test examples"},
      {"synth.max_stmts", Kind::kInt, "4", "statements per program"},
      {"synth.max_expr_depth", Kind::kInt, "3", "operands per expression chain"},
      {"synth.identifier_pool_size", Kind::kInt, "6", "distinct variable names"},
      {"vocab.max_size", Kind::kInt, "5000", "vocabulary cap including reserved tokens"},
      {"model.dim", Kind::kInt, "32", "embedding and hidden width"},
      {"train.learning_rate", Kind::kReal, "0.01", "fine-tuning learning rate"},
      {"train.epochs", Kind::kInt, "30", "maximum epochs"},
      {"train.batch_size", Kind::kInt, "16", "examples per step"},
      {"train.grad_clip", Kind::kReal, "1", "global gradient-norm clip"},
      {"train.early_stop_patience", Kind::kInt, "5", "epochs without dev gain"},
      {"train.max_len", Kind::kInt, "40", "greedy length for dev BLEU"},
      {"pseudo.beam_size", Kind::kInt, "10", "K for pseudo-target selection"},
      {"pseudo.max_len", Kind::kInt, "40", "beam length limit"},
      {"pseudo.workers", Kind::kInt, "1", "threads for pseudo generation and decoding"},
      {"improve.learning_rate", Kind::kOptionalReal, "", "override of train.learning_rate / 10"},
      {"improve.unsafe", Kind::kBool, "false", "permit improve.learning_rate"},
      {"eval.beams", Kind::kBeams, "1,5,10", "test beam sizes"},
      {"eval.max_len", Kind::kInt, "40", "decoding length limit"},
      {"metric.ngram_weight", Kind::kReal, "0.25", "CodeBLEU n-gram weight"},
      {"metric.weighted_ngram_weight", Kind::kReal, "0.25", "CodeBLEU keyword n-gram weight"},
      {"metric.ast_weight", Kind::kReal, "0.25", "CodeBLEU AST weight"},
      {"metric.dataflow_weight", Kind::kReal, "0.25", "CodeBLEU dataflow weight"},
      {"metric.kw_weight", Kind::kReal, "4", "keyword n-gram weight"},
      {"run.dir", Kind::kString, "runs/toy", "pipeline output directory"},
  };
  return kSchema;
}

Config::Config() {
  for (const auto& s : schema()) values_[std::string(s.key)] = std::string(s.default_value);
}

Config Config::parse(std::string_view text) {
  Config cfg;
  std::map<std::string, int, std::less<>> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    const std::string where = "config line " + std::to_string(line_no) + ": ";
    if (eq == std::string_view::npos) throw ConfigError(where + "expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    if (seen.count(key)) {
      throw ConfigError(where + "duplicate key '" + key + "' (first on line " +
                        std::to_string(seen[key]) + ")");
    }
    seen[key] = static_cast<int>(line_no);
    try {
      cfg.set(key, trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path) { return parse(read_file(path)); }

void Config::set_assignment(std::string_view assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("expected key=value, got '" + std::string(assignment) + "'");
  }
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void Config::set(std::string_view key, std::string_view value) {
  const KeySpec* spec = find_spec(key);
  if (!spec) throw ConfigError("unknown config key '" + std::string(key) + "'");
  values_[std::string(key)] = canonical(*spec, value);
}

const std::string& Config::get(std::string_view key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
  return it->second;
}

std::int64_t Config::get_int(std::string_view key) const {
  std::int64_t v = 0;
  parse_int(get(key), &v);
  return v;
}

double Config::get_real(std::string_view key) const {
  double v = 0;
  parse_double(get(key), &v);
  return v;
}

bool Config::get_bool(std::string_view key) const { return get(key) == "true"; }

Task Config::get_task(std::string_view key) const { return parse_task(get(key)); }

std::vector<std::size_t> Config::get_beams(std::string_view key) const {
  std::vector<std::size_t> out;
  const std::string& s = get(key);
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = s.find(',', start);
    std::int64_t v = 0;
    parse_int(std::string_view(s).substr(start, comma - start), &v);
    out.push_back(static_cast<std::size_t>(v));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string Config::to_string() const {
  std::ostringstream os;
  for (const auto& s : schema()) os << s.key << " = " << get(s.key) << '\n';
  return os.str();
}

nlohmann::json Config::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& s : schema()) j[std::string(s.key)] = get(s.key);
  return j;
}

std::uint64_t Config::seed() const { return static_cast<std::uint64_t>(get_int("seed")); }

namespace {

std::size_t positive(const Config& c, std::string_view key) {
  const std::int64_t v = c.get_int(key);
  if (v < 1) throw ConfigError("config key '" + std::string(key) + "' must be >= 1");
  return static_cast<std::size_t>(v);
}

}  // namespace

SynthConfig Config::synth_config() const {
  SynthConfig s;
  s.seed = derive_seed(seed(), "corpus");
  s.max_stmts = static_cast<int>(get_int("synth.max_stmts"));
  s.max_expr_depth = static_cast<int>(get_int("synth.max_expr_depth"));
  s.identifier_pool_size = static_cast<int>(get_int("synth.identifier_pool_size"));
  s.validate();
  return s;
}

TrainConfig Config::train_config() const {
  TrainConfig t;
  t.learning_rate = get_real("train.learning_rate");
  t.epochs = static_cast<int>(get_int("train.epochs"));
  t.batch_size = positive(*this, "train.batch_size");
  t.seed = derive_seed(seed(), "shuffle");
  t.grad_clip = get_real("train.grad_clip");
  t.early_stop_patience = static_cast<int>(get_int("train.early_stop_patience"));
  t.max_len = positive(*this, "train.max_len");
  t.validate();
  return t;
}

CodeBleuWeights Config::codebleu_weights() const {
  CodeBleuWeights w;
  w.ngram = get_real("metric.ngram_weight");
  w.weighted_ngram = get_real("metric.weighted_ngram_weight");
  w.ast = get_real("metric.ast_weight");
  w.dataflow = get_real("metric.dataflow_weight");
  w.validate();
  return w;
}

PseudoGenConfig Config::pseudo_config() const {
  PseudoGenConfig p;
  p.beam_size = positive(*this, "pseudo.beam_size");
  p.max_len = positive(*this, "pseudo.max_len");
  p.task = task();
  p.workers = positive(*this, "pseudo.workers");
  p.weights = codebleu_weights();
  p.kw_weight = get_real("metric.kw_weight");
  p.validate();
  return p;
}

ImproveOptions Config::improve_options() const {
  ImproveOptions o;
  if (!get("improve.learning_rate").empty()) o.learning_rate = get_real("improve.learning_rate");
  o.unsafe = get_bool("improve.unsafe");
  if (o.learning_rate && !o.unsafe) {
    throw ConfigError("improve.learning_rate requires improve.unsafe = true");
  }
  return o;
}

PipelineConfig Config::pipeline_config() const {
  PipelineConfig p;
  p.seed = seed();
  p.dim = positive(*this, "model.dim");
  p.train = train_config();
  p.pseudo = pseudo_config();
  p.improve = improve_options();
  p.eval_beams = get_beams("eval.beams");
  p.eval_max_len = positive(*this, "eval.max_len");
  p.resolved = to_json();
  return p;
}

}  // namespace selfdistill
