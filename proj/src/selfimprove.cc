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

#include "selfdistill/selfimprove.h"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <set>
#include <sstream>
#include <utility>

#include "selfdistill/error.h"
#include "selfdistill/util/digest.h"
#include "selfdistill/util/parallel.h"
#include "selfdistill/util/random.h"

namespace selfdistill {

namespace fs = std::filesystem;
using nlohmann::json;

void PseudoGenConfig::validate() const {
  if (beam_size < 1) throw ConfigError("pseudo beam_size must be >= 1");
  if (max_len < 1) throw ConfigError("pseudo max_len must be >= 1");
  if (workers < 1) throw ConfigError("pseudo workers must be >= 1");
  weights.validate();
  if (!(kw_weight >= 1.0)) throw ConfigError("kw_weight must be >= 1");
}

std::size_t select_pseudo_target(const BeamList& beam, std::span<const std::string> reference,
                                 const Vocab& vocab, const SimilarityFn& sim) {
  if (beam.hypotheses.empty()) throw ContractError("select_pseudo_target: empty beam");
  std::size_t best = 0;
  double best_sim = 0.0;
  for (std::size_t j = 0; j < beam.hypotheses.size(); ++j) {
    const TokenSequence body = strip_eos(beam.hypotheses[j].tokens);
    const std::vector<std::string> words = vocab.decode(body);
    const double s = sim(words, reference);
    // Strict comparison keeps the earliest entry, which already carries the
    // higher log-probability.
    if (j == 0 || s > best_sim) {
      best = j;
      best_sim = s;
    }
  }
  return best;
}

Dataset generate_pseudo_dataset(const SequenceModel& model, const Dataset& train,
                                const Vocab& vocab, const PseudoGenConfig& cfg) {
  cfg.validate();
  if (train.empty()) throw ContractError("generate_pseudo_dataset: empty train set");
  if (train.split != Split::kTrain) {
    throw ContractError("generate_pseudo_dataset: only the train split may be transformed");
  }
  check_vocab(model, vocab);
  const SimilarityFn sim = similarity(cfg.task, cfg.weights, cfg.kw_weight);

  Dataset out;
  out.task = train.task;
  out.split = Split::kTrain;
  out.origin = Origin::kPseudo;
  out.examples.resize(train.size());
  parallel_for(train.size(), cfg.workers, [&](std::size_t i) {
    const ExamplePair& ex = train.examples[i];
    const BeamList beam = beam_search(model, ex.source, cfg.beam_size, cfg.max_len);
    const std::vector<std::string> reference = vocab.decode(ex.target);
    const std::size_t pick = select_pseudo_target(beam, reference, vocab, sim);
    ExamplePair& o = out.examples[i];
    o.index = ex.index;
    o.source = ex.source;
    o.target = strip_eos(beam.hypotheses[pick].tokens);
  });
  return out;
}

Dataset generate_pseudo_dataset(const Checkpoint& fine_tuned, const Dataset& train,
                                const Vocab& vocab, const PseudoGenConfig& cfg) {
  if (fine_tuned.stage != Stage::kFineTuned) {
    throw ContractError("generate_pseudo_dataset: checkpoint stage is " +
                        std::string(to_string(fine_tuned.stage)) + ", expected fine_tuned");
  }
  const Seq2SeqModel model(fine_tuned);
  return generate_pseudo_dataset(model, train, vocab, cfg);
}

TrainConfig improvement_config(const TrainConfig& base, const ImproveOptions& options) {
  TrainConfig cfg = base;
  if (options.learning_rate) {
    if (!options.unsafe) {
      throw ContractError(
          "improve: overriding the learning rate requires the unsafe flag");
    }
    cfg.learning_rate = *options.learning_rate;
  } else {
    cfg.learning_rate = base.learning_rate / kImproveLearningRateDivisor;
  }
  cfg.validate();
  return cfg;
}

Checkpoint improve(const Checkpoint& fine_tuned, const Dataset& pseudo, const Dataset& dev,
                   const TrainConfig& base_cfg, const ImproveOptions& options,
                   const EpochCallback& on_epoch) {
  if (fine_tuned.stage != Stage::kFineTuned) {
    throw ContractError("improve: checkpoint stage is " +
                        std::string(to_string(fine_tuned.stage)) + ", expected fine_tuned");
  }
  if (pseudo.origin != Origin::kPseudo) {
    throw ContractError("improve: training data is not a pseudo dataset");
  }
  const TrainConfig cfg = improvement_config(base_cfg, options);
  // A bare-EOS selection leaves an empty target, which carries no token loss.
  Dataset usable = pseudo;
  std::erase_if(usable.examples, [](const ExamplePair& ex) { return ex.target.empty(); });
  if (usable.empty()) throw ContractError("improve: every pseudo target is empty");
  return train(fine_tuned, usable, dev, cfg, on_epoch);
}

// ---------------------------------------------------------------------------

namespace {

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json train_config_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"epochs", c.epochs},
          {"batch_size", c.batch_size},       {"seed", c.seed},
          {"grad_clip", c.grad_clip},         {"early_stop_patience", c.early_stop_patience},
          {"max_len", c.max_len}};
}

json meta_json(const TrainMeta& m) {
  return {{"steps", m.steps},
          {"epochs_run", m.epochs_run},
          {"best_epoch", m.best_epoch},
          {"learning_rate", m.learning_rate},
          {"best_dev_bleu", m.best_dev_bleu},
          {"seed", m.seed}};
}

std::string dataset_digest(const Dataset& d, const Vocab& vocab) {
  return sha256_hex(to_jsonl(decode(d, vocab)));
}

void check_splits(const Dataset& train, const Dataset& dev, const Dataset& test) {
  if (train.empty()) throw ContractError("pipeline: empty train set");
  if (dev.empty()) throw ContractError("pipeline: empty dev set");
  if (test.empty()) throw ContractError("pipeline: empty test set");
  for (const Dataset* d : {&train, &dev, &test}) {
    if (d->origin != Origin::kOriginal) {
      throw ContractError("pipeline: inputs must be original data");
    }
  }
  if (train.task != dev.task || train.task != test.task) {
    throw ContractError("pipeline: splits disagree on the task");
  }
  std::set<TokenSequence> seen;
  for (const auto& ex : train.examples) seen.insert(ex.source);
  auto check = [&](const Dataset& d, const char* name) {
    for (const auto& ex : d.examples) {
      if (seen.count(ex.source)) {
        throw ContractError(std::string("pipeline: ") + name + " example " +
                            std::to_string(ex.index) + " shares its source with train");
      }
    }
  };
  check(dev, "dev");
  check(test, "test");
}

class Manifest {
 public:
  explicit Manifest(fs::path dir) : dir_(std::move(dir)) {}

  json& doc() { return doc_; }

  void add_file(const std::string& name) {
    doc_["files"][name] = sha256_file(dir_ / name);
  }

  void stage_done(const std::string& name, json detail = json::object()) {
    detail["name"] = name;
    detail["finished_at"] = utc_now();
    doc_["stages"].push_back(std::move(detail));
  }

  void write() const { write_file(dir_ / "manifest.json", doc_.dump(2) + "\n"); }

 private:
  fs::path dir_;
  json doc_;
};

}  // namespace

std::string scores_csv(std::span<const ScoreRow> rows) {
  std::ostringstream os;
  os << "stage,beam_size,bleu,em,codebleu\n";
  for (const auto& r : rows) {
    os << to_string(r.stage) << ',' << r.beam_size << ',' << format_real(r.bleu) << ','
       << format_real(r.em) << ',' << (r.codebleu ? format_real(*r.codebleu) : "") << '\n';
  }
  return os.str();
}

PipelineRun run_pipeline(const Dataset& train_set, const Dataset& dev, const Dataset& test,
                         const Vocab& vocab, const PipelineConfig& cfg,
                         const fs::path& run_dir, const Logger& log) {
  cfg.train.validate();
  cfg.pseudo.validate();
  if (cfg.dim < 1) throw ConfigError("dim must be >= 1");
  if (cfg.eval_beams.empty()) throw ConfigError("eval_beams must not be empty");
  for (std::size_t b : cfg.eval_beams) {
    if (b < 1) throw ConfigError("eval beam sizes must be >= 1");
  }
  check_splits(train_set, dev, test);
  auto say = [&](const std::string& msg) {
    if (log) log(msg);
  };

  std::error_code ec;
  fs::create_directories(run_dir, ec);
  if (ec) throw IoError("cannot create run directory " + run_dir.string() + ": " + ec.message());

  PipelineRun run;
  run.dir = run_dir;
  run.manifest = run_dir / "manifest.json";
  run.fine_tuned = run_dir / "ckpt.fine_tuned";
  run.improved = run_dir / "ckpt.improved";
  run.pseudo = run_dir / "pseudo.jsonl";
  run.scores = run_dir / "scores.csv";

  const std::uint64_t init_seed = derive_seed(cfg.seed, "init");
  TrainConfig train_cfg = cfg.train;
  train_cfg.seed = derive_seed(cfg.seed, "shuffle");
  const TrainConfig improve_cfg = improvement_config(train_cfg, cfg.improve);

  Manifest manifest(run_dir);
  json& m = manifest.doc();
  m["format_version"] = 1;
  m["status"] = "running";
  m["started_at"] = utc_now();
  m["config"] = cfg.resolved.is_null() ? json::object() : cfg.resolved;
  m["seeds"] = {{"seed", cfg.seed}, {"init", init_seed}, {"shuffle", train_cfg.seed}};
  m["train_config"] = {{"fine_tune", train_config_json(train_cfg)},
                       {"improve", train_config_json(improve_cfg)}};
  m["pseudo_config"] = {{"beam_size", cfg.pseudo.beam_size},
                        {"max_len", cfg.pseudo.max_len},
                        {"task", to_string(cfg.pseudo.task)},
                        {"workers", cfg.pseudo.workers},
                        {"kw_weight", cfg.pseudo.kw_weight}};
  m["eval_beams"] = cfg.eval_beams;
  m["assumptions"] = json::array(
      {"one pseudo dataset, generated once at pseudo beam_size, serves every evaluation beam",
       "similarity for pseudo selection is computed on whitespace tokens",
       "generation-task similarity is the full CodeBLEU composite"});
  m["inputs"] = {{"train", {{"examples", train_set.size()},
                            {"sha256", dataset_digest(train_set, vocab)}}},
                 {"dev", {{"examples", dev.size()}, {"sha256", dataset_digest(dev, vocab)}}},
                 {"test", {{"examples", test.size()}, {"sha256", dataset_digest(test, vocab)}}}};
  m["vocab_digest"] = vocab.digest();
  m["stages"] = json::array();
  m["files"] = json::object();

  try {
    vocab.save(run_dir / "vocab.json");
    manifest.add_file("vocab.json");
    manifest.write();

    const ModelDims dims{vocab.size(), cfg.dim};
    const Checkpoint init = init_checkpoint(dims, vocab.digest(), init_seed);
    say("fine-tuning: " + std::to_string(train_set.size()) + " examples, " +
        std::to_string(param_count(dims)) + " parameters");
    const Checkpoint fine_tuned = train(init, train_set, dev, train_cfg, [&](const EpochReport& r) {
      say("  fine_tune epoch " + std::to_string(r.epoch) + " loss " + format_real(r.train_loss) +
          " dev_bleu " + format_real(r.dev_bleu));
    });
    fine_tuned.save(run.fine_tuned);
    manifest.add_file("ckpt.fine_tuned");
    manifest.stage_done("fine_tune", {{"train_meta", meta_json(fine_tuned.meta)}});
    manifest.write();

    say("generating pseudo data: beam " + std::to_string(cfg.pseudo.beam_size));
    const Dataset pseudo = generate_pseudo_dataset(fine_tuned, train_set, vocab, cfg.pseudo);
    save_jsonl(pseudo, vocab, run.pseudo);
    manifest.add_file("pseudo.jsonl");
    std::size_t changed = 0;
    std::size_t empty = 0;
    for (std::size_t i = 0; i < pseudo.size(); ++i) {
      if (pseudo.examples[i].target != train_set.examples[i].target) ++changed;
      if (pseudo.examples[i].target.empty()) ++empty;
    }
    manifest.stage_done("pseudo", {{"examples", pseudo.size()}, {"targets_changed", changed},
                                   {"empty_targets", empty}});
    manifest.write();

    say("improving: learning rate " + format_real(improve_cfg.learning_rate));
    const Checkpoint improved =
        improve(fine_tuned, pseudo, dev, train_cfg, cfg.improve, [&](const EpochReport& r) {
          say("  improve epoch " + std::to_string(r.epoch) + " loss " +
              format_real(r.train_loss) + " dev_bleu " + format_real(r.dev_bleu));
        });
    improved.save(run.improved);
    manifest.add_file("ckpt.improved");
    manifest.stage_done("improve", {{"train_meta", meta_json(improved.meta)}});
    manifest.write();

    const std::vector<std::pair<Stage, const Checkpoint*>> stages = {
        {Stage::kFineTuned, &fine_tuned}, {Stage::kImproved, &improved}};
    TextDataset test_text = decode(test, vocab);
    std::vector<std::vector<std::string>> refs;
    refs.reserve(test_text.size());
    for (auto& p : test_text.pairs) refs.push_back(std::move(p.target));
    json mass = json::object();
    for (const auto& [stage, ckpt] : stages) {
      const Seq2SeqModel model(*ckpt);
      for (std::size_t beam : cfg.eval_beams) {
        say("evaluating " + std::string(to_string(stage)) + " at beam " + std::to_string(beam));
        const auto preds =
            decode_dataset(model, test, beam, cfg.eval_max_len, cfg.pseudo.workers);
        std::vector<std::vector<std::string>> hyps;
        hyps.reserve(preds.size());
        for (const auto& p : preds) hyps.push_back(vocab.decode(p));
        const MetricReport rep =
            evaluate(hyps, refs, test.task, cfg.pseudo.weights, cfg.pseudo.kw_weight);
        run.rows.push_back({stage, beam, rep.corpus_bleu, rep.exact_match_rate,
                            rep.corpus_codebleu});
      }
      const double mp = avg_greedy_mass_probability(model, test, cfg.eval_max_len);
      (stage == Stage::kFineTuned ? run.mass_fine_tuned : run.mass_improved) = mp;
      mass[std::string(to_string(stage))] = mp;
    }
    write_file(run.scores, scores_csv(run.rows));
    manifest.add_file("scores.csv");
    manifest.stage_done("evaluate", {{"mass_probability", mass}});
    m["status"] = "completed";
    m["finished_at"] = utc_now();
    manifest.write();
  } catch (const std::exception& e) {
    m["status"] = "failed";
    m["error"] = e.what();
    m["finished_at"] = utc_now();
    try {
      manifest.write();
    } catch (...) {
      // The original error is more useful than the manifest failure.
    }
    throw;
  }
  return run;
}

std::vector<std::string> verify_manifest(const fs::path& run_dir) {
  std::vector<std::string> problems;
  json m;
  try {
    m = json::parse(read_file(run_dir / "manifest.json"));
  } catch (const json::exception& e) {
    return {std::string("manifest.json: ") + e.what()};
  }
  if (!m.contains("files") || !m["files"].is_object()) return {"manifest.json: no file table"};
  for (const auto& [name, digest] : m["files"].items()) {
    const fs::path p = run_dir / name;
    if (!fs::exists(p)) {
      problems.push_back(name + ": missing");
      continue;
    }
    if (sha256_file(p) != digest.get<std::string>()) problems.push_back(name + ": digest mismatch");
  }
  return problems;
}

}  // namespace selfdistill
