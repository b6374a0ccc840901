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

// selfdistill command-line driver.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "selfdistill/analysis.h"
#include "selfdistill/config.h"
#include "selfdistill/corpus.h"
#include "selfdistill/decode.h"
#include "selfdistill/error.h"
#include "selfdistill/metrics.h"
#include "selfdistill/selfimprove.h"
#include "selfdistill/seq2seq.h"
#include "selfdistill/synth.h"
#include "selfdistill/trainer.h"
#include "selfdistill/util/digest.h"
#include "selfdistill/util/parallel.h"

namespace fs = std::filesystem;
using namespace selfdistill;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kIo = 3 };

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> assignments;
  std::optional<std::int64_t> seed;
};

void add_common(CLI::App* sub, CommonOptions* common) {
  sub->add_option("-c,--config", common->config_path, "config file (key = value)");
  sub->add_option("--set", common->assignments, "override a config key, key=value")
      ->take_all();
  sub->add_option("--seed", common->seed, "shortcut for --set seed=N");
}

Config resolve(const CommonOptions& common) {
  Config cfg = common.config_path.empty() ? Config() : Config::load(common.config_path);
  for (const auto& a : common.assignments) cfg.set_assignment(a);
  if (common.seed) cfg.set("seed", std::to_string(*common.seed));
  std::cerr << "# resolved config (seed " << cfg.seed() << ")\n" << cfg.to_string();
  return cfg;
}

void log_line(const std::string& msg) { std::cerr << msg << '\n'; }

// Train/dev/test text, read from data.* paths or synthesized from the seed.
class Splits {
 public:
  explicit Splits(const Config& cfg) : cfg_(cfg) {}

  const TextDataset& get(Split split) {
    const std::string key = "data." + std::string(to_string(split));
    const std::string& path = cfg_.get(key);
    if (!path.empty()) {
      auto& slot = files_[static_cast<int>(split)];
      if (!slot) slot = read_jsonl(path, cfg_.task(), split);
      return *slot;
    }
    if (!synth_) {
      synth_ = synth_splits(cfg_.synth_config(), cfg_.task(),
                            static_cast<std::size_t>(cfg_.get_int("synth.train")),
                            static_cast<std::size_t>(cfg_.get_int("synth.dev")),
                            static_cast<std::size_t>(cfg_.get_int("synth.test")));
    }
    switch (split) {
      case Split::kTrain: return synth_->train;
      case Split::kDev: return synth_->dev;
      case Split::kTest: return synth_->test;
    }
    throw ContractError("unknown split");
  }

  Vocab build_vocab_from_train() {
    const std::vector<TextDataset> sets{get(Split::kTrain)};
    return build_vocab(sets, static_cast<std::size_t>(cfg_.get_int("vocab.max_size")));
  }

 private:
  const Config& cfg_;
  std::optional<SynthSplits> synth_;
  std::optional<TextDataset> files_[3];
};

Checkpoint load_bound_checkpoint(const std::string& path, const Vocab& vocab) {
  Checkpoint ckpt = Checkpoint::load(path);
  if (ckpt.vocab_digest != vocab.digest()) {
    throw ContractError("checkpoint " + path + " is bound to a different vocabulary");
  }
  return ckpt;
}

// Either `decode` output (JSON lines; the top hypothesis is scored) or plain
// text with one whitespace-tokenized prediction per line.
std::vector<std::vector<std::string>> read_predictions(const std::string& path) {
  const std::string text = read_file(path);
  std::vector<std::vector<std::string>> out;
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    const std::string_view line = std::string_view(text).substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.front() == '{') {
      try {
        const auto j = nlohmann::json::parse(line);
        const auto& beam = j.at("beam");
        out.push_back(beam.empty() ? std::vector<std::string>{}
                                   : beam.at(0).at("tokens").get<std::vector<std::string>>());
      } catch (const nlohmann::json::exception&) {
        throw DataError(path + ": line " + std::to_string(line_no) +
                        ": malformed decode record");
      }
    } else {
      out.push_back(split_whitespace(line));
    }
  }
  return out;
}

std::string epoch_line(const char* stage, const EpochReport& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "  %s epoch %d loss %.6f dev_bleu %.4f%s", stage, r.epoch,
                r.train_loss, r.dev_bleu, r.improved ? " *" : "");
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fine-tune, self-improve on beam-selected pseudo targets, evaluate, analyze."};
  app.require_subcommand(1);
  CommonOptions common;

  auto* synth = app.add_subcommand("synth", "write a synthetic train/dev/test corpus");
  std::string synth_out = "data";
  synth->add_option("-o,--out", synth_out, "output directory")->capture_default_str();

  auto* train_cmd = app.add_subcommand("train", "fine-tune a freshly initialized model");
  std::string train_out;
  train_cmd->add_option("-o,--out", train_out, "output directory (vocab.json, ckpt.fine_tuned)")
      ->required();

  auto* pseudo = app.add_subcommand("pseudo", "build the pseudo dataset from a fine_tuned model");
  std::string ckpt_path, vocab_path, pseudo_out;
  pseudo->add_option("--checkpoint", ckpt_path, "fine_tuned checkpoint")->required();
  pseudo->add_option("--vocab", vocab_path, "vocab.json")->required();
  pseudo->add_option("-o,--out", pseudo_out, "pseudo JSONL")->required();

  auto* improve_cmd = app.add_subcommand("improve", "continue training on pseudo data");
  std::string pseudo_in, improve_out;
  std::optional<double> lr_override;
  bool unsafe = false;
  improve_cmd->add_option("--checkpoint", ckpt_path, "fine_tuned checkpoint")->required();
  improve_cmd->add_option("--vocab", vocab_path, "vocab.json")->required();
  improve_cmd->add_option("--pseudo", pseudo_in, "pseudo JSONL")->required();
  improve_cmd->add_option("-o,--out", improve_out, "improved checkpoint")->required();
  improve_cmd->add_option("--lr", lr_override, "learning rate override (needs --unsafe)");
  improve_cmd->add_flag("--unsafe", unsafe, "allow --lr");

  auto* decode_cmd = app.add_subcommand("decode", "beam-decode a JSONL file");
  std::string decode_in, decode_out;
  std::size_t beam = 1;
  decode_cmd->add_option("--checkpoint", ckpt_path, "checkpoint")->required();
  decode_cmd->add_option("--vocab", vocab_path, "vocab.json")->required();
  decode_cmd->add_option("-i,--input", decode_in, "JSONL with src/tgt")->required();
  decode_cmd->add_option("-k,--beam", beam, "beam size")->capture_default_str();
  decode_cmd->add_option("-o,--out", decode_out, "JSON lines: index and beam (default stdout)");

  auto* eval_cmd = app.add_subcommand("eval", "score predictions against references");
  std::string preds_path, refs_path;
  eval_cmd->add_option("-p,--predictions", preds_path, "decode output or one prediction per line")->required();
  eval_cmd->add_option("-r,--references", refs_path, "JSONL with src/tgt")->required();

  auto* pipeline = app.add_subcommand("pipeline", "fine-tune, generate pseudo data, improve, evaluate");
  std::string run_dir;
  pipeline->add_option("--run-dir", run_dir, "overrides run.dir");

  auto* analyze = app.add_subcommand("analyze", "correlation of beam gaps and improvement gains");
  std::string fixture, svg_dir;
  std::vector<std::size_t> beams;
  analyze->add_option("-f,--fixture", fixture, "score table CSV")->required();
  analyze->add_option("-k,--beam", beams, "beam sizes (default 1 5 10)");
  analyze->add_option("--svg-dir", svg_dir, "write scatter_k<k>.svg/.csv here");

  for (auto* sub : app.get_subcommands({})) add_common(sub, &common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    if (argc > 1 && argv[1][0] != '-' && app.get_subcommand_no_throw(argv[1]) == nullptr) {
      std::cerr << "unknown subcommand '" << argv[1] << "'\n";
    } else {
      std::cerr << e.what() << '\n';
    }
    std::cerr << app.help();
    return kUsage;
  }

  try {
    const Config cfg = resolve(common);
    Splits splits(cfg);

    if (synth->parsed()) {
      fs::create_directories(synth_out);
      for (Split s : {Split::kTrain, Split::kDev, Split::kTest}) {
        const fs::path p = fs::path(synth_out) / (std::string(to_string(s)) + ".jsonl");
        save_jsonl(splits.get(s), p);
        log_line("wrote " + p.string() + " (" + std::to_string(splits.get(s).size()) +
                 " examples)");
      }
    } else if (train_cmd->parsed()) {
      const Vocab vocab = splits.build_vocab_from_train();
      const Dataset tr = encode(splits.get(Split::kTrain), vocab);
      const Dataset dev = encode(splits.get(Split::kDev), vocab);
      const ModelDims dims{vocab.size(), static_cast<std::size_t>(cfg.get_int("model.dim"))};
      const Checkpoint init =
          init_checkpoint(dims, vocab.digest(), derive_seed(cfg.seed(), "init"));
      const Checkpoint out = train(init, tr, dev, cfg.train_config(), [](const EpochReport& r) {
        log_line(epoch_line("fine_tune", r));
      });
      fs::create_directories(train_out);
      vocab.save(fs::path(train_out) / "vocab.json");
      out.save(fs::path(train_out) / "ckpt.fine_tuned");
      log_line("wrote " + (fs::path(train_out) / "ckpt.fine_tuned").string());
    } else if (pseudo->parsed()) {
      const Vocab vocab = Vocab::load(vocab_path);
      const Checkpoint ckpt = load_bound_checkpoint(ckpt_path, vocab);
      const Dataset tr = encode(splits.get(Split::kTrain), vocab);
      const Dataset out = generate_pseudo_dataset(ckpt, tr, vocab, cfg.pseudo_config());
      save_jsonl(out, vocab, pseudo_out);
      log_line("wrote " + pseudo_out + " (" + std::to_string(out.size()) + " examples)");
    } else if (improve_cmd->parsed()) {
      const Vocab vocab = Vocab::load(vocab_path);
      const Checkpoint ckpt = load_bound_checkpoint(ckpt_path, vocab);
      Dataset ps = load_jsonl(pseudo_in, cfg.task(), Split::kTrain, vocab);
      ps.origin = Origin::kPseudo;
      const Dataset dev = encode(splits.get(Split::kDev), vocab);
      ImproveOptions opts = cfg.improve_options();
      if (lr_override) opts.learning_rate = lr_override;
      opts.unsafe = opts.unsafe || unsafe;
      const Checkpoint out = improve(ckpt, ps, dev, cfg.train_config(), opts,
                                     [](const EpochReport& r) { log_line(epoch_line("improve", r)); });
      out.save(improve_out);
      log_line("wrote " + improve_out + " (learning rate " +
               std::to_string(out.meta.learning_rate) + ")");
    } else if (decode_cmd->parsed()) {
      if (beam < 1) throw ConfigError("--beam must be at least 1");
      const Vocab vocab = Vocab::load(vocab_path);
      const Seq2SeqModel model(load_bound_checkpoint(ckpt_path, vocab));
      const Dataset data = load_jsonl(decode_in, cfg.task(), Split::kTest, vocab);
      const auto max_len = static_cast<std::size_t>(cfg.get_int("eval.max_len"));
      std::vector<BeamList> beams_out(data.size());
      parallel_for(data.size(), static_cast<std::size_t>(cfg.get_int("pseudo.workers")),
                   [&](std::size_t i) {
                     beams_out[i] = beam_search(model, data.examples[i].source, beam, max_len);
                   });
      std::string text;
      for (std::size_t i = 0; i < data.size(); ++i) {
        nlohmann::json hyps = nlohmann::json::array();
        for (const auto& h : beams_out[i].hypotheses) {
          hyps.push_back({{"tokens", vocab.decode(strip_eos(h.tokens))}, {"logprob", h.logprob}});
        }
        text += nlohmann::json{{"index", data.examples[i].index}, {"beam", hyps}}.dump() + "\n";
      }
      if (decode_out.empty()) {
        std::cout << text;
      } else {
        write_file(decode_out, text);
      }
    } else if (eval_cmd->parsed()) {
      const auto preds = read_predictions(preds_path);
      const TextDataset refs_text = read_jsonl(refs_path, cfg.task(), Split::kTest);
      std::vector<std::vector<std::string>> refs;
      for (const auto& p : refs_text.pairs) refs.push_back(p.target);
      const MetricReport rep = evaluate(preds, refs, cfg.task(), cfg.codebleu_weights(),
                                        cfg.get_real("metric.kw_weight"));
      std::cout << rep.to_json().dump(2) << '\n';
    } else if (pipeline->parsed()) {
      const fs::path dir = run_dir.empty() ? fs::path(cfg.get("run.dir")) : fs::path(run_dir);
      const Vocab vocab = splits.build_vocab_from_train();
      const Dataset tr = encode(splits.get(Split::kTrain), vocab);
      const Dataset dev = encode(splits.get(Split::kDev), vocab);
      const Dataset test = encode(splits.get(Split::kTest), vocab);
      const PipelineRun run = run_pipeline(tr, dev, test, vocab, cfg.pipeline_config(), dir,
                                           log_line);
      std::cout << read_file(run.scores);
      std::printf("mass_probability fine_tuned %.6f improved %.6f\n", run.mass_fine_tuned,
                  run.mass_improved);
      std::cout << "run directory: " << run.dir.string() << '\n';
    } else if (analyze->parsed()) {
      if (beams.empty()) beams = {1, 5, 10};
      const ScoreTable table = load_score_table(fixture);
      const AnalysisReport report = selfdistill::analyze(table, beams);
      std::cout << report.to_text();
      if (!svg_dir.empty()) {
        fs::create_directories(svg_dir);
        for (const auto& b : report.beams) {
          emit_scatter(b, fs::path(svg_dir) / ("scatter_k" + std::to_string(b.k) + ".svg"));
        }
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kOk;
}
