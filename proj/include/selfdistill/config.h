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

#ifndef SELFDISTILL_CONFIG_H_
#define SELFDISTILL_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "selfdistill/metrics.h"
#include "selfdistill/selfimprove.h"
#include "selfdistill/synth.h"
#include "selfdistill/trainer.h"

namespace selfdistill {

// Flat `key = value` settings. Every key has a default; unknown keys and
// malformed values raise ConfigError. Values are stored in canonical form so
// that parse(to_string()) reproduces the same Config.
class Config {
 public:
  enum class Kind { kInt, kReal, kOptionalReal, kBool, kString, kTask, kBeams };

  struct KeySpec {
    std::string_view key;
    Kind kind;
    std::string_view default_value;
    std::string_view help;
  };

  static const std::vector<KeySpec>& schema();

  Config();

  // `text` uses '#' comments; a later duplicate key is an error.
  static Config parse(std::string_view text);
  static Config load(const std::filesystem::path& path);

  // "key=value" as given on the command line.
  void set_assignment(std::string_view assignment);
  void set(std::string_view key, std::string_view value);
  const std::string& get(std::string_view key) const;

  std::int64_t get_int(std::string_view key) const;
  double get_real(std::string_view key) const;
  bool get_bool(std::string_view key) const;
  Task get_task(std::string_view key) const;
  std::vector<std::size_t> get_beams(std::string_view key) const;

  // Every key in schema order, `key = value` per line.
  std::string to_string() const;
  nlohmann::json to_json() const;

  std::uint64_t seed() const;
  Task task() const { return get_task("task"); }

  // Components; seeds come from named sub-seeds of `seed`.
  SynthConfig synth_config() const;
  TrainConfig train_config() const;
  PseudoGenConfig pseudo_config() const;
  ImproveOptions improve_options() const;
  CodeBleuWeights codebleu_weights() const;
  PipelineConfig pipeline_config() const;

  friend bool operator==(const Config&, const Config&) = default;

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

}  // namespace selfdistill

#endif  // SELFDISTILL_CONFIG_H_
