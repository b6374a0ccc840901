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

#ifndef SELFDISTILL_ANALYSIS_H_
#define SELFDISTILL_ANALYSIS_H_

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "selfdistill/seq2seq.h"

namespace selfdistill {

// Test scores keyed by (model, language, beam, stage), BLEU x100.
class ScoreTable {
 public:
  struct Key {
    std::string model;
    std::string language;
    std::size_t beam = 1;
    Stage stage = Stage::kFineTuned;
    auto tie() const { return std::tie(model, language, beam, stage); }
    friend bool operator<(const Key& a, const Key& b) { return a.tie() < b.tie(); }
    std::string describe() const;
  };

  // DataError on a duplicate key, a beam outside {1,5,10} or a pretrained stage.
  void add(Key key, double score);
  // DataError naming the key when absent.
  double at(const Key& key) const;
  double at(std::string_view model, std::string_view language, std::size_t beam,
            Stage stage) const;

  // In order of first appearance.
  const std::vector<std::string>& models() const { return models_; }
  const std::vector<std::string>& languages() const { return languages_; }
  std::size_t size() const { return cells_.size(); }

 private:
  std::map<Key, double> cells_;
  std::vector<std::string> models_;
  std::vector<std::string> languages_;
};

// CSV with header model,language,beam,stage,bleu; '#' lines are comments.
ScoreTable parse_score_table(std::string_view contents);
ScoreTable load_score_table(const std::filesystem::path& path);

// Aggregate column excluded from correlation points.
inline constexpr std::string_view kOverallLanguage = "Overall";

struct GapPoint {
  std::string model;
  std::string language;
  double r1 = 0.0;   // s(10, fine_tuned) - s(1, fine_tuned)
  double r2 = 0.0;   // s(k, improved) - s(k, fine_tuned)
};

GapPoint gap_point(const ScoreTable& table, std::string_view model, std::string_view language,
                   std::size_t k);

// One point per (model, language) except Overall, ordered by model then language.
std::vector<GapPoint> compute_r1_r2(const ScoreTable& table, std::size_t k);

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Sample Pearson coefficient. DataError "degenerate axis" on < 2 points or
// a zero-variance coordinate.
double pearson(std::span<const Point> points);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;  // 1 - SS_res / SS_tot
};

LineFit fit_and_r2(std::span<const Point> points);

struct BeamAnalysis {
  std::size_t k = 1;
  std::vector<GapPoint> points;
  double pearson_r = 0.0;
  LineFit fit;
};

struct AnalysisReport {
  std::vector<BeamAnalysis> beams;

  // One line per beam: k, n, r, R^2, slope, intercept.
  std::string to_text() const;
};

AnalysisReport analyze(const ScoreTable& table, std::span<const std::size_t> beams);

// Scatter of (r1, r2) with the least-squares line and r in the caption.
std::string scatter_svg(const BeamAnalysis& analysis);
// model,language,r1,r2
std::string scatter_csv(const BeamAnalysis& analysis);

// Writes the SVG to `svg_path` and the CSV twin next to it (.csv extension).
void emit_scatter(const BeamAnalysis& analysis, const std::filesystem::path& svg_path);

}  // namespace selfdistill

#endif  // SELFDISTILL_ANALYSIS_H_
