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

#include "selfdistill/analysis.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "selfdistill/error.h"
#include "selfdistill/util/digest.h"

namespace selfdistill {

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string ScoreTable::Key::describe() const {
  return "(" + model + ", " + language + ", beam " + std::to_string(beam) + ", " +
         std::string(to_string(stage)) + ")";
}

void ScoreTable::add(Key key, double score) {
  if (key.beam != 1 && key.beam != 5 && key.beam != 10) {
    throw DataError("score table: beam must be 1, 5 or 10 in " + key.describe());
  }
  if (key.stage == Stage::kPretrained) {
    throw DataError("score table: stage must be fine_tuned or improved in " + key.describe());
  }
  if (!std::isfinite(score)) throw DataError("score table: non-finite score at " + key.describe());
  if (cells_.count(key)) throw DataError("score table: duplicate key " + key.describe());
  if (std::find(models_.begin(), models_.end(), key.model) == models_.end()) {
    models_.push_back(key.model);
  }
  if (std::find(languages_.begin(), languages_.end(), key.language) == languages_.end()) {
    languages_.push_back(key.language);
  }
  cells_.emplace(std::move(key), score);
}

double ScoreTable::at(const Key& key) const {
  const auto it = cells_.find(key);
  if (it == cells_.end()) throw DataError("score table: missing cell " + key.describe());
  return it->second;
}

double ScoreTable::at(std::string_view model, std::string_view language, std::size_t beam,
                      Stage stage) const {
  return at(Key{std::string(model), std::string(language), beam, stage});
}

ScoreTable parse_score_table(std::string_view contents) {
  ScoreTable table;
  bool header_seen = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= contents.size()) {
    std::size_t nl = contents.find('\n', pos);
    if (nl == std::string_view::npos) nl = contents.size();
    const std::string_view line = trim(contents.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto f = split_fields(line);
    const std::string where = "score table line " + std::to_string(line_no) + ": ";
    if (!header_seen) {
      if (f.size() != 5 || f[0] != "model" || f[1] != "language" || f[2] != "beam" ||
          f[3] != "stage" || f[4] != "bleu") {
        throw DataError(where + "expected header model,language,beam,stage,bleu");
      }
      header_seen = true;
      continue;
    }
    if (f.size() != 5) throw DataError(where + "expected 5 fields");
    if (f[0].empty() || f[1].empty()) throw DataError(where + "empty model or language");
    const std::string beam_s(f[2]);
    char* end = nullptr;
    const long beam = std::strtol(beam_s.c_str(), &end, 10);
    if (beam_s.empty() || *end != '\0' || beam < 1) throw DataError(where + "bad beam");
    Stage stage;
    try {
      stage = parse_stage(f[3]);
    } catch (const Error&) {
      throw DataError(where + "bad stage '" + std::string(f[3]) + "'");
    }
    const std::string score_s(f[4]);
    const double score = std::strtod(score_s.c_str(), &end);
    if (score_s.empty() || *end != '\0') throw DataError(where + "bad score");
    try {
      table.add({std::string(f[0]), std::string(f[1]), static_cast<std::size_t>(beam), stage},
                score);
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    }
  }
  if (!header_seen) throw DataError("score table: missing header");
  return table;
}

ScoreTable load_score_table(const std::filesystem::path& path) {
  return parse_score_table(read_file(path));
}

GapPoint gap_point(const ScoreTable& table, std::string_view model, std::string_view language,
                   std::size_t k) {
  GapPoint p;
  p.model = model;
  p.language = language;
  p.r1 = table.at(model, language, 10, Stage::kFineTuned) -
         table.at(model, language, 1, Stage::kFineTuned);
  p.r2 = table.at(model, language, k, Stage::kImproved) -
         table.at(model, language, k, Stage::kFineTuned);
  return p;
}

std::vector<GapPoint> compute_r1_r2(const ScoreTable& table, std::size_t k) {
  std::vector<GapPoint> out;
  for (const auto& model : table.models()) {
    for (const auto& language : table.languages()) {
      if (language == kOverallLanguage) continue;
      out.push_back(gap_point(table, model, language, k));
    }
  }
  return out;
}

namespace {

struct Moments {
  double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
};

Moments moments(std::span<const Point> points) {
  if (points.size() < 2) throw DataError("degenerate axis: fewer than 2 points");
  Moments m;
  const double n = static_cast<double>(points.size());
  for (const auto& p : points) {
    m.mx += p.x;
    m.my += p.y;
  }
  m.mx /= n;
  m.my /= n;
  for (const auto& p : points) {
    const double dx = p.x - m.mx, dy = p.y - m.my;
    m.sxx += dx * dx;
    m.syy += dy * dy;
    m.sxy += dx * dy;
  }
  if (m.sxx == 0.0) throw DataError("degenerate axis: x has zero variance");
  if (m.syy == 0.0) throw DataError("degenerate axis: y has zero variance");
  return m;
}

}  // namespace

double pearson(std::span<const Point> points) {
  const Moments m = moments(points);
  const double r = m.sxy / std::sqrt(m.sxx * m.syy);
  return std::clamp(r, -1.0, 1.0);
}

LineFit fit_and_r2(std::span<const Point> points) {
  const Moments m = moments(points);
  LineFit fit;
  fit.slope = m.sxy / m.sxx;
  fit.intercept = m.my - fit.slope * m.mx;
  double ss_res = 0.0;
  for (const auto& p : points) {
    const double e = p.y - (fit.slope * p.x + fit.intercept);
    ss_res += e * e;
  }
  fit.r_squared = std::clamp(1.0 - ss_res / m.syy, 0.0, 1.0);
  return fit;
}

AnalysisReport analyze(const ScoreTable& table, std::span<const std::size_t> beams) {
  AnalysisReport report;
  for (std::size_t k : beams) {
    BeamAnalysis a;
    a.k = k;
    a.points = compute_r1_r2(table, k);
    std::vector<Point> xy;
    for (const auto& p : a.points) xy.push_back({p.r1, p.r2});
    a.pearson_r = pearson(xy);
    a.fit = fit_and_r2(xy);
    report.beams.push_back(std::move(a));
  }
  return report;
}

std::string AnalysisReport::to_text() const {
  std::ostringstream os;
  for (const auto& b : beams) {
    os << "k=" << b.k << " n=" << b.points.size() << " r=" << fmt("%.4f", b.pearson_r)
       << " R2=" << fmt("%.4f", b.fit.r_squared) << " slope=" << fmt("%.4f", b.fit.slope)
       << " intercept=" << fmt("%.4f", b.fit.intercept) << '\n';
  }
  return os.str();
}

std::string scatter_svg(const BeamAnalysis& a) {
  if (a.points.empty()) throw ContractError("scatter: no points");
  constexpr double kW = 480, kH = 360, kLeft = 60, kRight = 20, kTop = 20, kBottom = 70;
  double x0 = a.points[0].r1, x1 = x0, y0 = a.points[0].r2, y1 = y0;
  for (const auto& p : a.points) {
    x0 = std::min(x0, p.r1);
    x1 = std::max(x1, p.r1);
    y0 = std::min(y0, p.r2);
    y1 = std::max(y1, p.r2);
  }
  const double px = std::max(0.1 * (x1 - x0), 0.05), py = std::max(0.1 * (y1 - y0), 0.05);
  x0 -= px;
  x1 += px;
  y0 -= py;
  y1 += py;
  auto sx = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * (kW - kLeft - kRight); };
  auto sy = [&](double y) { return kH - kBottom - (y - y0) / (y1 - y0) * (kH - kTop - kBottom); };
  auto n = [](double v) { return fmt("%.2f", v); };

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
     << "\" viewBox=\"0 0 " << kW << ' ' << kH << "\">\n"
     << "<rect x=\"0\" y=\"0\" width=\"" << kW << "\" height=\"" << kH
     << "\" fill=\"white\"/>\n"
     << "<g stroke=\"black\" stroke-width=\"1\">\n"
     << "<line x1=\"" << n(kLeft) << "\" y1=\"" << n(kH - kBottom) << "\" x2=\"" << n(kW - kRight)
     << "\" y2=\"" << n(kH - kBottom) << "\"/>\n"
     << "<line x1=\"" << n(kLeft) << "\" y1=\"" << n(kTop) << "\" x2=\"" << n(kLeft)
     << "\" y2=\"" << n(kH - kBottom) << "\"/>\n"
     << "</g>\n";
  os << "<g font-family=\"sans-serif\" font-size=\"11\">\n"
     << "<text x=\"" << n(kLeft) << "\" y=\"" << n(kH - kBottom + 14) << "\">" << n(x0)
     << "</text>\n"
     << "<text x=\"" << n(kW - kRight) << "\" y=\"" << n(kH - kBottom + 14)
     << "\" text-anchor=\"end\">" << n(x1) << "</text>\n"
     << "<text x=\"" << n(kLeft - 4) << "\" y=\"" << n(kH - kBottom)
     << "\" text-anchor=\"end\">" << n(y0) << "</text>\n"
     << "<text x=\"" << n(kLeft - 4) << "\" y=\"" << n(kTop + 10) << "\" text-anchor=\"end\">"
     << n(y1) << "</text>\n"
     << "<text x=\"" << n((kW + kLeft - kRight) / 2) << "\" y=\"" << n(kH - kBottom + 30)
     << "\" text-anchor=\"middle\">r1 (beam 10 minus beam 1, fine_tuned)</text>\n"
     << "<text x=\"14\" y=\"" << n((kH - kBottom + kTop) / 2) << "\" text-anchor=\"middle\" "
     << "transform=\"rotate(-90 14 " << n((kH - kBottom + kTop) / 2) << ")\">r2 (improved minus "
     << "fine_tuned, beam " << a.k << ")</text>\n"
     << "<text x=\"" << n(kW / 2) << "\" y=\"" << n(kH - 12) << "\" text-anchor=\"middle\">k="
     << a.k << ", r = " << fmt("%.4f", a.pearson_r) << ", R2 = " << fmt("%.4f", a.fit.r_squared)
     << "</text>\n"
     << "</g>\n";
  os << "<line class=\"fit\" x1=\"" << n(sx(x0)) << "\" y1=\""
     << n(sy(a.fit.slope * x0 + a.fit.intercept)) << "\" x2=\"" << n(sx(x1)) << "\" y2=\""
     << n(sy(a.fit.slope * x1 + a.fit.intercept))
     << "\" stroke=\"firebrick\" stroke-width=\"1.5\"/>\n";
  os << "<g fill=\"steelblue\">\n";
  for (const auto& p : a.points) {
    os << "<circle cx=\"" << n(sx(p.r1)) << "\" cy=\"" << n(sy(p.r2)) << "\" r=\"4\"><title>"
       << xml_escape(p.model) << ' ' << xml_escape(p.language) << "</title></circle>\n";
  }
  os << "</g>\n</svg>\n";
  return os.str();
}

std::string scatter_csv(const BeamAnalysis& a) {
  std::ostringstream os;
  os << "model,language,r1,r2\n";
  for (const auto& p : a.points) {
    os << p.model << ',' << p.language << ',' << fmt("%.6f", p.r1) << ',' << fmt("%.6f", p.r2)
       << '\n';
  }
  return os.str();
}

void emit_scatter(const BeamAnalysis& analysis, const std::filesystem::path& svg_path) {
  const std::string svg = scatter_svg(analysis);
  const std::string csv = scatter_csv(analysis);
  write_file(svg_path, svg);
  std::filesystem::path csv_path = svg_path;
  csv_path.replace_extension(".csv");
  write_file(csv_path, csv);
}

}  // namespace selfdistill
