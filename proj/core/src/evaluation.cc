// Copyright (c) 2026 MCSAE Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mcsae/evaluation.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mcsae/errors.h"

namespace mcsae {

namespace {

// FAR and FRR are step functions that only change at the scores
// themselves: any threshold in (s_i, s_{i+1}] decides every trial exactly
// as t = s_{i+1} does. Evaluating at each distinct score plus one point
// beyond the maximum therefore covers every achievable operating point.
std::vector<double> CandidateThresholds(const ScoreSet& s) {
  std::vector<double> t = s.scores;
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  t.push_back(t.back() + 1.0);
  return t;
}

struct ClassCounts {
  size_t targets = 0;
  size_t nontargets = 0;
};

ClassCounts CheckScoreSet(const ScoreSet& s) {
  if (s.scores.size() != s.labels.size())
    throw ScoringError("score set: scores and labels differ in length");
  ClassCounts c;
  for (size_t i = 0; i < s.labels.size(); ++i) {
    if (!std::isfinite(s.scores[i]))
      throw ScoringError("score set: non-finite score at index " +
                         std::to_string(i));
    if (s.labels[i] == 1)
      ++c.targets;
    else if (s.labels[i] == 0)
      ++c.nontargets;
    else
      throw ScoringError("score set: label must be 0 or 1 at index " +
                         std::to_string(i));
  }
  if (c.targets == 0) throw ScoringError("score set: no target trials");
  if (c.nontargets == 0) throw ScoringError("score set: no nontarget trials");
  return c;
}

// Error counts at threshold t under the >= / < decision rule.
void CountsAt(const ScoreSet& s, double t, size_t* false_accepts,
              size_t* false_rejects) {
  *false_accepts = 0;
  *false_rejects = 0;
  for (size_t i = 0; i < s.scores.size(); ++i) {
    if (s.labels[i] == 1) {
      if (s.scores[i] < t) ++*false_rejects;
    } else {
      if (s.scores[i] >= t) ++*false_accepts;
    }
  }
}

}  // namespace

std::vector<Trial> ParseTrials(std::istream& is, const std::string& context) {
  std::vector<Trial> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string label, enroll, test, extra;
    if (!(ls >> label)) continue;  // blank line
    if (!(ls >> enroll >> test))
      throw ParseError(context + ": line " + std::to_string(line_no) +
                       ": expected 'label enroll test'");
    if (ls >> extra)
      throw ParseError(context + ": line " + std::to_string(line_no) +
                       ": trailing token '" + extra + "'");
    if (label != "0" && label != "1")
      throw ParseError(context + ": line " + std::to_string(line_no) +
                       ": label must be 0 or 1, got '" + label + "'");
    out.push_back({label == "1", enroll, test});
  }
  return out;
}

std::vector<Trial> LoadTrials(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open trial list " + path);
  return ParseTrials(is, path);
}

double CosineScore(const std::vector<double>& a,
                   const std::vector<double>& b) {
  if (a.size() != b.size())
    throw DimensionError("cosine: embeddings are " + std::to_string(a.size()) +
                         " and " + std::to_string(b.size()) + " wide");
  if (a.empty()) throw DimensionError("cosine: empty embeddings");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0)
    throw ScoringError("cosine: zero-norm embedding");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

MetricResult ComputeEer(const ScoreSet& s) {
  ClassCounts c = CheckScoreSet(s);
  // |FAR - FRR| = |fa * targets - fr * nontargets| / (targets * nontargets),
  // so comparing the integer numerators picks the same candidate without any
  // rounding, which keeps relabeled and rescaled inputs on the same winner.
  MetricResult best;
  size_t best_fa = 0, best_fr = 0;
  uint64_t best_gap = 0;
  bool first = true;
  for (double t : CandidateThresholds(s)) {
    size_t fa, fr;
    CountsAt(s, t, &fa, &fr);
    uint64_t lhs = static_cast<uint64_t>(fa) * c.targets;
    uint64_t rhs = static_cast<uint64_t>(fr) * c.nontargets;
    uint64_t gap = lhs > rhs ? lhs - rhs : rhs - lhs;
    if (first || gap < best_gap) {
      first = false;
      best_gap = gap;
      best_fa = fa;
      best_fr = fr;
      best.threshold = t;
    }
  }
  double far = static_cast<double>(best_fa) / static_cast<double>(c.nontargets);
  double frr = static_cast<double>(best_fr) / static_cast<double>(c.targets);
  best.value = 0.5 * (far + frr);
  return best;
}

MetricResult ComputeMinDcf(const ScoreSet& s, double p_target, double c_miss,
                           double c_fa) {
  if (!(p_target > 0.0 && p_target < 1.0))
    throw ScoringError("min dcf: p_target must lie in (0, 1)");
  if (c_miss <= 0.0 || c_fa <= 0.0)
    throw ScoringError("min dcf: costs must be positive");
  ClassCounts c = CheckScoreSet(s);
  double norm = std::min(c_miss * p_target, c_fa * (1.0 - p_target));
  MetricResult best;
  bool first = true;
  for (double t : CandidateThresholds(s)) {
    size_t fa, fr;
    CountsAt(s, t, &fa, &fr);
    double far = static_cast<double>(fa) / static_cast<double>(c.nontargets);
    double frr = static_cast<double>(fr) / static_cast<double>(c.targets);
    double dcf = (c_miss * frr * p_target + c_fa * far * (1.0 - p_target)) /
                 norm;
    if (first || dcf < best.value) {
      first = false;
      best.value = dcf;
      best.threshold = t;
    }
  }
  return best;
}

void WriteScores(std::ostream& os, const std::vector<ScoredTrial>& rows) {
  char num[40];
  for (const ScoredTrial& r : rows) {
    std::snprintf(num, sizeof(num), "%.17g", r.score);
    os << r.label << ' ' << num << ' ' << r.enroll << ' ' << r.test << '\n';
  }
}

std::vector<ScoredTrial> ReadScores(std::istream& is,
                                    const std::string& context) {
  std::vector<ScoredTrial> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string label, score, enroll, test, extra;
    if (!(ls >> label)) continue;
    if (!(ls >> score >> enroll >> test))
      throw ParseError(context + ": line " + std::to_string(line_no) +
                       ": expected 'label score enroll test'");
    if (ls >> extra)
      throw ParseError(context + ": line " + std::to_string(line_no) +
                       ": trailing token '" + extra + "'");
    if (label != "0" && label != "1")
      throw ParseError(context + ": line " + std::to_string(line_no) +
                       ": label must be 0 or 1, got '" + label + "'");
    ScoredTrial r;
    r.label = label == "1" ? 1 : 0;
    char* end = nullptr;
    r.score = std::strtod(score.c_str(), &end);
    if (end == score.c_str() || *end != '\0')
      throw ParseError(context + ": line " + std::to_string(line_no) +
                       ": bad score '" + score + "'");
    r.enroll = enroll;
    r.test = test;
    out.push_back(std::move(r));
  }
  return out;
}

void SaveScores(const std::string& path,
                const std::vector<ScoredTrial>& rows) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write score file " + path);
  WriteScores(os, rows);
  os.flush();
  if (!os) throw IoError("failed writing score file " + path);
}

std::vector<ScoredTrial> LoadScores(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open score file " + path);
  return ReadScores(is, path);
}

ScoreSet ToScoreSet(const std::vector<ScoredTrial>& rows) {
  ScoreSet s;
  s.scores.reserve(rows.size());
  s.labels.reserve(rows.size());
  for (const ScoredTrial& r : rows) {
    s.scores.push_back(r.score);
    s.labels.push_back(r.label);
  }
  return s;
}

}  // namespace mcsae
